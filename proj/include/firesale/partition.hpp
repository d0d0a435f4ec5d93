// Maximal bailout / bail-in clusters, decompositions of a subspace and the
// leverage-ordered chain view of it.
#pragma once

#include "firesale/clearing.hpp"

#include <random>
#include <span>
#include <vector>

namespace firesale {

// Banks sorted by leverage, descending; equal leverage falls back to id.
std::vector<Bank> sort_by_leverage_desc(std::span<const Bank> banks);

// Bailout: every member short (s < 0) and still short after clearing together.
// Bail-in: every member long (s >= 0) and still long after clearing together.
std::vector<BankId> maximal_bailout(std::span<const Bank> subspace, const MarketEnv& env);
std::vector<BankId> maximal_bailin(std::span<const Bank> subspace, const MarketEnv& env);

bool is_maximal_bailout(std::span<const Bank> subspace, const std::vector<BankId>& candidate,
                        const MarketEnv& env);
bool is_maximal_bailin(std::span<const Bank> subspace, const std::vector<BankId>& candidate,
                       const MarketEnv& env);

struct Decomposition {
    std::vector<BankId> bailout;
    std::vector<BankId> bailin;
    std::vector<BankId> residual;

    bool strong = false;
    double sigma = 0;
    double sigma_bailin = 0;
    // Strong split: sampled parts of the residual that would join each cluster.
    std::vector<BankId> bailout_transfer;
    std::vector<BankId> bailin_transfer;
    std::vector<BankId> remainder;  // residual minus both transfers
};

Decomposition weak_decompose(std::span<const Bank> subspace, const MarketEnv& env);
// Re-applies weak_decompose to the residual until it stops changing.
std::vector<Decomposition> iterate_weak_decompose(std::span<const Bank> subspace,
                                                  const MarketEnv& env);
// sigma of the residual's short banks and sigma_bailin of its long banks are
// sampled without replacement; counts are floored.
Decomposition strong_decompose(std::span<const Bank> subspace, const MarketEnv& env,
                               double sigma, double sigma_bailin, std::mt19937_64& rng);

enum class ChainClass {
    negative_regular,
    positive_regular,
    negative_pre_regular,
    positive_pre_regular,
    unclassified,
};
const char* to_string(ChainClass);

struct ChainLink {
    BankId id;
    double leverage = 0;
    double assets = 0;
    double demanded = 0;
    double realized = 0;
};

struct Chain {
    std::vector<ChainLink> links;
    ChainClass cls = ChainClass::unclassified;

    std::vector<BankId> ids() const;
};

Chain chain_of(std::span<const Bank> subspace, const MarketEnv& env);

struct ChainSplit {
    Chain head;  // maximal cluster of the chain
    Chain tail;
};

ChainSplit chain_decompose(const Chain& chain, std::span<const Bank> banks, const MarketEnv& env);

struct FiniteRiskReport {
    double supply = 0;  // 1 - e^{-beta X}
    double demand = 0;  // sum of risk-mitigation shares
    double slack = 0;   // demand - supply
    bool satisfied = false;
    bool perfect = false;
    bool co_movement = false;  // X does not fall when the weighted demand rises
};

FiniteRiskReport finite_risk_check(std::span<const Bank> subspace, const MarketEnv& env,
                                   double tol = 1e-9);

}  // namespace firesale
