// Market clearing: how much each bank actually liquidates once the price
// impact of everyone's sales is taken into account.
#pragma once

#include "firesale/netmodel.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace firesale {

// Fraction of the book a bank needs to sell to get back to the floor.
double risk_mitigation_share(const Bank& bank, const MarketEnv& env);
double liquidation_demand(const Bank& bank, const MarketEnv& env);
double liquidation_demand(double assets, double equity, double theta_bar, double epsilon);
// Shock at which the demand changes sign.
double demand_root(double leverage, double theta_bar);
// 1 - risk_mitigation_share: the price level at which a bank stops selling.
double sell_hurdle(double leverage, double theta_bar, double epsilon);

struct LipschitzReport {
    double lipschitz = 0;          // bound on the Lipschitz constant of the exposure map
    double beta_bar_lipschitz = 0; // beta below which that bound is < 1
    double beta_bar_self_map = 0;  // beta below which the map keeps its ball
    double beta_bar = 0;           // min of the two
    bool contraction = false;
};

struct SolverOptions {
    double residual_tol = 1e-10;
    int max_iterations = 100000;
    double damping = 1.0;  // initial relaxation for the fixed-point solver
    std::optional<std::vector<double>> initial_exposure;
};

struct ClearingSolution {
    std::vector<BankId> banks;
    std::vector<IndustryId> industries;
    std::vector<double> demanded;
    std::vector<double> realized;
    std::vector<double> exposure;  // per-industry exponent of the price impact
    std::string method;
    int iterations = 0;
    double residual = 0;
    bool certified = true;
    bool expansion = false;  // some industry price went up

    double total_realized() const;
    double realized_of(const BankId& id) const;
};

class DivergedError : public Error {
public:
    DivergedError(const std::string& what, LipschitzReport report)
        : Error(ErrorKind::solver, what), report_(report) {}
    const LipschitzReport& report() const noexcept { return report_; }

private:
    LipschitzReport report_;
};

LipschitzReport liquidity_threshold(std::span<const Bank> cluster, const MarketEnv& env);
LipschitzReport liquidity_threshold(const IndustryPanel& panel, std::span<const double> demanded,
                                    const MarketEnv& env);

// True when every bank has the same disposal row, so one exponent drives all prices.
bool single_exponent(const IndustryPanel& panel);

ClearingSolution solve_fixed_point(std::span<const Bank> cluster, const MarketEnv& env,
                                   const SolverOptions& opts = {});
ClearingSolution solve_aggregate(std::span<const Bank> cluster, const MarketEnv& env);
// Dispatches: aggregate root-finding when one exponent suffices, fixed point otherwise.
ClearingSolution clear(std::span<const Bank> cluster, const MarketEnv& env,
                       const SolverOptions& opts = {});

// Liquidation when the bank faces the market alone.
double cms_solve(const Bank& bank, const MarketEnv& env, double demanded);
double cms_solve(const Bank& bank, const MarketEnv& env);

struct ShockThresholds {
    std::vector<BankId> banks;
    std::vector<double> demand_roots;
    std::vector<double> equity_bounds;  // largest shock each bank survives at the cleared prices
    double lowest_root = 0;
    double lowest_equity_bound = 0;
};

ShockThresholds shock_thresholds(std::span<const Bank> cluster, const MarketEnv& env);

}  // namespace firesale
