// Comparisons between a bank's liquidation inside a cluster and in some
// reference market (alone, or a sub-cluster).
#pragma once

#include "firesale/clearing.hpp"

#include <span>
#include <string>
#include <vector>

namespace firesale {

// Price levels at which banks with zero demand and with zero leverage gap
// stop liquidating. Both are pinned at par.
inline constexpr double schelling_point = 1.0;
inline constexpr double knightian_point = 1.0;

enum class Incentive { favors_cluster, favors_reference, neutral };
const char* to_string(Incentive);

struct CoeDelta {
    std::vector<BankId> banks;
    std::vector<double> cluster_x;
    std::vector<double> reference_x;
    std::vector<double> delta;  // cluster_x - reference_x; negative means the cluster sells less
    std::vector<Incentive> incentive;
};

// Reference: every bank facing the market on its own.
CoeDelta coe_delta_vs_cms(std::span<const Bank> cluster, const MarketEnv& env);
// Reference: the members of `reference` clearing among themselves.
CoeDelta coe_delta(std::span<const Bank> cluster, std::span<const Bank> reference,
                   const MarketEnv& env);

struct PartitionIncentives {
    std::vector<BankId> positive;  // x >= 0 in the full cluster
    std::vector<BankId> negative;
    CoeDelta positive_alone;       // positive members clearing without the others
    CoeDelta negative_alone;
    // Opposite incentives: positive members sell more inside the full cluster
    // than among themselves, negative members create more credit inside it.
    bool positive_crowded_out = true;
    bool negative_gains_credit = true;
};

PartitionIncentives classify_partition(std::span<const Bank> cluster, const MarketEnv& env);

enum class EntrantSign { positive, negative, mixed, none };
const char* to_string(EntrantSign);

struct EntrantProbe {
    std::vector<BankId> incumbents;
    std::vector<double> before;  // incumbents clearing alone
    std::vector<double> after;   // incumbents after the entrants join
    std::vector<double> effect;  // after - before
    std::vector<BankId> entrants;
    std::vector<double> entrant_x;  // entrants' liquidation in the union
    EntrantSign sign = EntrantSign::none;
    int expected_direction = 0;  // -1 incumbents sell less, +1 more, 0 no change
    bool holds = true;
};

EntrantProbe entrant_effect(std::span<const Bank> incumbents, std::span<const Bank> entrants,
                            const MarketEnv& env);

struct AggregateProbe {
    double total_before = 0;
    double total_after = 0;
    bool total_rose = false;
    bool holds = true;  // short sellers fall when the total rises, long sellers rise when it falls
    std::vector<BankId> violators;
};

AggregateProbe aggregate_monotonicity_check(std::span<const Bank> incumbents,
                                            std::span<const Bank> entrants, const MarketEnv& env);

}  // namespace firesale
