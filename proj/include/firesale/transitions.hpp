// Shock and price-sensitivity thresholds, regime timelines for bank pairs,
// compression sweeps and the maps between assets, leverage and shock.
#pragma once

#include "firesale/partition.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace firesale {

struct BankThresholds {
    BankId id;
    double demand_root = 0;                  // shock at which s = 0
    std::optional<double> realized_root;     // shock at which x = 0, absent if no crossing in [0, 1)
    std::optional<double> beta_root;         // beta at which x = 0 at the current shock; absent means +inf
};

struct ThresholdSet {
    std::vector<BankThresholds> banks;
    bool hierarchy_ok = true;           // demand roots ordered like leverage
    bool ignition_alone = false;        // price after the top bank sells alone clears the next hurdle
    bool ignition_cluster = false;      // same with the whole maximal bailout cluster selling
    bool beta_monotone_in_eps = true;   // beta roots non-increasing when the shock rises
};

// Optional grid lets callers control where realized roots are searched.
ThresholdSet thresholds(std::span<const Bank> cluster, const MarketEnv& env, double eps_step = 1e-3);

std::optional<double> realized_root(std::span<const Bank> cluster, const MarketEnv& env,
                                    std::size_t index, double eps_step = 1e-3);
std::optional<double> beta_root(std::span<const Bank> cluster, const MarketEnv& env, std::size_t index);

enum class PairType { type1, type2, type3, unmatched };
const char* to_string(PairType);

// Orders the pair so the first bank has the higher leverage.
PairType detect_pair_type(const Bank& high, const Bank& low, double dominance = 1.5);

struct SignSample {
    double epsilon = 0;
    double x_high = 0, cms_high = 0, x_low = 0, cms_low = 0;
    int label = 0;  // 1-based case label within the detected type, 0 when none fits
};

struct RegimeInterval {
    double from = 0, to = 0;
    int label = 0;
};

struct RegimeTimeline {
    BankId high, low;
    PairType type = PairType::unmatched;
    bool below_beta_root = false;  // type 3 only
    std::vector<SignSample> samples;
    std::vector<RegimeInterval> intervals;
    std::vector<int> expected;  // case sequence the type should produce
    bool matches = false;
    std::optional<double> mismatch_at;
};

RegimeTimeline regime_classify(std::span<const Bank> pair, const MarketEnv& env,
                               std::span<const double> eps_grid, double dominance = 1.5);

struct ExitRecord {
    double epsilon = 0;
    BankId bank;
    double leverage = 0;
};

struct ExitSchedule {
    bool ignition = false;
    std::vector<ExitRecord> exits;
    bool ascending = true;      // exits in ascending leverage
    bool one_at_a_time = true;  // each exit removes exactly the lowest-leverage member
    std::vector<std::vector<BankId>> clusters;  // bailout cluster at each grid point
};

ExitSchedule compression_sweep(std::span<const Bank> cluster, const MarketEnv& env,
                               std::span<const double> eps_grid, int threads = 1);

// Bank w of a leverage-ordered chain, selling alone, against the hurdle of bank w+1.
struct IsoContext {
    double assets = 0;
    double leverage = 0;
    double next_leverage = 0;
    double beta = 0;
    double theta_bar = 0;
};

IsoContext iso_context(std::span<const Bank> chain_banks, const MarketEnv& env, std::size_t w);

double map_eps_to_A(const IsoContext& ctx, double eps);
double map_A_to_eps(const IsoContext& ctx, double assets);
double map_eps_to_theta(const IsoContext& ctx, double eps);
double map_theta_to_eps(const IsoContext& ctx, double next_leverage);

// Rescales assets (or, for k = 0, equity) of a chain of m banks so that its
// maximal bailout cluster has exactly k members.
std::vector<Bank> layer_count_control(std::span<const Bank> chain_banks, const MarketEnv& env,
                                      std::size_t m, std::size_t k);

std::vector<double> make_grid(double from, double to, double step);

}  // namespace firesale
