#include "firesale/scenario_io.hpp"
#include "firesale/transitions.hpp"
#include "support/generators.hpp"
#include "support/properties.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace firesale;

namespace {

std::vector<Bank> demo_banks() {
    return {gen::one_industry_bank("i", 100, 8), gen::one_industry_bank("j", 50, 2.5)};
}

Scenario load(const std::string& name) { return cli::load_scenario(std::string(SCENARIO_DIR) + "/" + name); }

std::vector<int> sequence(const RegimeTimeline& tl) {
    std::vector<int> out;
    for (const auto& iv : tl.intervals) out.push_back(iv.label);
    return out;
}

}  // namespace

TEST(Thresholds, DemoClosedFormsAndRealizedRoot) {
    auto banks = demo_banks();
    auto env = gen::env(0.02, 0.0);
    auto ts = thresholds(banks, env);
    EXPECT_NEAR(ts.banks[0].demand_root, 1.0 / 24.0, 1e-9);
    EXPECT_NEAR(ts.banks[1].demand_root, 0.0104167, 1e-7);
    EXPECT_NEAR(ts.banks[1].demand_root, 0.01 / 0.96, 1e-12);
    ASSERT_TRUE(ts.banks[0].realized_root.has_value());
    EXPECT_GT(*ts.banks[0].realized_root, 1.0 / 24.0);
    // The bank's component really changes sign there.
    auto before = env, after = env;
    before.epsilon = *ts.banks[0].realized_root - 1e-6;
    after.epsilon = *ts.banks[0].realized_root + 1e-6;
    EXPECT_LT(clear(banks, before).realized[0], 0);
    EXPECT_GE(clear(banks, after).realized[0], 0);
    EXPECT_TRUE(ts.hierarchy_ok);
}

TEST(Thresholds, HugePartnerRemovesBetaRoot) {
    // High leverage and tiny book next to a huge low-leverage bank: x stays
    // negative at zero shock whatever the price sensitivity.
    std::vector<Bank> pair{gen::one_industry_bank("h", 5, 0.75), gen::one_industry_bank("l", 1000, 45)};
    auto env = gen::env(0.01, 0.0);
    auto ts = thresholds(pair, env);
    EXPECT_FALSE(ts.banks[0].beta_root.has_value());
}

TEST(Thresholds, BetaRootNonIncreasingInShock) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        auto banks = gen::single_industry(rng, 2 + rep % 4);
        auto ts = thresholds(banks, gen::env(0.01, 0.005 * (rep % 4)));
        EXPECT_TRUE(ts.beta_monotone_in_eps) << rep;
        EXPECT_TRUE(ts.hierarchy_ok) << rep;
    }
}

TEST(RegimeClassify, DemoRunsThroughFourCases) {
    auto grid = make_grid(0, 0.1, 0.0005);
    auto tl = regime_classify(demo_banks(), gen::env(0.02, 0), grid);
    EXPECT_EQ(tl.type, PairType::type1);
    EXPECT_EQ(tl.high, "i");
    EXPECT_EQ(sequence(tl), (std::vector<int>{1, 2, 3, 4}));
    EXPECT_TRUE(tl.matches);
    EXPECT_FALSE(tl.mismatch_at.has_value());
    // Case two starts at the low bank's demand root, case three at the high bank's.
    ASSERT_EQ(tl.intervals.size(), 4u);
    EXPECT_NEAR(tl.intervals[1].from, 0.0104167, 0.0005);
    EXPECT_NEAR(tl.intervals[2].from, 1.0 / 24.0, 0.0005);
}

TEST(RegimeClassify, SymmetricPairHasTwoCases) {
    std::vector<Bank> pair{gen::one_industry_bank("a", 60, 4.2), gen::one_industry_bank("b", 60, 4.2)};
    auto grid = make_grid(0, 0.1, 0.0005);
    auto tl = regime_classify(pair, gen::env(0.01, 0), grid);
    EXPECT_EQ(tl.type, PairType::type2);
    EXPECT_EQ(sequence(tl), (std::vector<int>{1, 2}));
    EXPECT_TRUE(tl.matches);
    // The shared threshold is the common demand root.
    EXPECT_NEAR(tl.intervals[1].from, demand_root(0.07, 0.04), 0.0005);
}

TEST(RegimeClassify, TypeThreeBelowBetaRootHasFiveCases) {
    std::vector<Bank> pair{gen::one_industry_bank("h", 10, 0.9), gen::one_industry_bank("l", 100, 4.5)};
    auto grid = make_grid(0, 0.12, 0.0005);
    auto tl = regime_classify(pair, gen::env(0.0005, 0), grid);
    EXPECT_EQ(tl.type, PairType::type3);
    EXPECT_TRUE(tl.below_beta_root);
    EXPECT_EQ(sequence(tl), (std::vector<int>{1, 2, 3, 4, 5}));
    EXPECT_TRUE(tl.matches);
    // At zero shock both banks create credit.
    EXPECT_LT(tl.samples.front().x_high, 0);
    EXPECT_LT(tl.samples.front().x_low, 0);
}

TEST(RegimeClassify, UnmatchedPairNeverMatches) {
    std::vector<Bank> pair{gen::one_industry_bank("a", 60, 4.8), gen::one_industry_bank("b", 55, 4.0)};
    auto tl = regime_classify(pair, gen::env(0.01, 0), make_grid(0, 0.1, 0.001));
    EXPECT_EQ(tl.type, PairType::unmatched);
    EXPECT_FALSE(tl.matches);
}

TEST(RegimeClassify, RejectsWrongSize) {
    auto grid = make_grid(0, 0.1, 0.01);
    std::vector<Bank> one{gen::one_industry_bank("a", 60, 4.8)};
    EXPECT_THROW(regime_classify(one, gen::env(0.01, 0), grid), Error);
}

TEST(CompressionSweep, FiveBankChainExitsInLeverageOrder) {
    auto sc = load("chain5.json");
    double top = 0;
    for (const auto& b : sc.banks) top = std::max(top, demand_root(b.leverage(), 0.04));
    auto grid = make_grid(0, top, top / 400);
    auto sch = compression_sweep(sc.banks, sc.market, grid);
    ASSERT_EQ(sch.exits.size(), 5u);
    EXPECT_TRUE(sch.ascending);
    EXPECT_TRUE(sch.one_at_a_time);
    std::vector<BankId> order;
    for (const auto& e : sch.exits) order.push_back(e.bank);
    EXPECT_EQ(order, (std::vector<BankId>{"b", "a", "c", "e", "d"}));
    for (std::size_t q = 1; q < sch.exits.size(); ++q) EXPECT_GT(sch.exits[q].epsilon, sch.exits[q - 1].epsilon);
    // Threaded sweep gives the same schedule.
    auto par = compression_sweep(sc.banks, sc.market, grid, 4);
    ASSERT_EQ(par.exits.size(), sch.exits.size());
    for (std::size_t q = 0; q < sch.exits.size(); ++q) {
        EXPECT_EQ(par.exits[q].bank, sch.exits[q].bank);
        EXPECT_EQ(par.exits[q].epsilon, sch.exits[q].epsilon);
    }
}

TEST(CompressionSweep, SingleBankExitsAtItsRoot) {
    std::vector<Bank> one{gen::one_industry_bank("a", 70, 5.6)};
    auto env = gen::env(0.02, 0);
    double root = demand_root(0.08, 0.04);
    auto sch = compression_sweep(one, env, make_grid(0, 0.1, 0.001));
    ASSERT_EQ(sch.exits.size(), 1u);
    EXPECT_NEAR(sch.exits[0].epsilon, root, 1e-9);
}

TEST(CompressionSweep, DemoHighBankLeavesAfterItsDemandRoot) {
    auto sch = compression_sweep(demo_banks(), gen::env(0.02, 0), make_grid(0, 0.1, 0.001));
    ASSERT_FALSE(sch.exits.empty());
    EXPECT_EQ(sch.exits.back().bank, "i");
    EXPECT_GT(sch.exits.back().epsilon, 1.0 / 24.0);
}

TEST(CompressionSweep, EmptyGridIsEmpty) {
    std::vector<double> none;
    auto sch = compression_sweep(demo_banks(), gen::env(0.02, 0), none);
    EXPECT_TRUE(sch.exits.empty());
    EXPECT_TRUE(sch.clusters.empty());
}

TEST(IsoMaps, RoundTripsOnAdmissibleChains) {
    auto t = props::iso_round_trips(61, 50);
    EXPECT_TRUE(t.ok()) << t.summary();
}

TEST(IsoMaps, OutsideRangeIsRejected) {
    auto chain = sort_by_leverage_desc(demo_banks());
    auto ctx = iso_context(chain, gen::env(0.02, 0), 0);
    EXPECT_THROW(map_eps_to_A(ctx, 0.2), Error);
    EXPECT_THROW(iso_context(chain, gen::env(0.02, 0), 1), Error);
}

TEST(LayerCountControl, EveryHeadSizeOnFiveBanks) {
    auto sc = load("chain5.json");
    for (std::size_t k = 0; k <= 5; ++k) {
        auto banks = layer_count_control(sc.banks, sc.market, 5, k);
        EXPECT_EQ(maximal_bailout(banks, sc.market).size(), k) << k;
    }
}

TEST(LayerCountControl, SharedLeverageIsInfeasible) {
    std::vector<Bank> banks{gen::one_industry_bank("a", 60, 6), gen::one_industry_bank("b", 30, 3)};
    EXPECT_THROW(layer_count_control(banks, gen::env(0.02, 0), 2, 1), Error);
}

// A huge bank low in the chain creates the most credit while the others sit
// just below zero, so the most negative x is not at the top of the chain.
TEST(ChainOrder, MostNegativeIsNotTheMostLeveraged) {
    std::vector<Bank> banks{gen::one_industry_bank("a", 10, 1.2), gen::one_industry_bank("b", 10, 1.0),
                            gen::one_industry_bank("c", 1000, 60)};
    auto env = gen::env(0.002, 0);
    auto sol = clear(banks, env);
    for (double x : sol.realized) ASSERT_LT(x, 0);
    auto argmin_x = std::min_element(sol.realized.begin(), sol.realized.end()) - sol.realized.begin();
    auto top = sort_by_leverage_desc(banks).front().id;
    EXPECT_EQ(banks[static_cast<std::size_t>(argmin_x)].id, "c");
    EXPECT_NE(banks[static_cast<std::size_t>(argmin_x)].id, top);
}

TEST(MakeGrid, InclusiveAndEmpty) {
    auto g = make_grid(0, 0.1, 0.025);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_DOUBLE_EQ(g.back(), 0.1);
    EXPECT_TRUE(make_grid(0.2, 0.1, 0.01).empty());
    EXPECT_THROW(make_grid(0, 1, 0), Error);
}
