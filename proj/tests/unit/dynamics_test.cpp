#include "firesale/dynamics.hpp"
#include "firesale/scenario_io.hpp"
#include "support/generators.hpp"
#include "support/properties.hpp"

#include <gtest/gtest.h>

using namespace firesale;

namespace {

Scenario load(const std::string& name) { return cli::load_scenario(std::string(SCENARIO_DIR) + "/" + name); }

std::vector<std::vector<BankId>> memberships(const PgsState& st) {
    std::vector<std::vector<BankId>> out;
    for (const auto& s : st.subspaces) out.push_back(s.members);
    return out;
}

bool has_event(const Trace& tr, const BankId& id, int epoch, MoveRule rule) {
    for (const auto& e : tr.events)
        if (e.bank == id && e.epoch == epoch && e.rule == rule) return true;
    return false;
}

}  // namespace

TEST(Perfection, ThreeTierSplitsIntoItsClusters) {
    auto sc = load("three_tier.json");
    auto run = run_to_stability(sc);
    ASSERT_TRUE(run.trace.stable);
    EXPECT_LE(run.trace.states.size() - 1, 3u);
    using V = std::vector<BankId>;
    EXPECT_EQ(memberships(run.final_state),
              (std::vector<V>{{"c1_1", "c1_2", "c1_3"}, {"c2_1", "c2_2", "c2_3"}, {"c3_1", "c3_2", "c3_3"}}));
    EXPECT_EQ(run.final_state.dimension(), 3);
    auto p = purity_check(run.final_state, sc.banks, sc.market);
    EXPECT_TRUE(p.all_pure && p.equivalent);
}

TEST(Perfection, SixBankEventOrder) {
    auto sc = load("six_bank.json");
    auto run = run_to_stability(sc);
    ASSERT_TRUE(run.trace.stable);
    for (const char* id : {"D", "E", "F"}) EXPECT_TRUE(has_event(run.trace, id, 0, MoveRule::partition_exit)) << id;
    EXPECT_TRUE(has_event(run.trace, "C", 1, MoveRule::individual_exit));
    using V = std::vector<BankId>;
    EXPECT_EQ(memberships(run.final_state), (std::vector<V>{{"A", "B"}, {"C"}, {"D", "E", "F"}}));
    auto b = iteration_bounds(sc, run);
    EXPECT_TRUE(b.within);
}

// Net selling in the first subspace keeps F there at first although it is long.
TEST(Perfection, RetainedBankLeavesTheFirstSubspace) {
    auto sc = load("retained_f.json");
    auto run = run_to_stability(sc);
    ASSERT_TRUE(run.trace.stable);
    ASSERT_GE(run.trace.states[0].solutions[0].total_realized(), 0);
    ASSERT_GE(run.trace.states.size(), 2u);
    EXPECT_EQ(run.trace.states[1].subspace_of("F"), 0);
    EXPECT_GT(run.final_state.subspace_of("F"), 0);
    EXPECT_TRUE(no_turning_back_audit(run.trace).pass);
    EXPECT_TRUE(iteration_bounds(sc, run).within);
}

TEST(Perfection, PureBailoutNeverMoves) {
    Scenario sc;
    sc.banks = {gen::one_industry_bank("a", 80, 9), gen::one_industry_bank("b", 60, 7)};
    sc.market = gen::env(0.02, 0.0);
    auto run = run_to_stability(sc);
    EXPECT_TRUE(run.trace.stable);
    EXPECT_EQ(run.trace.states.size(), 1u);
    EXPECT_EQ(run.final_state.dimension(), 1);
    for (const auto& e : run.trace.events) EXPECT_EQ(e.rule, MoveRule::switch_hold);
    auto b = iteration_bounds(sc, run);
    EXPECT_EQ(b.m, 0);
    EXPECT_EQ(b.n, 0);
    EXPECT_EQ(b.observed, 0);
}

TEST(Perfection, SingleBankIsStableAtStart) {
    Scenario sc;
    sc.banks = {gen::one_industry_bank("a", 50, 4)};
    sc.market = gen::env(0.02, 0.03);
    auto run = run_to_stability(sc);
    EXPECT_TRUE(run.trace.stable);
    EXPECT_EQ(run.trace.states.size(), 1u);
}

TEST(Perfection, StepIsIdempotentOnceStable) {
    auto sc = load("six_bank.json");
    auto run = run_to_stability(sc);
    std::mt19937_64 rng(3);
    auto again = perfection_step(run.final_state, sc.banks, sc.market, rng).first;
    EXPECT_TRUE(same_membership(again, run.final_state));
    auto twice = perfection_step(again, sc.banks, sc.market, rng).first;
    EXPECT_TRUE(same_membership(twice, run.final_state));
}

TEST(Perfection, SeededRunsRepeat) {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        Scenario sc;
        sc.banks = gen::single_industry(rng, 6);
        sc.market = gen::env(0.02, 0.01 * (rep % 6));
        sc.market.p_switch = rep % 2 ? 0.5 : 1.0;
        sc.market.rng_seed = 1000 + static_cast<std::uint64_t>(rep);
        auto a = run_to_stability(sc);
        auto b = run_to_stability(sc);
        ASSERT_EQ(a.trace.states.size(), b.trace.states.size());
        for (std::size_t t = 0; t < a.trace.states.size(); ++t)
            EXPECT_TRUE(same_membership(a.trace.states[t], b.trace.states[t]));
        ASSERT_EQ(a.trace.events.size(), b.trace.events.size());
        for (std::size_t k = 0; k < a.trace.events.size(); ++k) {
            EXPECT_EQ(a.trace.events[k].bank, b.trace.events[k].bank);
            EXPECT_EQ(a.trace.events[k].rule, b.trace.events[k].rule);
        }
        EXPECT_TRUE(no_turning_back_audit(a.trace).pass);
    }
}

TEST(Perfection, MaxEpochsZeroKeepsInitialState) {
    auto sc = load("six_bank.json");
    DynamicsOptions o;
    o.max_epochs = 0;
    auto run = run_to_stability(sc, o);
    EXPECT_FALSE(run.trace.stable);
    EXPECT_EQ(run.trace.states.size(), 1u);
    EXPECT_EQ(run.final_state.dimension(), 1);
}

TEST(Audit, DemoPasses) {
    auto sc = load("demo.json");
    auto run = run_to_stability(sc);
    EXPECT_TRUE(no_turning_back_audit(run.trace).pass);
}

TEST(Audit, ForgedBackwardMoveFails) {
    auto sc = load("six_bank.json");
    auto run = run_to_stability(sc);
    ASSERT_GE(run.trace.states.size(), 2u);
    auto forged = run.trace;
    // Put D back into the first subspace in the last recorded state.
    auto& last = forged.states.back();
    int where = last.subspace_of("D");
    ASSERT_GT(where, 0);
    auto& from = last.subspaces[static_cast<std::size_t>(where)].members;
    from.erase(std::find(from.begin(), from.end(), "D"));
    last.subspaces[0].members.push_back("D");
    std::sort(last.subspaces[0].members.begin(), last.subspaces[0].members.end());
    auto a = no_turning_back_audit(forged);
    EXPECT_FALSE(a.pass);
    EXPECT_FALSE(a.violations.empty());
}

TEST(Audit, DuplicateBankFails) {
    auto sc = load("six_bank.json");
    auto run = run_to_stability(sc);
    auto forged = run.trace;
    forged.states.back().subspaces[0].members.push_back("A");
    EXPECT_FALSE(no_turning_back_audit(forged).pass);
}

// Signs can already line up before the state settles, so the equivalence is
// only promised on stable states.
TEST(PurityCheck, ImpureInitialState) {
    auto sc = load("six_bank.json");
    auto st = initial_state(sc.banks, sc.market);
    auto p = purity_check(st, sc.banks, sc.market);
    EXPECT_FALSE(p.all_pure);
    EXPECT_FALSE(p.fixpoint);
    EXPECT_EQ(p.kinds[0], SpaceKind::impure);
}

TEST(PurityCheck, OperatorCountsOnNewestAndFirstSubspaces) {
    for (const char* name : {"six_bank.json", "retained_f.json", "three_tier.json", "demo.json"}) {
        auto sc = load(name);
        auto run = run_to_stability(sc);
        const auto& ops = run.trace.operator_count;
        ASSERT_FALSE(ops.empty());
        EXPECT_GE(ops.front(), 1) << name;
        EXPECT_LE(ops.front(), 2) << name;
        EXPECT_EQ(ops.back(), 1) << name;
    }
}

TEST(IterationBounds, DemoCountsEpochs) {
    auto sc = load("demo.json");
    auto run = run_to_stability(sc);
    auto b = iteration_bounds(sc, run);
    EXPECT_EQ(b.epochs, 1);
    EXPECT_TRUE(b.within);
    EXPECT_TRUE(b.bailin_epoch_within);
}

TEST(Perfection, RandomPopulations) {
    auto t = props::dynamics_laws(404, 200, 10);
    EXPECT_TRUE(t.core.ok()) << t.core.summary();
}

// Individual exits lower the subspace total, which can push the next short
// bank long one epoch later; the first subspace then needs three operations.
TEST(IterationBounds, ShortExitsCascade) {
    auto sc = load("short_cascade.json");
    auto run = run_to_stability(sc);
    ASSERT_TRUE(run.trace.stable);
    EXPECT_EQ(run.trace.operator_count.front(), 3);
    for (int epoch : {0, 1, 2}) {
        int exits = 0;
        for (const auto& e : run.trace.events)
            exits += e.epoch == epoch && e.from == 0 && e.rule == MoveRule::individual_exit;
        EXPECT_EQ(exits, 1) << epoch;
    }
    EXPECT_EQ(memberships(run.final_state).front(), std::vector<BankId>{"b"});
}

TEST(Perfection, NetCreditSendsEveryLongBankOut) {
    auto sc = load("six_bank.json");
    auto st = initial_state(sc.banks, sc.market);
    ASSERT_LT(st.solutions[0].total_realized(), 0);
    std::mt19937_64 rng(1);
    auto next = perfection_step(st, sc.banks, sc.market, rng).first;
    for (const auto& b : sc.banks)
        if (liquidation_demand(b, sc.market) >= 0) EXPECT_EQ(next.subspace_of(b.id), 1) << b.id;
}
