// Epoch-by-epoch regrouping of banks into subspaces until nobody wants to move.
#pragma once

#include "firesale/clearing.hpp"

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace firesale {

enum class MoveRule { partition_exit, individual_exit, switch_hold, stochastic_transfer };
const char* to_string(MoveRule);

struct MoveEvent {
    int epoch = 0;
    BankId bank;
    int from = 0;
    int to = 0;  // equal to `from` for switch holds
    MoveRule rule = MoveRule::switch_hold;
};

struct Subspace {
    int index = 0;
    int born = 0;
    std::vector<BankId> members;  // kept sorted
};

struct PgsState {
    int t = 0;
    std::vector<Subspace> subspaces;
    std::vector<ClearingSolution> solutions;  // per subspace, at this state's membership

    int dimension() const { return static_cast<int>(subspaces.size()); }
    int subspace_of(const BankId& id) const;
};

bool same_membership(const PgsState& a, const PgsState& b);

struct DynamicsOptions {
    // Also let long members outside the maximal bail-in cluster leave on
    // their own when they stay long after clearing.
    bool bailin_individual_exit = false;
    // Negative: use the theoretical bound plus a margin.
    int max_epochs = -1;
};

struct StepOutcome {
    std::vector<std::vector<BankId>> stay;
    std::vector<std::vector<BankId>> exit;
    std::vector<MoveEvent> events;
    bool blocked = false;  // some subspace would have emptied; nobody moved there
};

PgsState initial_state(std::span<const Bank> banks, const MarketEnv& env);

std::pair<PgsState, StepOutcome> perfection_step(const PgsState& state, std::span<const Bank> banks,
                                                 const MarketEnv& env, std::mt19937_64& rng,
                                                 const DynamicsOptions& opts = {});

struct Trace {
    std::vector<PgsState> states;  // states[0] is the initial state
    std::vector<MoveEvent> events;
    bool stable = false;
    std::vector<int> purification_time;  // per final subspace: first epoch it reached its final membership
    std::vector<int> operator_count;     // per final subspace: operations from birth to final membership, at least 1
};

struct RunResult {
    PgsState final_state;
    Trace trace;
};

RunResult run_to_stability(const Scenario& scenario, const DynamicsOptions& opts = {});
int step_budget(std::size_t bank_count);

enum class SpaceKind { pure_bailout, pure_bailin, impure };
const char* to_string(SpaceKind);

struct PurityReport {
    std::vector<SpaceKind> kinds;
    bool all_pure = false;        // every subspace is pure
    bool signs_consistent = false; // short banks sell negative, long banks positive
    bool fixpoint = false;         // one more step changes nothing
    bool equivalent = false;       // the three flags agree
};

PurityReport purity_check(const PgsState& state, std::span<const Bank> banks, const MarketEnv& env);

struct IterationBounds {
    int m = 0;  // first subspace at t=1 minus its maximal bailout cluster
    int n = 0;  // second subspace at t=1 minus the initial maximal bail-in cluster
    long lower = 0;
    long upper = 0;
    long observed = 0;  // twice the operator count over middle subspaces
    bool within = false;
    std::optional<int> bailin_solo_epoch;
    int bailin_epoch_bound = 0;
    bool bailin_epoch_within = true;
    int epochs = 0;
};

IterationBounds iteration_bounds(const Scenario& scenario, const RunResult& run);

struct AuditReport {
    bool pass = true;
    std::vector<std::string> violations;
};

AuditReport no_turning_back_audit(const Trace& trace);

}  // namespace firesale
