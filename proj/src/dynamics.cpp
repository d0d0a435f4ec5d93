#include "firesale/dynamics.hpp"

#include "firesale/partition.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace firesale {

const char* to_string(MoveRule r) {
    switch (r) {
        case MoveRule::partition_exit: return "partition-exit";
        case MoveRule::individual_exit: return "individual-exit";
        case MoveRule::switch_hold: return "switch-hold";
        case MoveRule::stochastic_transfer: return "stochastic-transfer";
    }
    return "?";
}

const char* to_string(SpaceKind k) {
    switch (k) {
        case SpaceKind::pure_bailout: return "pure-bailout";
        case SpaceKind::pure_bailin: return "pure-bailin";
        case SpaceKind::impure: return "impure";
    }
    return "?";
}

int PgsState::subspace_of(const BankId& id) const {
    for (const auto& s : subspaces)
        if (std::binary_search(s.members.begin(), s.members.end(), id)) return s.index;
    return -1;
}

bool same_membership(const PgsState& a, const PgsState& b) {
    if (a.subspaces.size() != b.subspaces.size()) return false;
    for (std::size_t i = 0; i < a.subspaces.size(); ++i)
        if (a.subspaces[i].members != b.subspaces[i].members) return false;
    return true;
}

namespace {

void solve_all(PgsState& st, std::span<const Bank> banks, const MarketEnv& env) {
    st.solutions.clear();
    for (const auto& sub : st.subspaces) {
        try {
            st.solutions.push_back(clear(select_banks(banks, sub.members), env));
        } catch (const Error& e) {
            throw Error(e.kind(), "subspace " + std::to_string(sub.index) + ": " + e.what());
        }
    }
}

}  // namespace

PgsState initial_state(std::span<const Bank> banks, const MarketEnv& env) {
    PgsState st;
    Subspace first;
    first.members = ids_of(banks);
    std::sort(first.members.begin(), first.members.end());
    st.subspaces.push_back(std::move(first));
    solve_all(st, banks, env);
    return st;
}

std::pair<PgsState, StepOutcome> perfection_step(const PgsState& state, std::span<const Bank> banks,
                                                 const MarketEnv& env, std::mt19937_64& rng,
                                                 const DynamicsOptions& opts) {
    StepOutcome out;
    const auto count = state.subspaces.size();
    out.stay.resize(count);
    out.exit.resize(count);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    for (std::size_t si = 0; si < count; ++si) {
        const auto& sub = state.subspaces[si];
        const int from = sub.index;
        auto members = select_banks(banks, sub.members);
        const ClearingSolution& sol = state.solutions.size() == count ? state.solutions[si] : clear(members, env);
        // Partition exit. With net credit creation in the subspace every bank
        // with non-negative demand sells more than it must, so all of them
        // leave together; otherwise only the maximal bail-in cluster does.
        std::set<BankId> group;
        if (sol.total_realized() < 0) {
            for (std::size_t i = 0; i < members.size(); ++i)
                if (sol.demanded[i] >= 0) group.insert(members[i].id);
        } else {
            auto bailin = maximal_bailin(members, env);
            group.insert(bailin.begin(), bailin.end());
        }
        std::set<BankId> solo;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto& id = members[i].id;
            if (group.count(id)) continue;
            double s = sol.demanded[i], x = sol.realized[i];
            if (s < 0 && x >= 0) solo.insert(id);
            else if (opts.bailin_individual_exit && s >= 0 && x >= 0) solo.insert(id);
        }
        std::size_t stayers = members.size() - group.size() - solo.size();
        if (stayers == 0) {
            if (!solo.empty() && !group.empty()) {
                group.clear();  // the bail-in cluster already sits alone once the others leave
            } else {
                group.clear();
                solo.clear();
                out.blocked = true;
            }
        }
        std::vector<BankId> exits, stays;
        std::vector<std::size_t> held;
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto& id = members[i].id;
            if (group.count(id)) {
                exits.push_back(id);
                out.events.push_back({state.t, id, from, from + 1, MoveRule::partition_exit});
            } else if (solo.count(id)) {
                exits.push_back(id);
                out.events.push_back({state.t, id, from, from + 1, MoveRule::individual_exit});
            } else {
                stays.push_back(id);
                if (sol.realized[i] < 0) {
                    held.push_back(i);
                    out.events.push_back({state.t, id, from, from, MoveRule::switch_hold});
                }
            }
        }
        if (env.p_switch < 1.0) {
            for (auto i : held) {
                if (stays.size() <= 1) break;
                // Bad state: the bank would sell less (or create more credit) on its own.
                double alone = cms_solve(members[i], env, sol.demanded[i]);
                if (!(alone < sol.realized[i])) continue;
                if (coin(rng) >= 1.0 - env.p_switch) continue;
                const auto& id = members[i].id;
                stays.erase(std::find(stays.begin(), stays.end(), id));
                exits.push_back(id);
                out.events.push_back({state.t, id, from, from + 1, MoveRule::stochastic_transfer});
            }
        }
        out.stay[si] = std::move(stays);
        out.exit[si] = std::move(exits);
    }

    PgsState next;
    next.t = state.t + 1;
    for (std::size_t si = 0; si < count; ++si) {
        Subspace sub;
        sub.index = static_cast<int>(si);
        sub.born = state.subspaces[si].born;
        sub.members = out.stay[si];
        if (si > 0) sub.members.insert(sub.members.end(), out.exit[si - 1].begin(), out.exit[si - 1].end());
        std::sort(sub.members.begin(), sub.members.end());
        next.subspaces.push_back(std::move(sub));
    }
    if (count > 0 && !out.exit[count - 1].empty()) {
        Subspace fresh;
        fresh.index = static_cast<int>(count);
        fresh.born = next.t;
        fresh.members = out.exit[count - 1];
        std::sort(fresh.members.begin(), fresh.members.end());
        next.subspaces.push_back(std::move(fresh));
    }
    solve_all(next, banks, env);
    return {std::move(next), std::move(out)};
}

int step_budget(std::size_t bank_count) {
    auto n = static_cast<int>(bank_count);
    return n * n + 8 * n + 10;
}

RunResult run_to_stability(const Scenario& scenario, const DynamicsOptions& opts) {
    require_valid(scenario, true);
    const auto& banks = scenario.banks;
    const auto& env = scenario.market;
    std::mt19937_64 rng(env.rng_seed);
    RunResult rr;
    auto state = initial_state(banks, env);
    rr.trace.states.push_back(state);
    const bool capped = opts.max_epochs >= 0;
    const int budget = capped ? opts.max_epochs : step_budget(banks.size());
    int epoch = 0;
    for (; epoch < budget; ++epoch) {
        auto [next, outcome] = perfection_step(state, banks, env, rng, opts);
        rr.trace.events.insert(rr.trace.events.end(), outcome.events.begin(), outcome.events.end());
        if (same_membership(next, state)) {
            rr.trace.stable = true;
            break;
        }
        state = std::move(next);
        rr.trace.states.push_back(state);
    }
    if (!rr.trace.stable && !capped)
        throw Error(ErrorKind::internal, "dynamics exceeded the step budget of " + std::to_string(budget) + " epochs");

    const auto& fin = state;
    const int last = static_cast<int>(rr.trace.states.size()) - 1;
    for (const auto& sub : fin.subspaces) {
        int since = last;
        for (int t = last; t >= 0; --t) {
            const auto& st = rr.trace.states[static_cast<std::size_t>(t)];
            auto idx = static_cast<std::size_t>(sub.index);
            if (idx >= st.subspaces.size() || st.subspaces[idx].members != sub.members) break;
            since = t;
        }
        rr.trace.purification_time.push_back(since);
        // Joint operations from birth until the membership was final; a subspace
        // born pure still needs the one operation that confirms it.
        rr.trace.operator_count.push_back(std::max(1, since - sub.born));
    }
    rr.final_state = state;
    return rr;
}

PurityReport purity_check(const PgsState& state, std::span<const Bank> banks, const MarketEnv& env) {
    PurityReport r;
    r.all_pure = true;
    r.signs_consistent = true;
    for (std::size_t si = 0; si < state.subspaces.size(); ++si) {
        auto members = select_banks(banks, state.subspaces[si].members);
        auto sorted = state.subspaces[si].members;
        auto bo = maximal_bailout(members, env);
        auto bi = maximal_bailin(members, env);
        std::sort(bo.begin(), bo.end());
        std::sort(bi.begin(), bi.end());
        SpaceKind kind = SpaceKind::impure;
        if (bo == sorted) kind = SpaceKind::pure_bailout;
        else if (bi == sorted) kind = SpaceKind::pure_bailin;
        r.kinds.push_back(kind);
        r.all_pure = r.all_pure && kind != SpaceKind::impure;
        auto sol = clear(members, env);
        for (std::size_t i = 0; i < members.size(); ++i) {
            double s = sol.demanded[i], x = sol.realized[i];
            if ((s < 0 && !(x < 0)) || (s > 0 && !(x >= 0))) r.signs_consistent = false;
        }
    }
    auto settled = env;
    settled.p_switch = 1.0;
    std::mt19937_64 rng(env.rng_seed);
    auto st = state;
    solve_all(st, banks, settled);
    r.fixpoint = same_membership(perfection_step(st, banks, settled, rng).first, state);
    r.equivalent = r.all_pure == r.signs_consistent && r.signs_consistent == r.fixpoint;
    return r;
}

IterationBounds iteration_bounds(const Scenario& scenario, const RunResult& run) {
    IterationBounds b;
    const auto& banks = scenario.banks;
    const auto& env = scenario.market;
    const auto& states = run.trace.states;
    b.epochs = static_cast<int>(states.size()) - 1;
    auto b0 = maximal_bailout(banks, env);
    auto bi0 = maximal_bailin(banks, env);
    std::set<BankId> b0s(b0.begin(), b0.end()), bi0s(bi0.begin(), bi0.end());
    const auto& at1 = states.size() > 1 ? states[1] : states.back();
    for (const auto& id : at1.subspaces[0].members) b.m += !b0s.count(id);
    if (at1.subspaces.size() > 1)
        for (const auto& id : at1.subspaces[1].members) b.n += !bi0s.count(id);
    b.upper = std::max(0L, 8L * b.m - 2) + static_cast<long>(b.n + 1) * b.n;
    const auto& fin = run.final_state;
    for (std::size_t i = 1; i + 1 < fin.subspaces.size(); ++i) b.observed += 2L * run.trace.operator_count[i];
    b.within = b.lower <= b.observed && b.observed <= b.upper;

    int outside = 0;
    for (const auto& bk : banks)
        if (liquidation_demand(bk, env) <= 0 && !b0s.count(bk.id) && !bi0s.count(bk.id)) ++outside;
    b.bailin_epoch_bound = outside + 2;
    auto target = bi0;
    std::sort(target.begin(), target.end());
    if (!target.empty()) {
        for (std::size_t t = 0; t < states.size() && !b.bailin_solo_epoch; ++t)
            for (const auto& sub : states[t].subspaces)
                if (sub.members == target) { b.bailin_solo_epoch = static_cast<int>(t); break; }
        b.bailin_epoch_within = b.bailin_solo_epoch && *b.bailin_solo_epoch <= b.bailin_epoch_bound;
    }
    return b;
}

AuditReport no_turning_back_audit(const Trace& trace) {
    AuditReport a;
    std::map<BankId, int> where;
    std::size_t bank_count = 0;
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
        const auto& st = trace.states[t];
        std::size_t seen = 0;
        std::set<BankId> here;
        for (const auto& sub : st.subspaces) {
            if (sub.members.empty())
                a.violations.push_back("epoch " + std::to_string(t) + ": subspace " + std::to_string(sub.index) + " is empty");
            for (const auto& id : sub.members) {
                ++seen;
                if (!here.insert(id).second) a.violations.push_back("epoch " + std::to_string(t) + ": " + id + " appears twice");
                auto it = where.find(id);
                if (it != where.end() && sub.index < it->second)
                    a.violations.push_back("epoch " + std::to_string(t) + ": " + id + " moved back from " +
                                           std::to_string(it->second) + " to " + std::to_string(sub.index));
                where[id] = sub.index;
            }
        }
        if (t == 0) bank_count = seen;
        else if (seen != bank_count) a.violations.push_back("epoch " + std::to_string(t) + ": bank count changed");
        if (t > 0 && st.subspaces.size() < trace.states[t - 1].subspaces.size())
            a.violations.push_back("epoch " + std::to_string(t) + ": dimension decreased");
    }
    a.pass = a.violations.empty();
    return a;
}

}  // namespace firesale
