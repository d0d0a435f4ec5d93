#include "firesale/partition.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

namespace firesale {

const char* to_string(ChainClass c) {
    switch (c) {
        case ChainClass::negative_regular: return "negative-regular";
        case ChainClass::positive_regular: return "positive-regular";
        case ChainClass::negative_pre_regular: return "negative-pre-regular";
        case ChainClass::positive_pre_regular: return "positive-pre-regular";
        case ChainClass::unclassified: return "unclassified";
    }
    return "?";
}

std::vector<BankId> Chain::ids() const {
    std::vector<BankId> out;
    for (const auto& l : links) out.push_back(l.id);
    return out;
}

std::vector<Bank> sort_by_leverage_desc(std::span<const Bank> banks) {
    std::vector<Bank> v(banks.begin(), banks.end());
    std::sort(v.begin(), v.end(), [](const Bank& a, const Bank& b) {
        double ta = a.leverage(), tb = b.leverage();
        if (ta != tb) return ta > tb;
        return a.id < b.id;
    });
    return v;
}

namespace {

enum class Side { bailout, bailin };

bool member_ok(Side side, double x) { return side == Side::bailout ? x < 0 : x >= 0; }
bool demand_ok(Side side, double s) { return side == Side::bailout ? s < 0 : s >= 0; }
bool may_join(Side side, double s) { return side == Side::bailout ? s <= 0 : s >= 0; }

bool all_ok(Side side, const ClearingSolution& sol) {
    return std::all_of(sol.realized.begin(), sol.realized.end(), [&](double x) { return member_ok(side, x); });
}

bool is_maximal(Side side, std::span<const Bank> subspace, const std::vector<BankId>& candidate, const MarketEnv& env) {
    std::set<BankId> in(candidate.begin(), candidate.end());
    if (in.size() != candidate.size()) return false;
    auto members = select_banks(subspace, candidate);
    for (const auto& b : members)
        if (!demand_ok(side, liquidation_demand(b, env))) return false;
    if (!members.empty() && !all_ok(side, clear(members, env))) return false;
    for (const auto& j : subspace) {
        if (in.count(j.id)) continue;
        double s = liquidation_demand(j, env);
        if (!may_join(side, s)) continue;
        // Stand-alone liquidation shares the sign of demand; the clause is kept for completeness.
        double alone = cms_solve(j, env, s);
        if (side == Side::bailout ? alone > 0 : alone < 0) continue;
        auto grown = members;
        grown.push_back(j);
        if (all_ok(side, clear(grown, env))) return false;
    }
    return true;
}

std::vector<BankId> exhaustive(Side side, std::span<const Bank> subspace, const MarketEnv& env) {
    std::vector<BankId> pool;
    for (const auto& b : subspace)
        if (demand_ok(side, liquidation_demand(b, env))) pool.push_back(b.id);
    std::vector<BankId> best;
    for (std::size_t mask = 0; mask < (std::size_t{1} << pool.size()); ++mask) {
        std::vector<BankId> sub;
        for (std::size_t q = 0; q < pool.size(); ++q)
            if (mask & (std::size_t{1} << q)) sub.push_back(pool[q]);
        if (sub.size() > best.size() || (best.empty() && sub.empty()))
            if (is_maximal(side, subspace, sub, env)) best = sub;
    }
    return best;
}

// With one shared price exponent every member's liquidation is
// A_i (m_i - G(X)) for its own margin m_i = s_i / A_i, so the member with the
// smallest margin binds. Fixing that member, each other candidate costs
// A_i |m_i - m_binding| of a budget that depends only on the binding margin,
// and the largest cluster takes the cheapest candidates first.
std::optional<std::vector<BankId>> largest_shared_exponent(Side side, std::span<const Bank> subspace,
                                                           const MarketEnv& env) {
    if (env.modularity != Modularity::submodular || !(env.beta > 0)) return std::nullopt;
    auto panel = build_matrices(subspace);
    if (!single_exponent(panel)) return std::nullopt;
    Eigen::VectorXd share = panel.disposal.row(0).transpose();
    auto drag = [&](double total) {
        double g = 0;
        for (Eigen::Index k = 0; k < share.size(); ++k) g += share(k) * (1.0 - std::exp(-env.beta * share(k) * total));
        return g;
    };
    struct Cand { const Bank* bank; double margin; };
    std::vector<Cand> pool;
    for (const auto& b : subspace) {
        double s = liquidation_demand(b, env);
        if (demand_ok(side, s)) pool.push_back({&b, s / b.assets});
    }
    std::sort(pool.begin(), pool.end(), [&](const Cand& a, const Cand& b) {
        if (a.margin != b.margin) return a.margin < b.margin;
        return a.bank->id < b.bank->id;
    });
    std::vector<const Bank*> best;
    for (std::size_t l = 0; l < pool.size(); ++l) {
        const double ml = pool[l].margin;
        std::vector<std::pair<double, const Bank*>> costs;
        for (std::size_t q = 0; q < pool.size(); ++q) {
            if (q == l) continue;
            double gap = side == Side::bailout ? ml - pool[q].margin : pool[q].margin - ml;
            if (gap < 0) continue;  // would bind instead of the chosen member
            costs.emplace_back(pool[q].bank->assets * gap, pool[q].bank);
        }
        std::sort(costs.begin(), costs.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second->id < b.second->id;
        });
        // Bailout: members stay short while the credit -G(-C) is below -m_l.
        // Bail-in: members stay long while G(C) is at most m_l.
        auto fits = [&](double c) { return side == Side::bailout ? -drag(-c) < -ml : drag(c) <= ml; };
        if (!fits(0.0)) continue;
        std::vector<const Bank*> chosen{pool[l].bank};
        double spent = 0;
        for (const auto& [cost, bank] : costs) {
            if (!fits(spent + cost)) break;
            spent += cost;
            chosen.push_back(bank);
        }
        if (chosen.size() > best.size()) best = std::move(chosen);
    }
    std::vector<Bank> picked;
    for (const auto* b : best) picked.push_back(*b);
    auto order = sort_by_leverage_desc(picked);
    if (side == Side::bailin) std::reverse(order.begin(), order.end());
    return ids_of(order);
}

std::vector<BankId> greedy(Side side, std::span<const Bank> subspace, const MarketEnv& env) {
    if (auto exact = largest_shared_exponent(side, subspace, env); exact && is_maximal(side, subspace, *exact, env))
        return *exact;
    // Bailouts grow from the top of the leverage chain, bail-ins from the bottom.
    auto order = sort_by_leverage_desc(subspace);
    if (side == Side::bailin)
        std::sort(order.begin(), order.end(), [](const Bank& a, const Bank& b) {
            double ta = a.leverage(), tb = b.leverage();
            if (ta != tb) return ta < tb;
            return a.id < b.id;
        });
    std::vector<Bank> picked;
    for (const auto& b : order) {
        if (!demand_ok(side, liquidation_demand(b, env))) continue;
        auto trial = picked;
        trial.push_back(b);
        if (!all_ok(side, clear(trial, env))) break;
        picked = std::move(trial);
    }
    auto ids = ids_of(picked);
    if (is_maximal(side, subspace, ids, env)) return ids;
    // Only reachable when banks hold different industry mixes.
    std::size_t pool = 0;
    for (const auto& b : subspace) pool += demand_ok(side, liquidation_demand(b, env));
    if (pool <= 16) return exhaustive(side, subspace, env);
    return ids;
}

std::vector<BankId> minus(std::span<const Bank> all, const std::set<BankId>& drop) {
    std::vector<BankId> out;
    for (const auto& b : all)
        if (!drop.count(b.id)) out.push_back(b.id);
    return out;
}

}  // namespace

std::vector<BankId> maximal_bailout(std::span<const Bank> subspace, const MarketEnv& env) {
    return greedy(Side::bailout, subspace, env);
}

std::vector<BankId> maximal_bailin(std::span<const Bank> subspace, const MarketEnv& env) {
    return greedy(Side::bailin, subspace, env);
}

bool is_maximal_bailout(std::span<const Bank> subspace, const std::vector<BankId>& candidate, const MarketEnv& env) {
    return is_maximal(Side::bailout, subspace, candidate, env);
}

bool is_maximal_bailin(std::span<const Bank> subspace, const std::vector<BankId>& candidate, const MarketEnv& env) {
    return is_maximal(Side::bailin, subspace, candidate, env);
}

Decomposition weak_decompose(std::span<const Bank> subspace, const MarketEnv& env) {
    Decomposition d;
    d.bailout = maximal_bailout(subspace, env);
    d.bailin = maximal_bailin(subspace, env);
    std::set<BankId> taken(d.bailout.begin(), d.bailout.end());
    taken.insert(d.bailin.begin(), d.bailin.end());
    d.residual = minus(subspace, taken);
    d.remainder = d.residual;
    return d;
}

std::vector<Decomposition> iterate_weak_decompose(std::span<const Bank> subspace, const MarketEnv& env) {
    std::vector<Decomposition> rounds;
    std::vector<Bank> current(subspace.begin(), subspace.end());
    for (std::size_t r = 0; r <= subspace.size() && !current.empty(); ++r) {
        rounds.push_back(weak_decompose(current, env));
        const auto& last = rounds.back();
        if (last.residual.size() == current.size()) break;
        current = select_banks(subspace, last.residual);
    }
    return rounds;
}

Decomposition strong_decompose(std::span<const Bank> subspace, const MarketEnv& env, double sigma,
                               double sigma_bailin, std::mt19937_64& rng) {
    if (!(sigma >= 0 && sigma <= 1) || !(sigma_bailin >= 0 && sigma_bailin <= 1))
        throw Error(ErrorKind::validation, "sampling fractions must lie in [0, 1]");
    auto d = weak_decompose(subspace, env);
    d.strong = true;
    d.sigma = sigma;
    d.sigma_bailin = sigma_bailin;
    std::vector<BankId> shorts, longs;
    for (const auto& id : d.residual) {
        double s = liquidation_demand(find_bank(subspace, id), env);
        (s < 0 ? shorts : longs).push_back(id);
    }
    auto take = [&](const std::vector<BankId>& from, double frac) {
        auto count = static_cast<std::size_t>(std::floor(frac * static_cast<double>(from.size()) + 1e-12));
        std::vector<BankId> out;
        std::sample(from.begin(), from.end(), std::back_inserter(out), count, rng);
        return out;
    };
    d.bailout_transfer = take(shorts, sigma);
    d.bailin_transfer = take(longs, sigma_bailin);
    std::set<BankId> moved(d.bailout_transfer.begin(), d.bailout_transfer.end());
    moved.insert(d.bailin_transfer.begin(), d.bailin_transfer.end());
    d.remainder.clear();
    for (const auto& id : d.residual)
        if (!moved.count(id)) d.remainder.push_back(id);
    return d;
}

Chain chain_of(std::span<const Bank> subspace, const MarketEnv& env) {
    Chain c;
    auto order = sort_by_leverage_desc(subspace);
    if (order.empty()) return c;
    auto sol = clear(order, env);
    bool all_x_neg = true, all_x_pos = true, all_s_neg = true, all_s_pos = true;
    for (std::size_t i = 0; i < order.size(); ++i) {
        ChainLink l{order[i].id, order[i].leverage(), order[i].assets, sol.demanded[i], sol.realized[i]};
        all_x_neg = all_x_neg && l.realized < 0;
        all_x_pos = all_x_pos && l.realized >= 0;
        all_s_neg = all_s_neg && l.demanded < 0;
        all_s_pos = all_s_pos && l.demanded >= 0;
        c.links.push_back(std::move(l));
    }
    if (all_x_neg) c.cls = ChainClass::negative_regular;
    else if (all_x_pos) c.cls = ChainClass::positive_regular;
    else if (all_s_neg) c.cls = ChainClass::negative_pre_regular;
    else if (all_s_pos) c.cls = ChainClass::positive_pre_regular;
    return c;
}

ChainSplit chain_decompose(const Chain& chain, std::span<const Bank> banks, const MarketEnv& env) {
    auto members = select_banks(banks, chain.ids());
    bool positive = chain.cls == ChainClass::positive_regular || chain.cls == ChainClass::positive_pre_regular;
    auto head_ids = positive ? maximal_bailin(members, env) : maximal_bailout(members, env);
    std::set<BankId> head_set(head_ids.begin(), head_ids.end());
    std::vector<Bank> head, tail;
    for (const auto& b : members) (head_set.count(b.id) ? head : tail).push_back(b);
    return {chain_of(head, env), chain_of(tail, env)};
}

FiniteRiskReport finite_risk_check(std::span<const Bank> subspace, const MarketEnv& env, double tol) {
    FiniteRiskReport r;
    if (subspace.empty()) return r;
    auto p = build_matrices(subspace);
    if (!single_exponent(p)) throw Error(ErrorKind::validation, "finite-risk check needs identical disposal rows");
    Eigen::VectorXd share = p.disposal.row(0).transpose();
    auto supply_at = [&](double total) {
        double h = 0;
        for (Eigen::Index c = 0; c < share.size(); ++c) h += share(c) * (1.0 - std::exp(-env.beta * share(c) * total));
        return h;
    };
    auto sol = clear(subspace, env);
    double total = sol.total_realized();
    r.supply = supply_at(total);
    for (const auto& b : subspace) r.demand += risk_mitigation_share(b, env);
    r.slack = r.demand - r.supply;
    r.satisfied = r.slack >= -tol;
    r.perfect = std::fabs(r.slack) <= tol;
    // A slightly larger shock raises every bank's weighted demand.
    auto bumped = env;
    bumped.epsilon = std::min(env.epsilon + 1e-6, 1.0 - 1e-12);
    double total_up = clear(subspace, bumped).total_realized();
    r.co_movement = total_up >= total - 1e-9 * std::max(1.0, std::fabs(total));
    return r;
}

}  // namespace firesale
