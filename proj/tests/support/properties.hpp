// Sampled property checks shared by the unit tests and the acceptance binary.
// Each returns a tally of checked instances and violations; the expected
// directions are recomputed here from raw clearing results rather than read
// off the library's own verdict flags.
#pragma once

#include "firesale/counterfactual.hpp"
#include "firesale/dynamics.hpp"
#include "firesale/partition.hpp"
#include "firesale/transitions.hpp"
#include "generators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <random>
#include <sstream>
#include <string>

namespace props {

struct Tally {
    long checks = 0;
    long violations = 0;
    std::string first;

    void check(bool ok, const std::string& what) {
        ++checks;
        if (ok) return;
        if (violations++ == 0) first = what;
    }
    bool ok() const { return violations == 0 && checks > 0; }
    std::string summary() const {
        std::ostringstream os;
        os << checks << " checks, " << violations << " violations";
        if (violations) os << " (first: " << first << ")";
        return os.str();
    }
};

inline double tol_for(std::span<const firesale::Bank> banks) {
    double scale = 1;
    for (const auto& b : banks) scale = std::max(scale, b.assets);
    return 1e-9 * scale;
}

// Entrant law on raw numbers: sign +1 means every incumbent must rise.
inline void check_entrant(Tally& t, std::span<const firesale::Bank> base, std::span<const firesale::Bank> entrants,
                          const firesale::MarketEnv& env, int must, const std::string& tag) {
    auto probe = firesale::entrant_effect(base, entrants, env);
    bool ok = probe.holds && probe.expected_direction == must;
    // A move below double resolution (saturated prices) counts as rounding.
    for (std::size_t i = 0; i < probe.effect.size(); ++i)
        ok = ok && (must * probe.effect[i] > 0 || std::fabs(probe.effect[i]) <= 1e-12 * std::max(1.0, std::fabs(probe.before[i])));
    t.check(ok, tag);
}

struct CoeOptions {
    firesale::Modularity modularity = firesale::Modularity::submodular;
    int clusters = 500;
    std::uint64_t seed = 17;
};

struct CoeTally {
    Tally tally;
    Tally partition;  // partition-sign checks only
    int evaluated = 0;
    int skipped = 0;  // supermodular clusters without a clearing point
};

// Draws single-industry clusters (n <= 8) and checks, per cluster:
// one-sided and mixed partition signs (submodular only), entrant laws for a
// long base with long entrants and a short base with short entrants, and the
// aggregate monotonicity law on a random split. Supermodular expectations
// are the mirror images of the submodular ones. Cluster q is drawn from its
// own seed, so both regimes see the same clusters.
inline CoeTally coe_laws(const CoeOptions& o) {
    using namespace firesale;
    CoeTally out;
    Tally& t = out.tally;
    const int flip = o.modularity == Modularity::submodular ? 1 : -1;
    for (int q = 0; q < o.clusters; ++q) {
        std::mt19937_64 rng(o.seed * 1000003ULL + static_cast<std::uint64_t>(q));
        std::uniform_real_distribution<double> beta(0.002, 0.04), eps(0, 0.1), unit(0, 1);
        auto cluster = gen::single_industry(rng, 1 + static_cast<std::size_t>(q % 8));
        auto extra = gen::single_industry(rng, 3);
        for (std::size_t e = 0; e < extra.size(); ++e) extra[e].id = "e" + std::to_string(e);
        auto env = gen::env(beta(rng), eps(rng));
        env.modularity = o.modularity;
        ClearingSolution sol;
        try {
            sol = clear(cluster, env);
        } catch (const Error&) {
            ++out.skipped;
            continue;
        }
        ++out.evaluated;
        const std::string tag = "cluster " + std::to_string(q);

        if (o.modularity == Modularity::submodular) {
            auto part = classify_partition(cluster, env);
            bool mixed = !part.positive.empty() && !part.negative.empty();
            bool ok = true;
            if (mixed) {
                for (double d : part.positive_alone.delta) ok = ok && d > 0;
                for (double d : part.negative_alone.delta) ok = ok && d < 0;
            } else if (cluster.size() > 1) {
                const auto& alone = part.negative.empty() ? part.positive_alone : part.negative_alone;
                for (double d : alone.delta) ok = ok && (part.negative.empty() ? d < 0 : d > 0);
            } else {
                auto self = coe_delta_vs_cms(cluster, env);
                ok = std::fabs(self.delta[0]) <= tol_for(cluster) && self.incentive[0] == Incentive::neutral;
            }
            ok = ok && part.positive_crowded_out && part.negative_gains_credit;
            t.check(ok, tag + " partition signs");
            out.partition.check(ok, tag);
        }

        std::vector<Bank> pos, neg;
        for (std::size_t i = 0; i < cluster.size(); ++i)
            (sol.realized[i] >= 0 ? pos : neg).push_back(cluster[i]);
        std::vector<Bank> candidates = extra;
        // Entrants qualify when they keep their side's sign inside the union.
        for (const auto* base : {&pos, &neg}) {
            if (base->empty()) continue;
            const bool long_side = base == &pos;
            std::vector<Bank> group;
            for (const auto& c : candidates) {
                std::vector<Bank> u = *base;
                u.push_back(c);
                ClearingSolution us;
                try { us = clear(u, env); } catch (const Error&) { continue; }
                double xe = us.realized.back();
                if (long_side ? !(xe > 0) : !(xe < 0)) continue;
                check_entrant(t, *base, std::span<const Bank>(&c, 1), env, long_side ? -flip : flip,
                              tag + (long_side ? " long entrant " : " short entrant ") + c.id);
                group.push_back(c);
            }
            if (group.size() < 2) continue;
            std::vector<Bank> u = *base;
            u.insert(u.end(), group.begin(), group.end());
            ClearingSolution us;
            try { us = clear(u, env); } catch (const Error&) { continue; }
            bool same = true;
            for (std::size_t q = base->size(); q < u.size(); ++q)
                same = same && (long_side ? us.realized[q] > 0 : us.realized[q] < 0);
            if (same)
                check_entrant(t, *base, group, env, long_side ? -flip : flip, tag + " entrant group");
        }

        if (cluster.size() >= 2) {
            std::vector<Bank> inc, ent;
            for (const auto& b : cluster) (unit(rng) < 0.5 ? inc : ent).push_back(b);
            if (inc.empty()) { inc.push_back(ent.back()); ent.pop_back(); }
            if (ent.empty()) { ent.push_back(inc.back()); inc.pop_back(); }
            try {
                auto before = clear(inc, env);
                std::vector<Bank> u = inc;
                u.insert(u.end(), ent.begin(), ent.end());
                auto after = clear(u, env);
                double tol = tol_for(u);
                double rise = after.total_realized() - before.total_realized();
                bool ok = true;
                if (std::fabs(rise) > tol) {
                    for (std::size_t i = 0; i < inc.size(); ++i) {
                        double s = liquidation_demand(inc[i], env), eff = after.realized[i] - before.realized[i];
                        // Submodular: a higher total pulls short sellers down, a lower one pushes long sellers up.
                        bool rounding = std::fabs(eff) <= 1e-12 * std::max(1.0, std::fabs(before.realized[i]));
                        if (rise > 0 && s < 0) ok = ok && (-flip * eff > 0 || rounding);
                        if (rise < 0 && s > 0) ok = ok && (flip * eff > 0 || rounding);
                    }
                }
                auto rep = aggregate_monotonicity_check(inc, ent, env);
                t.check(ok && rep.holds, tag + " aggregate monotonicity");
            } catch (const Error&) {
            }
        }
    }
    return out;
}

struct OracleTally {
    Tally tally;
    long ambiguous = 0;  // populations where several largest subsets qualify
};

// Greedy maximal clusters against exhaustive subset search, both sides.
inline OracleTally greedy_vs_exhaustive(std::uint64_t seed, int populations, std::size_t max_n) {
    using namespace firesale;
    OracleTally out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> beta(0.005, 0.05), unit(0, 1);
    for (int rep = 0; rep < populations; ++rep) {
        std::size_t n = 2 + static_cast<std::size_t>(rep) % (max_n - 1);
        auto banks = gen::single_industry(rng, n);
        double top = 0;
        for (const auto& b : banks) top = std::max(top, demand_root(b.leverage(), 0.04));
        auto env = gen::env(beta(rng), unit(rng) * top);
        auto pop = gen::population(banks, env);
        for (bool negative : {true, false}) {
            auto greedy = negative ? maximal_bailout(banks, env) : maximal_bailin(banks, env);
            std::vector<std::size_t> idx;
            for (const auto& id : greedy)
                for (std::size_t i = 0; i < banks.size(); ++i)
                    if (banks[i].id == id) idx.push_back(i);
            std::sort(idx.begin(), idx.end());
            auto all = oracle::brute_force_maximal(pop, negative);
            if (all.size() > 1) ++out.ambiguous;
            bool found = std::find(all.begin(), all.end(), idx) != all.end();
            out.tally.check(found, "population " + std::to_string(rep) + (negative ? " bailout" : " bail-in"));
        }
    }
    return out;
}

struct DynamicsTally {
    Tally core;   // termination, purity equivalence, audit, conservation
    Tally bound;  // 0 <= 2 * sum of middle operator counts <= 8m - 2 + (n+1)n
};

// Perfection dynamics on random single-industry populations (n <= max_n)
// with the switch always holding.
inline DynamicsTally dynamics_laws(std::uint64_t seed, int scenarios, std::size_t max_n) {
    using namespace firesale;
    DynamicsTally out;
    Tally& t = out.core;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> beta(0.005, 0.05), eps(0, 0.1);
    for (int rep = 0; rep < scenarios; ++rep) {
        Scenario sc;
        sc.banks = gen::single_industry(rng, 1 + static_cast<std::size_t>(rep) % max_n);
        sc.market = gen::env(beta(rng), eps(rng));
        sc.market.rng_seed = static_cast<std::uint64_t>(rep);
        const std::string tag = "scenario " + std::to_string(rep);
        RunResult run;
        try {
            run = run_to_stability(sc);
        } catch (const Error& e) {
            t.check(false, tag + " did not finish: " + e.what());
            continue;
        }
        t.check(run.trace.stable, tag + " stable");
        auto purity = purity_check(run.final_state, sc.banks, sc.market);
        t.check(purity.all_pure && purity.equivalent, tag + " purity");
        auto bounds = iteration_bounds(sc, run);
        out.bound.check(bounds.within, tag + " operator bound: observed " + std::to_string(bounds.observed) + " upper " +
                                   std::to_string(bounds.upper));
        auto audit = no_turning_back_audit(run.trace);
        t.check(audit.pass, tag + " audit" + (audit.pass ? "" : ": " + audit.violations.front()));
        std::multiset<BankId> seen, all;
        for (const auto& sub : run.final_state.subspaces) seen.insert(sub.members.begin(), sub.members.end());
        for (const auto& b : sc.banks) all.insert(b.id);
        t.check(seen == all, tag + " conservation");
    }
    return out;
}

// Round trips of the asset, leverage and shock maps on random short chains.
// A chain counts when every link admits the maps (the pair has not crossed at
// zero shock); `chains` admissible chains are checked.
inline Tally iso_round_trips(std::uint64_t seed, int chains) {
    using namespace firesale;
    Tally t;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> beta(0.002, 0.03);
    int done = 0;
    for (int rep = 0; done < chains && rep < 100 * chains; ++rep) {
        auto banks = gen::single_industry(rng, 2 + static_cast<std::size_t>(rep) % 5);
        auto env = gen::env(beta(rng), 0.0);
        auto chain = sort_by_leverage_desc(banks);
        std::vector<std::array<double, 5>> rows;
        bool admissible = true;
        for (std::size_t w = 0; admissible && w + 1 < chain.size(); ++w) {
            auto ctx = iso_context(chain, env, w);
            try {
                double eps = map_A_to_eps(ctx, ctx.assets);
                double a = map_eps_to_A(ctx, eps);
                double th = map_eps_to_theta(ctx, eps);
                double eps2 = map_theta_to_eps(ctx, th);
                double a2 = map_eps_to_A(ctx, eps2);
                rows.push_back({std::fabs(a - ctx.assets) / ctx.assets, std::fabs(th - ctx.next_leverage),
                                std::fabs(eps2 - eps), std::fabs(a2 - ctx.assets) / ctx.assets, eps});
            } catch (const Error&) {
                admissible = false;
            }
        }
        if (!admissible || rows.empty()) continue;
        ++done;
        for (std::size_t w = 0; w < rows.size(); ++w) {
            const auto& r = rows[w];
            bool ok = r[0] < 1e-8 && r[1] < 1e-8 && r[2] < 1e-8 && r[3] < 1e-8;
            t.check(ok, "chain " + std::to_string(rep) + " link " + std::to_string(w));
        }
    }
    if (done < chains) t.check(false, "only " + std::to_string(done) + " admissible chains drawn");
    return t;
}

// Maximal bailout cluster along a shock sweep for random single-industry
// clusters whose start satisfies the cluster ignition predicate.
struct CompressionTally {
    Tally tally;
    int drawn = 0;
};

inline CompressionTally compression_laws(std::uint64_t seed, int scenarios) {
    using namespace firesale;
    CompressionTally out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> beta(0.005, 0.05);
    for (int rep = 0; out.drawn < scenarios && rep < 100 * scenarios; ++rep) {
        auto banks = gen::single_industry(rng, 2 + static_cast<std::size_t>(rep) % 5);
        auto env = gen::env(beta(rng), 0.0);
        double top = 0;
        for (const auto& b : banks) top = std::max(top, demand_root(b.leverage(), env.theta_bar));
        auto grid = make_grid(0, top, top / 200);
        auto sch = compression_sweep(banks, env, grid);
        if (!sch.ignition) continue;
        ++out.drawn;
        out.tally.check(sch.ascending && sch.one_at_a_time && !sch.exits.empty(),
                        "scenario " + std::to_string(rep) + " (" + std::to_string(banks.size()) + " banks)");
    }
    return out;
}

// Determinant signs of reducible holdings matrices against exact rational
// determinants; singular draws are skipped until `count` matrices are checked.
inline Tally determinant_signs(std::uint64_t seed, int count) {
    using namespace firesale;
    Tally t;
    std::mt19937_64 rng(seed);
    int checked = 0;
    for (int rep = 0; rep < 4 * count && checked < count; ++rep) {
        auto h = gen::reducible_matrix(rng, 1 + rep % 3, 1 + rep % 4).holdings;
        std::vector<std::vector<oracle::Rational>> q;
        for (auto& row : h) q.emplace_back(row.begin(), row.end());
        int full = oracle::sign_of(oracle::cofactor_det(q));
        if (full == 0) continue;
        ++checked;
        auto panel = build_matrices(gen::banks_from_holdings(h));
        auto red = reduce_matrix(panel);
        std::vector<std::vector<oracle::Rational>> kept;
        for (const auto& b : red.kept_banks) {
            auto r = static_cast<std::size_t>(std::find(panel.banks.begin(), panel.banks.end(), b) - panel.banks.begin());
            std::vector<oracle::Rational> row;
            for (const auto& ind : red.kept_industries) {
                auto c = static_cast<std::size_t>(
                    std::find(panel.industries.begin(), panel.industries.end(), ind) - panel.industries.begin());
                row.emplace_back(h[r][c]);
            }
            kept.push_back(std::move(row));
        }
        int reduced = oracle::sign_of(oracle::cofactor_det(kept));
        bool ok = red.applicable && !red.eliminated.empty() && red.det_sign_full == full &&
                  red.det_sign_reduced == reduced && full == red.cofactor_parity * reduced && red.sign_matches_with_parity;
        t.check(ok, "matrix " + std::to_string(rep));
    }
    if (checked < count) t.check(false, "only " + std::to_string(checked) + " nonsingular matrices drawn");
    return t;
}

}  // namespace props
