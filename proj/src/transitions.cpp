#include "firesale/transitions.hpp"

#include "firesale/detail/roots.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

namespace firesale {

const char* to_string(PairType t) {
    switch (t) {
        case PairType::type1: return "type-1";
        case PairType::type2: return "type-2";
        case PairType::type3: return "type-3";
        case PairType::unmatched: return "unmatched";
    }
    return "?";
}

std::vector<double> make_grid(double from, double to, double step) {
    if (!(step > 0)) throw Error(ErrorKind::validation, "grid step must be positive");
    std::vector<double> g;
    if (from > to) return g;
    auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) g.push_back(from + static_cast<double>(i) * step);
    return g;
}

namespace {

double realized_at(std::span<const Bank> cluster, MarketEnv env, std::size_t index) {
    return clear(cluster, env).realized[index];
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    auto workers = static_cast<std::size_t>(std::max(1, threads));
    workers = std::min(workers, std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// First shock in [0, 1) at which `value` changes sign, refined by bisection.
template <class F>
std::optional<double> first_sign_change(F&& value, double step) {
    double prev_eps = 0;
    bool prev_neg = value(0.0) < 0;
    for (double eps = step; eps < 1.0; eps += step) {
        bool neg = value(eps) < 0;
        if (neg == prev_neg) { prev_eps = eps; continue; }
        auto g = [&](double e) { return (value(e) < 0) == prev_neg ? -1.0 : 1.0; };
        return detail::bisect(g, prev_eps, eps, 1e-14);
    }
    return std::nullopt;
}

std::vector<BankId> sorted_ids(std::vector<BankId> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

std::optional<double> realized_root(std::span<const Bank> cluster, const MarketEnv& env, std::size_t index,
                                    double eps_step) {
    auto value = [&](double eps) {
        auto e = env;
        e.epsilon = eps;
        return realized_at(cluster, e, index);
    };
    return first_sign_change(value, eps_step);
}

std::optional<double> beta_root(std::span<const Bank> cluster, const MarketEnv& env, std::size_t index) {
    auto value = [&](double beta) {
        auto e = env;
        e.beta = beta;
        return realized_at(cluster, e, index);
    };
    bool neg0 = value(0.0) < 0;
    double prev = 0;
    for (double b = 1e-6; b < 1e9; b *= 2) {
        if ((value(b) < 0) == neg0) { prev = b; continue; }
        auto g = [&](double x) { return (value(x) < 0) == neg0 ? -1.0 : 1.0; };
        return detail::bisect(g, prev, b, 1e-14);
    }
    return std::nullopt;
}

ThresholdSet thresholds(std::span<const Bank> cluster, const MarketEnv& env, double eps_step) {
    ThresholdSet ts;
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        BankThresholds bt;
        bt.id = cluster[i].id;
        bt.demand_root = demand_root(cluster[i].leverage(), env.theta_bar);
        bt.realized_root = realized_root(cluster, env, i, eps_step);
        bt.beta_root = beta_root(cluster, env, i);
        if (bt.beta_root && liquidation_demand(cluster[i], env) < 0) {
            auto later = env;
            later.epsilon = env.epsilon + 1e-3;
            if (liquidation_demand(cluster[i], later) < 0) {
                auto b2 = beta_root(cluster, later, i);
                if (b2 && *b2 > *bt.beta_root * (1 + 1e-9) + 1e-12) ts.beta_monotone_in_eps = false;
            }
        }
        ts.banks.push_back(std::move(bt));
    }
    for (std::size_t a = 0; a < cluster.size(); ++a)
        for (std::size_t b = 0; b < cluster.size(); ++b)
            if (cluster[a].leverage() > cluster[b].leverage() && ts.banks[a].demand_root < ts.banks[b].demand_root)
                ts.hierarchy_ok = false;

    auto chain = sort_by_leverage_desc(cluster);
    if (chain.size() >= 2) {
        // Top bank selling alone at zero shock against the runner-up's hurdle.
        auto calm = env;
        calm.epsilon = 0;
        double alone = cms_solve(chain[0], calm);
        ts.ignition_alone = std::exp(-env.beta * alone) >= sell_hurdle(chain[1].leverage(), env.theta_bar, 0.0);
        // Whole bailout cluster at the current shock against the first bank left out.
        auto head = maximal_bailout(cluster, env);
        if (!head.empty() && head.size() < chain.size()) {
            std::set<BankId> in(head.begin(), head.end());
            const Bank* next = nullptr;
            for (const auto& b : chain)
                if (!in.count(b.id)) { next = &b; break; }
            double total = clear(select_banks(cluster, head), env).total_realized();
            ts.ignition_cluster = std::exp(-env.beta * total) >= sell_hurdle(next->leverage(), env.theta_bar, env.epsilon);
        }
    }
    return ts;
}

PairType detect_pair_type(const Bank& high, const Bank& low, double dominance) {
    double ti = high.leverage(), tj = low.leverage();
    double gap_t = std::fabs(ti - tj) / std::max(std::fabs(ti), std::fabs(tj));
    double gap_a = std::fabs(high.assets - low.assets) / std::max(high.assets, low.assets);
    if (gap_t < 1e-6 && gap_a < 1e-6) return PairType::type2;
    if (ti >= tj && high.assets >= dominance * low.assets) return PairType::type1;
    if (ti >= dominance * tj && low.assets >= dominance * high.assets) return PairType::type3;
    return PairType::unmatched;
}

namespace {

// Sign patterns, from calm to stressed:
//   both: both banks keep creating credit
//   cross: the high bank creates credit, the low bank sells although alone it would not
//   low_long: the low bank would sell even alone
//   high_long_alone: the high bank would sell alone but not next to the low bank
//   all_long: both sell
enum Pattern { none, both_short, cross, low_long, high_long_alone, all_long };

Pattern pattern_of(const SignSample& s) {
    if (s.x_high >= 0 && s.x_low >= 0) return all_long;
    if (s.x_high < 0 && s.cms_high >= 0 && s.x_low >= 0) return high_long_alone;
    if (s.x_high < 0 && s.cms_high < 0 && s.cms_low >= 0 && s.x_low >= 0) return low_long;
    if (s.x_high < 0 && s.cms_high < 0 && s.cms_low < 0 && s.x_low >= 0) return cross;
    if (s.x_high < 0 && s.x_low < 0 && s.cms_high <= 0 && s.cms_low <= 0) return both_short;
    return none;
}

}  // namespace

RegimeTimeline regime_classify(std::span<const Bank> pair, const MarketEnv& env, std::span<const double> eps_grid,
                               double dominance) {
    if (pair.size() != 2) throw Error(ErrorKind::validation, "regime classification needs exactly two banks");
    auto ordered = sort_by_leverage_desc(pair);
    RegimeTimeline tl;
    tl.high = ordered[0].id;
    tl.low = ordered[1].id;
    tl.type = detect_pair_type(ordered[0], ordered[1], dominance);

    std::vector<Pattern> expected;
    switch (tl.type) {
        case PairType::type1: expected = {cross, low_long, high_long_alone, all_long}; break;
        case PairType::type2: expected = {both_short, all_long}; break;
        case PairType::type3: {
            auto calm = env;
            calm.epsilon = 0;
            auto root = beta_root(std::span<const Bank>(ordered), calm, 1);
            tl.below_beta_root = root && env.beta < *root;
            if (tl.below_beta_root) expected = {both_short, cross, low_long, high_long_alone, all_long};
            else expected = {cross, low_long, high_long_alone, all_long};
            break;
        }
        case PairType::unmatched: break;
    }
    for (std::size_t q = 0; q < expected.size(); ++q) tl.expected.push_back(static_cast<int>(q) + 1);

    for (double eps : eps_grid) {
        auto e = env;
        e.epsilon = eps;
        auto sol = clear(std::span<const Bank>(ordered), e);
        SignSample s;
        s.epsilon = eps;
        s.x_high = sol.realized[0];
        s.x_low = sol.realized[1];
        s.cms_high = cms_solve(ordered[0], e);
        s.cms_low = cms_solve(ordered[1], e);
        auto p = pattern_of(s);
        auto it = std::find(expected.begin(), expected.end(), p);
        s.label = it == expected.end() ? 0 : static_cast<int>(it - expected.begin()) + 1;
        tl.samples.push_back(s);
    }
    std::vector<int> seq;
    int last = 0;
    for (const auto& s : tl.samples) {
        if (!tl.mismatch_at && (s.label == 0 || s.label < last)) tl.mismatch_at = s.epsilon;
        if (tl.intervals.empty() || tl.intervals.back().label != s.label) {
            tl.intervals.push_back({s.epsilon, s.epsilon, s.label});
            seq.push_back(s.label);
        } else {
            tl.intervals.back().to = s.epsilon;
        }
        last = std::max(last, s.label);
    }
    tl.matches = !tl.expected.empty() && !tl.mismatch_at && seq == tl.expected;
    return tl;
}

ExitSchedule compression_sweep(std::span<const Bank> cluster, const MarketEnv& env, std::span<const double> eps_grid,
                               int threads) {
    ExitSchedule sch;
    if (eps_grid.empty()) return sch;
    auto at = [&](double eps) {
        auto e = env;
        e.epsilon = eps;
        return sorted_ids(maximal_bailout(cluster, e));
    };
    sch.clusters.resize(eps_grid.size());
    parallel_for(eps_grid.size(), threads, [&](std::size_t i) { sch.clusters[i] = at(eps_grid[i]); });
    {
        auto e = env;
        e.epsilon = eps_grid.front();
        sch.ignition = thresholds(cluster, e, 1.0).ignition_cluster;
    }

    auto leverage_of = [&](const BankId& id) { return find_bank(cluster, id).leverage(); };
    double last_lev = -INFINITY;
    for (std::size_t g = 1; g < eps_grid.size(); ++g) {
        auto current = sch.clusters[g - 1];
        double left = eps_grid[g - 1];
        int guard = 0;
        while (current != sch.clusters[g] && guard++ < 64) {
            // Keep `right` on the changed side so the new cluster is read off a real point.
            double lo = left, right = eps_grid[g];
            while (right - lo > 1e-13) {
                double mid = 0.5 * (lo + right);
                if (at(mid) == current) lo = mid; else right = mid;
            }
            double cut = right;
            auto next = at(right);
            std::vector<BankId> gone, added;
            std::set_difference(current.begin(), current.end(), next.begin(), next.end(), std::back_inserter(gone));
            std::set_difference(next.begin(), next.end(), current.begin(), current.end(), std::back_inserter(added));
            if (gone.size() != 1 || !added.empty()) sch.one_at_a_time = false;
            double min_lev = INFINITY;
            BankId weakest;
            for (const auto& id : current)
                if (leverage_of(id) < min_lev) { min_lev = leverage_of(id); weakest = id; }
            for (const auto& id : gone) {
                if (id != weakest) sch.one_at_a_time = false;
                double lev = leverage_of(id);
                if (lev < last_lev) sch.ascending = false;
                last_lev = lev;
                sch.exits.push_back({cut, id, lev});
            }
            current = next;
            left = right;
        }
        if (current != sch.clusters[g]) sch.one_at_a_time = false;
    }
    return sch;
}

IsoContext iso_context(std::span<const Bank> chain_banks, const MarketEnv& env, std::size_t w) {
    auto chain = sort_by_leverage_desc(chain_banks);
    if (w + 1 >= chain.size()) throw Error(ErrorKind::validation, "chain position has no successor");
    return {chain[w].assets, chain[w].leverage(), chain[w + 1].leverage(), env.beta, env.theta_bar};
}

namespace {

// Stand-alone liquidation of a single-industry bank with the context's leverage.
double alone(const IsoContext& c, double assets, double eps) {
    Bank b;
    b.id = "w";
    b.assets = assets;
    b.equity = c.leverage * assets;
    b.investments["k"] = assets;
    MarketEnv env;
    env.beta = c.beta;
    env.theta_bar = c.theta_bar;
    env.epsilon = eps;
    return cms_solve(b, env);
}

double gap(const IsoContext& c, double assets, double eps, double next_leverage) {
    return std::exp(-c.beta * alone(c, assets, eps)) - sell_hurdle(next_leverage, c.theta_bar, eps);
}

}  // namespace

double map_eps_to_A(const IsoContext& c, double eps) {
    double h_next = sell_hurdle(c.next_leverage, c.theta_bar, eps);
    double h_w = sell_hurdle(c.leverage, c.theta_bar, eps);
    if (!(h_next > 1.0 && h_next < h_w))
        throw Error(ErrorKind::validation, "shock outside the admissible range for the asset map");
    auto f = [&](double log_a) { return gap(c, std::exp(log_a), eps, c.next_leverage); };
    double lo = std::log(c.assets) - 1.0, hi = std::log(c.assets) + 1.0;
    if (!detail::bracket_increasing(f, lo, hi, 700.0)) throw Error(ErrorKind::solver, "asset map not bracketed");
    return std::exp(detail::bisect(f, lo, hi, 1e-16));
}

double map_theta_to_eps(const IsoContext& c, double next_leverage) {
    double top = demand_root(c.leverage, c.theta_bar);
    auto f = [&](double eps) { return gap(c, c.assets, eps, next_leverage); };
    if (f(0.0) > 0) throw Error(ErrorKind::validation, "leverage pair already past the crossing at zero shock");
    if (f(top) < 0) throw Error(ErrorKind::solver, "shock map not bracketed");
    return detail::bisect(f, 0.0, top, 1e-16);
}

double map_A_to_eps(const IsoContext& c, double assets) {
    auto cc = c;
    cc.assets = assets;
    return map_theta_to_eps(cc, c.next_leverage);
}

double map_eps_to_theta(const IsoContext& c, double eps) {
    return c.theta_bar * (std::exp(-c.beta * alone(c, c.assets, eps)) - (1.0 - 1.0 / c.theta_bar) * eps);
}

namespace {

Bank rescaled(const Bank& b, double factor) {
    Bank out = b;
    out.assets *= factor;
    out.equity *= factor;
    for (auto& kv : out.investments) kv.second *= factor;
    return out;
}

double price_level(std::span<const Bank> banks, const MarketEnv& env) {
    if (banks.empty()) return 1.0;
    return std::exp(-env.beta * clear(banks, env).total_realized());
}

}  // namespace

std::vector<Bank> layer_count_control(std::span<const Bank> chain_banks, const MarketEnv& env, std::size_t m,
                                      std::size_t k) {
    auto chain = sort_by_leverage_desc(chain_banks);
    if (m > chain.size()) throw Error(ErrorKind::validation, "chain shorter than the requested length");
    if (k > m) throw Error(ErrorKind::validation, "layer count exceeds chain length");
    chain.resize(m);
    for (std::size_t i = 0; i + 1 < m; ++i)
        if (chain[i].leverage() == chain[i + 1].leverage())
            throw Error(ErrorKind::validation, "infeasible: banks " + chain[i].id + " and " + chain[i + 1].id +
                                                   " share a leverage ratio");
    for (const auto& b : chain)
        if (liquidation_demand(b, env) >= 0)
            throw Error(ErrorKind::validation, "infeasible: bank " + b.id + " has non-negative demand at this shock");
    if (!single_exponent(build_matrices(chain)))
        throw Error(ErrorKind::validation, "infeasible: layer control needs identical disposal rows");

    auto hurdle = [&](std::size_t j) { return sell_hurdle(chain[j].leverage(), env.theta_bar, env.epsilon); };
    auto verify = [&](const std::vector<Bank>& banks) { return maximal_bailout(banks, env).size() == k; };

    if (k == 0) {
        // Nobody can stay short: bring every bank's leverage to the point where demand is exactly zero.
        double target = env.theta_bar + (1.0 - env.theta_bar) * env.epsilon;
        for (auto& b : chain) {
            b.equity = target * b.assets;
            while (liquidation_demand(b, env) < 0) b.equity = std::nextafter(b.equity, 0.0);
        }
        if (!verify(chain)) throw Error(ErrorKind::solver, "layer control failed to empty the bailout cluster");
        return chain;
    }

    // Shrink the top k-1 banks until each of the first k joins its prefix as a short seller.
    auto prefix_ok = [&](const std::vector<Bank>& banks) {
        for (std::size_t j = 1; j < k; ++j) {
            std::span<const Bank> head(banks.data(), j);
            if (!(price_level(head, env) < hurdle(j))) return false;
        }
        return true;
    };
    int halvings = 0;
    while (!prefix_ok(chain)) {
        if (++halvings > 200) throw Error(ErrorKind::solver, "infeasible: prefix hurdles cannot be met by shrinking assets");
        for (std::size_t j = 0; j + 1 < k; ++j) chain[j] = rescaled(chain[j], 0.5);
    }
    if (k == m) {
        if (!verify(chain)) throw Error(ErrorKind::solver, "layer control verification failed");
        return chain;
    }

    // Grow bank k-1 until the price after the first k banks clears bank k's hurdle.
    const Bank base = chain[k - 1];
    auto with_scale = [&](double log_scale) {
        auto trial = chain;
        trial[k - 1] = rescaled(base, std::exp(log_scale));
        return trial;
    };
    auto f = [&](double log_scale) {
        auto trial = with_scale(log_scale);
        return price_level(std::span<const Bank>(trial.data(), k), env) - hurdle(k);
    };
    double lo = -1.0, hi = 1.0;
    if (!detail::bracket_increasing(f, lo, hi, 700.0))
        throw Error(ErrorKind::solver, "infeasible: bank " + base.id + " cannot lift the price past " + chain[k].id +
                                           "'s hurdle");
    double root = detail::bisect(f, lo, hi, 1e-15);
    // Small tail banks can stay short together and outnumber the head; larger
    // tail books spread their leverage gaps until no such group survives.
    for (int grow = 0; grow < 40; ++grow) {
        for (double delta = 0.05; delta > 1e-8; delta *= 0.5) {
            auto trial = with_scale(root + std::log1p(delta));
            if (verify(trial)) return trial;
        }
        for (std::size_t j = k; j < m; ++j) chain[j] = rescaled(chain[j], 2.0);
    }
    throw Error(ErrorKind::solver, "layer control verification failed for k=" + std::to_string(k));
}

}  // namespace firesale
