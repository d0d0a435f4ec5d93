#include "firesale/clearing.hpp"

#include "firesale/detail/roots.hpp"

#include <algorithm>
#include <cmath>

namespace firesale {

double liquidation_demand(double assets, double equity, double theta_bar, double epsilon) {
    double theta = equity / assets;
    return assets * (theta_bar - theta + (1.0 - theta_bar) * epsilon) / theta_bar;
}

double risk_mitigation_share(const Bank& bank, const MarketEnv& env) {
    return (env.theta_bar - bank.leverage() + (1.0 - env.theta_bar) * env.epsilon) / env.theta_bar;
}

double liquidation_demand(const Bank& bank, const MarketEnv& env) {
    return liquidation_demand(bank.assets, bank.equity, env.theta_bar, env.epsilon);
}

double demand_root(double leverage, double theta_bar) { return (leverage - theta_bar) / (1.0 - theta_bar); }

double sell_hurdle(double leverage, double theta_bar, double epsilon) {
    return leverage / theta_bar + (1.0 - 1.0 / theta_bar) * epsilon;
}

double ClearingSolution::total_realized() const {
    double t = 0;
    for (double v : realized) t += v;
    return t;
}

double ClearingSolution::realized_of(const BankId& id) const {
    for (std::size_t i = 0; i < banks.size(); ++i)
        if (banks[i] == id) return realized[i];
    throw Error(ErrorKind::internal, "bank " + id + " not in solution");
}

namespace {

std::vector<double> demands_of(std::span<const Bank> cluster, const MarketEnv& env) {
    std::vector<double> s;
    s.reserve(cluster.size());
    for (const auto& b : cluster) s.push_back(liquidation_demand(b, env));
    return s;
}

// max_i |x_i + sign * sum_k (1 - e^{-Q_k}) V_ik - s_i| with Q taken from x itself.
double equation_residual(const IndustryPanel& p, const std::vector<double>& s, const std::vector<double>& x,
                         double beta, double sign) {
    const auto n = p.holdings.rows(), k = p.holdings.cols();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) q += beta * x[static_cast<std::size_t>(i)] * p.disposal.row(i).transpose();
    double worst = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double r = x[static_cast<std::size_t>(i)] - s[static_cast<std::size_t>(i)];
        for (Eigen::Index c = 0; c < k; ++c) r += sign * (1.0 - std::exp(-q(c))) * p.holdings(i, c);
        worst = std::max(worst, std::fabs(r));
    }
    return worst;
}

ClearingSolution skeleton(const IndustryPanel& p, std::vector<double> s) {
    ClearingSolution sol;
    sol.banks = p.banks;
    sol.industries = p.industries;
    sol.demanded = std::move(s);
    return sol;
}

}  // namespace

bool single_exponent(const IndustryPanel& p) {
    if (p.disposal.cols() <= 1) return true;
    for (Eigen::Index i = 1; i < p.disposal.rows(); ++i)
        if ((p.disposal.row(i) - p.disposal.row(0)).cwiseAbs().maxCoeff() > 1e-12) return false;
    return true;
}

LipschitzReport liquidity_threshold(const IndustryPanel& p, std::span<const double> demanded,
                                    const MarketEnv& env) {
    LipschitzReport r;
    const auto k = p.disposal.cols();
    // Cross exposure: how much of industry l's value sits with banks that hold industry k.
    Eigen::MatrixXd cross = p.disposal.transpose() * p.holdings;  // k x k, entries sum_i pi_ik V_il
    double peak = k > 0 ? cross.maxCoeff() : 0.0;
    r.beta_bar_lipschitz = peak > 0 ? 1.0 / peak : INFINITY;
    r.lipschitz = env.beta * peak;

    double w = (k > 0 ? p.values.maxCoeff() : 0.0) * static_cast<double>(k);
    double wr = w * std::sqrt(static_cast<double>(k));
    double top = wr;
    for (double v : demanded) top = std::max(top, std::fabs(v));
    if (wr > 0) {
        auto mu = [&](double b) { return b * top + 1.0 - b * wr + std::log(b * wr); };
        r.beta_bar_self_map = detail::bisect(mu, 1e-300, 1.0 / wr);
    } else {
        r.beta_bar_self_map = INFINITY;
    }
    r.beta_bar = std::min(r.beta_bar_lipschitz, r.beta_bar_self_map);
    r.contraction = env.beta < r.beta_bar_lipschitz;
    return r;
}

LipschitzReport liquidity_threshold(std::span<const Bank> cluster, const MarketEnv& env) {
    auto p = build_matrices(cluster);
    auto s = demands_of(cluster, env);
    return liquidity_threshold(p, s, env);
}

ClearingSolution solve_aggregate(std::span<const Bank> cluster, const MarketEnv& env) {
    auto p = build_matrices(cluster);
    if (!single_exponent(p)) throw Error(ErrorKind::internal, "aggregate solver needs identical disposal rows");
    auto sol = skeleton(p, demands_of(cluster, env));
    sol.method = "aggregate";
    const double sign = modularity_sign(env.modularity);
    const double beta = env.beta;
    Eigen::VectorXd share = p.disposal.rows() > 0 ? Eigen::VectorXd(p.disposal.row(0).transpose())
                                                  : Eigen::VectorXd();
    double a_tot = 0, s_tot = 0;
    for (const auto& b : cluster) a_tot += b.assets;
    for (double v : sol.demanded) s_tot += v;

    auto loss = [&](double x) {
        double h = 0;
        for (Eigen::Index c = 0; c < share.size(); ++c) h += share(c) * (1.0 - std::exp(-beta * share(c) * x));
        return h;
    };
    auto f = [&](double x) { return x + sign * a_tot * loss(x) - s_tot; };

    double total = s_tot;
    if (beta > 0 && !cluster.empty()) {
        double lo = -1.0, hi = 1.0;
        if (sign > 0) {
            if (!detail::bracket_increasing(f, lo, hi)) throw Error(ErrorKind::solver, "aggregate root not bracketed");
            total = detail::bisect(f, lo, hi);
        } else {
            // Convex case: keep the root on the branch where f is increasing.
            auto slope = [&](double x) {
                double d = 0;
                for (Eigen::Index c = 0; c < share.size(); ++c)
                    d += share(c) * share(c) * std::exp(-beta * share(c) * x);
                return 1.0 - a_tot * beta * d;
            };
            double kl = -1.0, kh = 1.0;
            if (!detail::bracket_increasing(slope, kl, kh)) throw Error(ErrorKind::solver, "turning point not bracketed");
            double turn = detail::bisect(slope, kl, kh);
            if (f(turn) > 0)
                throw Error(ErrorKind::solver, "no clearing solution: supermodular losses outrun every demand level");
            double hi2 = std::max(turn + 1.0, s_tot + a_tot + 1.0);
            double lo2 = turn;
            if (!detail::bracket_increasing(f, lo2, hi2)) throw Error(ErrorKind::solver, "aggregate root not bracketed");
            total = detail::bisect(f, std::max(lo2, turn), hi2);
        }
    }
    double h = loss(total);
    sol.realized.resize(cluster.size());
    for (std::size_t i = 0; i < cluster.size(); ++i)
        sol.realized[i] = sol.demanded[i] - sign * cluster[i].assets * h;
    sol.exposure.resize(static_cast<std::size_t>(share.size()));
    for (Eigen::Index c = 0; c < share.size(); ++c) {
        sol.exposure[static_cast<std::size_t>(c)] = beta * share(c) * total;
        sol.expansion = sol.expansion || sol.exposure[static_cast<std::size_t>(c)] < 0;
    }
    sol.residual = equation_residual(p, sol.demanded, sol.realized, beta, sign);
    sol.iterations = 1;
    return sol;
}

ClearingSolution solve_fixed_point(std::span<const Bank> cluster, const MarketEnv& env, const SolverOptions& opts) {
    auto p = build_matrices(cluster);
    auto sol = skeleton(p, demands_of(cluster, env));
    const double sign = modularity_sign(env.modularity);
    const double beta = env.beta;
    const auto n = p.holdings.rows(), k = p.holdings.cols();
    auto report = liquidity_threshold(p, sol.demanded, env);
    sol.certified = env.beta < report.beta_bar;
    sol.method = sol.certified ? "fixed point" : "damped fixed point";

    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = sol.demanded[static_cast<std::size_t>(i)];
    Eigen::VectorXd q = Eigen::VectorXd::Zero(k);
    if (opts.initial_exposure) {
        if (static_cast<Eigen::Index>(opts.initial_exposure->size()) != k)
            throw Error(ErrorKind::validation, "initial exposure has the wrong length");
        for (Eigen::Index c = 0; c < k; ++c) q(c) = (*opts.initial_exposure)[static_cast<std::size_t>(c)];
    }
    auto realized = [&](const Eigen::VectorXd& e) -> Eigen::VectorXd {
        Eigen::VectorXd loss = (1.0 - (-e.array()).exp()).matrix();
        return s - sign * p.holdings * loss;
    };
    auto image = [&](const Eigen::VectorXd& e) -> Eigen::VectorXd {
        return beta * p.disposal.transpose() * realized(e);
    };
    auto to_std = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

    double omega = std::clamp(opts.damping, 1e-6, 1.0);
    double gap = (image(q) - q).cwiseAbs().maxCoeff();
    int it = 0;
    bool done = false;
    for (; it < opts.max_iterations; ++it) {
        auto x = to_std(realized(q));
        if (equation_residual(p, sol.demanded, x, beta, sign) < opts.residual_tol) { done = true; break; }
        Eigen::VectorXd next = (1.0 - omega) * q + omega * image(q);
        double next_gap = (image(next) - next).cwiseAbs().maxCoeff();
        if (next_gap > gap && omega > 1e-6) {
            omega *= 0.5;
            continue;
        }
        if (!std::isfinite(next_gap)) break;
        q = next;
        gap = next_gap;
    }
    if (!done)
        throw DivergedError("fixed-point iteration did not converge (beta=" + std::to_string(beta) +
                                ", threshold=" + std::to_string(report.beta_bar) + ")",
                            report);
    // q solves the exposure equation; rebuild it from x so both views agree.
    sol.realized = to_std(realized(q));
    Eigen::VectorXd qx = beta * p.disposal.transpose() * realized(q);
    sol.exposure = to_std(qx);
    for (double e : sol.exposure) sol.expansion = sol.expansion || e < 0;
    sol.residual = equation_residual(p, sol.demanded, sol.realized, beta, sign);
    sol.iterations = it;
    return sol;
}

ClearingSolution clear(std::span<const Bank> cluster, const MarketEnv& env, const SolverOptions& opts) {
    if (cluster.empty()) {
        ClearingSolution sol;
        sol.method = "empty";
        return sol;
    }
    auto p = build_matrices(cluster);
    if (single_exponent(p) && !opts.initial_exposure) return solve_aggregate(cluster, env);
    return solve_fixed_point(cluster, env, opts);
}

double cms_solve(const Bank& bank, const MarketEnv& env, double demanded) {
    const double sign = modularity_sign(env.modularity);
    const double beta = env.beta;
    if (!(beta > 0)) return demanded;
    if (demanded == 0 && sign > 0) return 0.0;  // the only root
    std::vector<std::pair<double, double>> book;  // (share, holding)
    for (const auto& [k, v] : bank.investments)
        if (v > 0) book.emplace_back(v / bank.assets, v);
    auto phi = [&](double x) {
        double r = x;
        for (auto [pi, v] : book) r += sign * (1.0 - std::exp(-beta * pi * x)) * v;
        return r - demanded;
    };
    double lo = -std::fabs(demanded) - 1.0, hi = std::fabs(demanded) + 1.0;
    if (sign < 0) {
        auto slope = [&](double x) {
            double d = 0;
            for (auto [pi, v] : book) d += beta * pi * v * std::exp(-beta * pi * x);
            return 1.0 - d;
        };
        double kl = -1.0, kh = 1.0;
        if (!detail::bracket_increasing(slope, kl, kh)) throw Error(ErrorKind::solver, "turning point not bracketed");
        double turn = detail::bisect(slope, kl, kh);
        if (phi(turn) > 0)
            throw Error(ErrorKind::solver, "bank " + bank.id + " has no stand-alone clearing solution");
        lo = turn;
        hi = std::max(turn + 1.0, demanded + bank.assets + 1.0);
    }
    if (!detail::bracket_increasing(phi, lo, hi)) throw Error(ErrorKind::solver, "stand-alone root not bracketed");
    return detail::bisect(phi, lo, hi);
}

double cms_solve(const Bank& bank, const MarketEnv& env) { return cms_solve(bank, env, liquidation_demand(bank, env)); }

ShockThresholds shock_thresholds(std::span<const Bank> cluster, const MarketEnv& env) {
    ShockThresholds t;
    t.lowest_root = INFINITY;
    t.lowest_equity_bound = INFINITY;
    auto sol = clear(cluster, env);
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        const auto& b = cluster[i];
        t.banks.push_back(b.id);
        double root = demand_root(b.leverage(), env.theta_bar);
        t.demand_roots.push_back(root);
        t.lowest_root = std::min(t.lowest_root, root);
        // x = s + d with d the price-impact term; x > A once the shock passes this bound.
        double d = sol.realized[i] - sol.demanded[i];
        double bound = (b.equity - env.theta_bar * d) / ((1.0 - env.theta_bar) * b.assets);
        t.equity_bounds.push_back(bound);
        t.lowest_equity_bound = std::min(t.lowest_equity_bound, bound);
    }
    return t;
}

}  // namespace firesale
