#include "firesale/counterfactual.hpp"

#include <algorithm>
#include <cmath>

namespace firesale {

const char* to_string(Incentive v) {
    switch (v) {
        case Incentive::favors_cluster: return "favors-cluster";
        case Incentive::favors_reference: return "favors-reference";
        case Incentive::neutral: return "neutral";
    }
    return "?";
}

const char* to_string(EntrantSign v) {
    switch (v) {
        case EntrantSign::positive: return "positive";
        case EntrantSign::negative: return "negative";
        case EntrantSign::mixed: return "mixed";
        case EntrantSign::none: return "none";
    }
    return "?";
}

namespace {

double neutral_band(const Bank& b) { return 1e-9 * std::max(1.0, std::fabs(b.assets)); }

Incentive classify(double delta, double band) {
    if (std::fabs(delta) < band) return Incentive::neutral;
    return delta < 0 ? Incentive::favors_cluster : Incentive::favors_reference;
}

}  // namespace

CoeDelta coe_delta_vs_cms(std::span<const Bank> cluster, const MarketEnv& env) {
    CoeDelta d;
    auto sol = clear(cluster, env);
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        double ref = cms_solve(cluster[i], env);
        d.banks.push_back(cluster[i].id);
        d.cluster_x.push_back(sol.realized[i]);
        d.reference_x.push_back(ref);
        d.delta.push_back(sol.realized[i] - ref);
        d.incentive.push_back(classify(d.delta.back(), neutral_band(cluster[i])));
    }
    return d;
}

CoeDelta coe_delta(std::span<const Bank> cluster, std::span<const Bank> reference, const MarketEnv& env) {
    CoeDelta d;
    auto big = clear(cluster, env);
    auto small = clear(reference, env);
    for (std::size_t r = 0; r < reference.size(); ++r) {
        const auto& b = reference[r];
        double x = big.realized_of(b.id);
        d.banks.push_back(b.id);
        d.cluster_x.push_back(x);
        d.reference_x.push_back(small.realized[r]);
        d.delta.push_back(x - small.realized[r]);
        d.incentive.push_back(classify(d.delta.back(), neutral_band(b)));
    }
    return d;
}

PartitionIncentives classify_partition(std::span<const Bank> cluster, const MarketEnv& env) {
    PartitionIncentives r;
    auto sol = clear(cluster, env);
    std::vector<Bank> pos, neg;
    for (std::size_t i = 0; i < cluster.size(); ++i) {
        if (sol.realized[i] >= 0) { pos.push_back(cluster[i]); r.positive.push_back(cluster[i].id); }
        else { neg.push_back(cluster[i]); r.negative.push_back(cluster[i].id); }
    }
    if (!pos.empty() && !neg.empty()) {
        r.positive_alone = coe_delta(cluster, pos, env);
        for (double v : r.positive_alone.delta) r.positive_crowded_out = r.positive_crowded_out && v > 0;
        r.negative_alone = coe_delta(cluster, neg, env);
        for (double v : r.negative_alone.delta) r.negative_gains_credit = r.negative_gains_credit && v < 0;
        return r;
    }
    // One-sided cluster: compare with each bank facing the market alone instead.
    // An all-positive cluster sells less than its members would alone, an
    // all-negative one creates less credit.
    auto alone = coe_delta_vs_cms(cluster, env);
    if (cluster.size() < 2) {
        // Same system either way; the delta is zero and carries no sign.
        (neg.empty() ? r.positive_alone : r.negative_alone) = alone;
        return r;
    }
    if (neg.empty()) {
        r.positive_alone = alone;
        for (double v : alone.delta) r.positive_crowded_out = r.positive_crowded_out && v < 0;
    } else {
        r.negative_alone = alone;
        for (double v : alone.delta) r.negative_gains_credit = r.negative_gains_credit && v > 0;
    }
    return r;
}

EntrantProbe entrant_effect(std::span<const Bank> incumbents, std::span<const Bank> entrants, const MarketEnv& env) {
    EntrantProbe p;
    p.incumbents = ids_of(incumbents);
    p.entrants = ids_of(entrants);
    auto base = clear(incumbents, env);
    p.before = base.realized;
    if (entrants.empty()) {
        p.after = p.before;
        p.effect.assign(incumbents.size(), 0.0);
        return p;
    }
    std::vector<Bank> all(incumbents.begin(), incumbents.end());
    all.insert(all.end(), entrants.begin(), entrants.end());
    auto joint = clear(all, env);
    double entrant_total = 0;
    bool any_pos = false, any_neg = false;
    for (std::size_t e = 0; e < entrants.size(); ++e) {
        double x = joint.realized[incumbents.size() + e];
        p.entrant_x.push_back(x);
        entrant_total += x;
        any_pos = any_pos || x >= 0;
        any_neg = any_neg || x < 0;
    }
    p.sign = any_pos && any_neg ? EntrantSign::mixed : (any_pos ? EntrantSign::positive : EntrantSign::negative);
    double scale = 0;
    for (const auto& b : all) scale = std::max(scale, b.assets);
    const double tol = 1e-9 * std::max(1.0, scale);
    // Under submodularity an entrant that sells soaks up price impact the
    // incumbents would otherwise bear; supermodularity flips that.
    int dir = 0;
    if (entrant_total > tol) dir = -1;
    else if (entrant_total < -tol) dir = 1;
    if (env.modularity == Modularity::supermodular) dir = -dir;
    p.expected_direction = dir;
    for (std::size_t i = 0; i < incumbents.size(); ++i) {
        double after = joint.realized[i];
        p.after.push_back(after);
        double eff = after - p.before[i];
        p.effect.push_back(eff);
        // Deep in the saturated price range the move can drop below double
        // resolution; a zero there is rounding, not a reversal.
        const double ulp_band = 1e-12 * std::max(1.0, std::fabs(p.before[i]));
        if (dir == 0) p.holds = p.holds && std::fabs(eff) <= tol;
        else p.holds = p.holds && (dir * eff > 0 || std::fabs(eff) <= ulp_band);
    }
    return p;
}

AggregateProbe aggregate_monotonicity_check(std::span<const Bank> incumbents, std::span<const Bank> entrants,
                                            const MarketEnv& env) {
    AggregateProbe r;
    auto probe = entrant_effect(incumbents, entrants, env);
    for (double v : probe.before) r.total_before += v;
    for (double v : probe.after) r.total_after += v;
    for (double v : probe.entrant_x) r.total_after += v;
    double scale = 0;
    for (const auto& b : incumbents) scale = std::max(scale, b.assets);
    for (const auto& b : entrants) scale = std::max(scale, b.assets);
    const double tol = 1e-9 * std::max(1.0, scale);
    r.total_rose = r.total_after > r.total_before;
    if (std::fabs(r.total_after - r.total_before) <= tol) return r;
    // A higher total pushes incumbents down when losses offset sales, up otherwise.
    const double rise = env.modularity == Modularity::submodular ? -1.0 : 1.0;
    for (std::size_t i = 0; i < incumbents.size(); ++i) {
        double s = liquidation_demand(incumbents[i], env);
        double eff = probe.effect[i];
        const double ulp_band = 1e-12 * std::max(1.0, std::fabs(probe.before[i]));
        bool moved_wrong = r.total_rose ? !(rise * eff > 0) : !(-rise * eff > 0);
        bool bad = ((r.total_rose && s < 0) || (!r.total_rose && s > 0)) && moved_wrong && std::fabs(eff) > ulp_band;
        if (bad) { r.holds = false; r.violators.push_back(incumbents[i].id); }
    }
    return r;
}

}  // namespace firesale
