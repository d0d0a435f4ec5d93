#pragma once

#include <cmath>

namespace firesale::detail {

// f increasing with f(lo) <= 0 <= f(hi). Stops at double resolution.
template <class F>
double bisect(F&& f, double lo, double hi, double rel_tol = 1e-15, int max_iter = 400) {
    for (int k = 0; k < max_iter; ++k) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (hi - lo <= rel_tol * std::fmax(1.0, std::fabs(mid))) break;
        if (f(mid) < 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Grow [lo, hi] outward until f(lo) <= 0 <= f(hi) for increasing f.
// Returns false if the bracket blows past `limit`.
template <class F>
bool bracket_increasing(F&& f, double& lo, double& hi, double limit = 1e300) {
    while (f(lo) > 0.0) {
        double w = hi - lo;
        hi = lo;
        lo -= 2.0 * w;
        if (std::fabs(lo) > limit) return false;
    }
    while (f(hi) < 0.0) {
        double w = hi - lo;
        lo = hi;
        hi += 2.0 * w;
        if (std::fabs(hi) > limit) return false;
    }
    return true;
}

}  // namespace firesale::detail
