#pragma once

#include <cmath>
#include <concepts>
#include <utility>

namespace tde_plankton::roots {

struct BracketOptions {
    double rel_width = 1e-14;  // stop when bracket width <= rel_width * initial width
    int max_bisections = 400;
    int max_newton = 5;
};

/// Bisection on a sign-changing bracket followed by a few Newton polish
/// steps. `fn` and `dfn` map double -> double. Newton iterates that leave
/// the final bracket are rejected, so the result never escapes [lo, hi].
template <std::invocable<double> F, std::invocable<double> DF>
[[nodiscard]] double bisect_then_newton(F&& fn, DF&& dfn, double lo, double hi,
                                        const BracketOptions& opts = {}) {
    double flo = fn(lo);
    if (flo == 0.0) return lo;
    const double width0 = hi - lo;
    for (int i = 0; i < opts.max_bisections && (hi - lo) > opts.rel_width * width0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fmid = fn(mid);
        if (fmid == 0.0) return mid;
        if ((fmid < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    double x = 0.5 * (lo + hi);
    const double slack = hi - lo;
    for (int i = 0; i < opts.max_newton; ++i) {
        const double fx = fn(x);
        const double d = dfn(x);
        if (fx == 0.0 || d == 0.0 || !std::isfinite(d)) break;
        const double next = x - fx / d;
        if (!(next >= lo - slack && next <= hi + slack)) break;
        if (next == x) break;
        x = next;
    }
    return x;
}

/// Plain bisection, used by oracles and where no derivative is available.
template <std::invocable<double> F>
[[nodiscard]] double bisect(F&& fn, double lo, double hi, double abs_tol, int max_iter = 500) {
    double flo = fn(lo);
    for (int i = 0; i < max_iter && (hi - lo) > abs_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fmid = fn(mid);
        if (fmid == 0.0) return mid;
        if ((fmid < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace tde_plankton::roots
