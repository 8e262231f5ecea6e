#pragma once

// One-dimensional search helpers shared by the bound optimizers.

#include <algorithm>
#include <cmath>
#include <utility>

namespace codedlat::search {

// Golden-section minimum of fn over [lo, hi]; fn may return +inf outside its
// usable region. Returns {argmin, fn(argmin)}. Intended for unimodal
// objectives; on multimodal input it still returns a local minimum.
template <class Fn>
std::pair<double, double> golden_min(Fn&& fn, double lo, double hi, int iters = 200) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    for (int i = 0; i < iters && b - a > 1e-12 * std::max(1.0, std::abs(b)); ++i) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = fn(x2);
        }
    }
    const double mid = 0.5 * (a + b);
    return {mid, fn(mid)};
}

// Bisection for the largest x in [lo, hi] with pred(x) true, assuming pred
// holds on a prefix interval [lo, x*) and fails beyond it. Both endpoints are
// trusted as given: pred(lo) is assumed true and pred(hi) false.
template <class Pred>
double bisect_last_true(Pred&& pred, double lo, double hi, int iters = 2000) {
    for (int i = 0; i < iters && hi - lo > 1e-12 * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

} // namespace codedlat::search
