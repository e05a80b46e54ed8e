#pragma once

#include <cmath>
#include <string>
#include <tuple>
#include <utility>

#include "dampwave/error.hpp"

namespace dampwave::roots {

struct RootResult {
    double root;
    int iterations;
};

/// Bisection for an increasing function on [lo, hi] with f(lo) <= target <= f(hi).
/// Stops when the bracket is narrower than abs_tol + rel_tol * |mid|.
template <typename F>
RootResult bisect_increasing(F&& f, double target, double lo, double hi, double abs_tol,
                             double rel_tol = 0.0, int max_iter = 200)
{
    if (!(lo <= hi))
        throw InvalidArgument("bisect_increasing: empty bracket");
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= abs_tol + rel_tol * std::abs(mid) || mid == lo || mid == hi)
            return {mid, it};
        if (f(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double mid = 0.5 * (lo + hi);
    throw ConvergenceError("bisect_increasing: bracket did not shrink below tolerance", mid,
                           hi - lo);
}

/// Newton's method safeguarded by bisection for an increasing function with a sign
/// change on [lo, hi]. `fdf(x)` returns {f(x), f'(x)}. A Newton step that leaves the
/// bracket or fails to halve the previous step is replaced by a bisection step.
/// Converged when the step or the bracket is below `tol` relative to |x|.
template <typename FdF>
RootResult safeguarded_newton(FdF&& fdf, double lo, double hi, double x0, double tol,
                              int max_iter)
{
    auto [flo, dflo] = fdf(lo);
    if (flo == 0.0)
        return {lo, 0};
    auto [fhi, dfhi] = fdf(hi);
    if (fhi == 0.0)
        return {hi, 0};
    if (flo > 0.0 || fhi < 0.0)
        throw InvalidArgument("safeguarded_newton: bracket does not contain a root");

    double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
    double dx_old = hi - lo;
    double dx = dx_old;
    auto [fx, dfx] = fdf(x);
    for (int it = 1; it <= max_iter; ++it) {
        if (fx == 0.0)
            return {x, it};
        if (fx < 0.0)
            lo = x;
        else
            hi = x;

        const bool newton_out = !std::isfinite(fx) || !(dfx > 0.0) || !std::isfinite(dfx) ||
                                ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0.0;
        const bool too_slow = std::abs(2.0 * fx) > std::abs(dx_old * dfx);
        dx_old = dx;
        if (newton_out || too_slow) {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        } else {
            dx = fx / dfx;
            x -= dx;
        }
        const double scale = std::abs(x) + 1e-300;
        if (std::abs(dx) <= tol * scale || hi - lo <= tol * scale)
            return {x, it};
        std::tie(fx, dfx) = fdf(x);
    }
    throw ConvergenceError("safeguarded_newton: no convergence", x, fx);
}

} // namespace dampwave::roots
