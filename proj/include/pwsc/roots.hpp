#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "pwsc/error.hpp"

namespace pwsc {

/// Bracketed scalar root. `fa` and `fb` must have opposite signs (or one of
/// them be zero). Iterates until the bracket is narrower than `x_tol` or the
/// residual falls below `f_tol`.
template <class Fn>
double solve_bracketed(Fn&& f, double a, double b, double fa, double fb, double x_tol, double f_tol = 0.0) {
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0.0) == (fb > 0.0)) throw NotFoundError("root bracket has no sign change");
    if (a > b) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    double best = std::abs(fa) < std::abs(fb) ? a : b;
    double best_f = std::min(std::abs(fa), std::abs(fb));
    struct Converged {};
    auto tracked = [&](double x) {
        const double v = f(x);
        if (std::abs(v) < best_f) {
            best_f = std::abs(v);
            best = x;
        }
        if (std::abs(v) <= f_tol) throw Converged{};
        return v;
    };
    auto tol = [x_tol](double lo, double hi) { return std::abs(hi - lo) <= x_tol; };
    std::uintmax_t max_iter = 300;
    try {
        const auto [lo, hi] = boost::math::tools::toms748_solve(tracked, a, b, fa, fb, tol, max_iter);
        const double mid = 0.5 * (lo + hi);
        // The midpoint is not evaluated by the solver; prefer whichever point
        // has the smallest known residual when f_tol is in force.
        if (f_tol > 0.0 && std::abs(hi - lo) > x_tol) return best;
        return mid;
    } catch (const Converged&) {
        return best;
    }
}

template <class Fn>
double solve_bracketed(Fn&& f, double a, double b, double x_tol, double f_tol = 0.0) {
    return solve_bracketed(f, a, b, f(a), f(b), x_tol, f_tol);
}

}  // namespace pwsc
