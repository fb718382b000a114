#pragma once

// Free-boundary equation for the scaled exercise level y = b/a:
//   g(y) = (l1-1) y^{l1+1} - (q/a) l1 y^{l1} + (1-l2) y^{l2+1} + (q/a) l2 y^{l2},
// optionally minus the margin term k (l1-l2) y^{l1+l2}. The economically
// meaningful root lies strictly above q/a; y^{-l2} g(y) is convex there, so the
// root is simple and unique and plain bisection is safe.

#include <cmath>
#include <span>
#include <vector>

#include "stockloan/model.hpp"

namespace stockloan {

struct BoundarySolution {
    double y_star = 0.0;   // scaled boundary, > q/a
    double b = 0.0;        // exercise level, = a * y_star
    int iterations = 0;
    double residual = 0.0; // |g(y_star)|
};

inline double eval_g_basic(double y, const CharacteristicRoots& roots, double q_over_a) {
    if (!(y > 0.0))
        throw DomainError("eval_g_basic: y must be > 0");
    const double l1 = roots.lambda1;
    const double l2 = roots.lambda2;
    return (l1 - 1.0) * detail::pow_pos(y, l1 + 1.0) -
           q_over_a * l1 * detail::pow_pos(y, l1) +
           (1.0 - l2) * detail::pow_pos(y, l2 + 1.0) +
           q_over_a * l2 * detail::pow_pos(y, l2);
}

inline double eval_g_capped(double y, const CharacteristicRoots& roots, double q_over_a,
                            double k) {
    if (k < 0.0)
        throw DomainError("eval_g_capped: k must be >= 0");
    if (k > margin_bound(roots, q_over_a))
        throw MarginTooLarge("eval_g_capped: k=" + detail::fmt(k) + " exceeds h(q/a)=" +
                             detail::fmt(margin_bound(roots, q_over_a)));
    if (k == 0.0)
        return eval_g_basic(y, roots, q_over_a);
    return eval_g_basic(y, roots, q_over_a) -
           k * (roots.lambda1 - roots.lambda2) *
               detail::pow_pos(y, roots.lambda1 + roots.lambda2);
}

// Bisection on a doubling bracket. Deterministic: same inputs give the same
// bit pattern for y_star.
inline BoundarySolution solve_boundary(const CharacteristicRoots& roots,
                                       const LoanTerms& terms) {
    terms.validate();
    const double q_over_a = terms.q / terms.a;
    const double k = terms.margin;
    if (k > margin_bound(roots, q_over_a))
        throw MarginTooLarge("solve_boundary: k=" + detail::fmt(k) + " exceeds h(q/a)=" +
                             detail::fmt(margin_bound(roots, q_over_a)));

    const double l1 = roots.lambda1;
    const double l2 = roots.lambda2;
    auto g = [&](double y) {
        double v = eval_g_basic(y, roots, q_over_a);
        if (k > 0.0)
            v -= k * (l1 - l2) * detail::pow_pos(y, l1 + l2);
        return v;
    };
    // Sum of absolute term magnitudes: the rounding-noise scale of g(y).
    auto g_scale = [&](double y) {
        double s = std::fabs(l1 - 1.0) * detail::pow_pos(y, l1 + 1.0) +
                   q_over_a * l1 * detail::pow_pos(y, l1) +
                   std::fabs(1.0 - l2) * detail::pow_pos(y, l2 + 1.0) +
                   q_over_a * std::fabs(l2) * detail::pow_pos(y, l2);
        if (k > 0.0)
            s += k * (l1 - l2) * detail::pow_pos(y, l1 + l2);
        return s;
    };

    // q/a = 1 makes y = 1 a spurious algebraic root; search strictly above it.
    // The sign test allows for rounding noise so a flat start (a = q, k = 0,
    // where g >= 0 on the whole half-line) is reported rather than chased.
    double lo = std::max(q_over_a * (1.0 + 1e-12), 1.0 + 1e-9);
    double g_lo = g(lo);
    const double noise_lo =
        16.0 * std::numeric_limits<double>::epsilon() * g_scale(lo);
    if (!(g_lo < -noise_lo))
        throw BracketFailure("solve_boundary: g(" + detail::fmt(lo) +
                             ") = " + detail::fmt(g_lo) + " is not negative; no root above q/a");

    const double y_cap = std::ldexp(q_over_a, 60); // 2^60 * q/a
    double hi = 2.0 * lo;
    double g_hi = g(hi);
    while (!(g_hi > 0.0)) {
        hi *= 2.0;
        if (hi > y_cap)
            throw BracketFailure("solve_boundary: no sign change below 2^60 * q/a");
        g_hi = g(hi);
    }
    const double scale = std::isfinite(g_hi) ? std::fabs(g_hi) : 1e300;
    const double tol = 1e-12 * scale;

    int iter = 0;
    double mid = lo, g_mid = g_lo;
    for (; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break; // interval is one ulp wide
        g_mid = g(mid);
        if (std::fabs(g_mid) < tol)
            break;
        if (g_mid < 0.0)
            lo = mid;
        else
            hi = mid;
    }

    BoundarySolution sol;
    sol.y_star = mid;
    sol.b = terms.a * mid;
    sol.iterations = iter;
    sol.residual = std::fabs(g_mid);
    return sol;
}

// Boundary of the barrier-free contract, b(0) = q l1 / (l1 - 1).
inline double limit_boundary(const CharacteristicRoots& roots, double q) {
    return q * roots.lambda1 / (roots.lambda1 - 1.0);
}

struct ConvexityReport {
    std::size_t n_points = 0;
    double min_second_diff = 0.0;     // most negative central second difference
    double gtilde_left = 0.0;         // gtilde at the left grid point
    std::vector<double> violations;   // grid points where the check failed
    bool convex_ok = false;
    bool left_negative = false;       // gtilde(q/a) < 0, the sign the root argument needs
};

// Samples gtilde(y) = y^{-l2} g(y) on the grid and checks its discrete
// convexity (second central differences >= -eps).
inline ConvexityReport gtilde_convexity_report(const CharacteristicRoots& roots,
                                               double q_over_a,
                                               std::span<const double> grid,
                                               double eps = 1e-8) {
    ConvexityReport rep;
    rep.n_points = grid.size();
    if (grid.empty())
        return rep;

    auto gtilde = [&](double y) {
        return detail::pow_pos(y, -roots.lambda2) * eval_g_basic(y, roots, q_over_a);
    };

    rep.gtilde_left = gtilde(grid.front());
    rep.left_negative = rep.gtilde_left < 0.0;
    rep.min_second_diff = std::numeric_limits<double>::infinity();
    if (grid.size() < 3) {
        rep.convex_ok = true;
        rep.min_second_diff = 0.0;
        return rep;
    }
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        vals[i] = gtilde(grid[i]);
    // Second differences on a possibly non-uniform grid, normalized so the
    // threshold eps is comparable to the function scale.
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const double hl = grid[i] - grid[i - 1];
        const double hr = grid[i + 1] - grid[i];
        const double d2 = 2.0 * (hl * vals[i + 1] - (hl + hr) * vals[i] + hr * vals[i - 1]) /
                          (hl * hr * (hl + hr));
        rep.min_second_diff = std::min(rep.min_second_diff, d2);
        if (d2 < -eps)
            rep.violations.push_back(grid[i]);
    }
    rep.convex_ok = rep.violations.empty();
    return rep;
}

} // namespace stockloan
