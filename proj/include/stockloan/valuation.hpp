#pragma once

// Closed-form value functions for the discounted contract, the two-sided exit
// Laplace transform they are built from, and the numerical checks (ODE
// residual, exit-time density series) used to verify them.
//
// All exponents are expressed through the characteristic roots:
//   mu/sigma = -(l1+l2)/2,   sqrt(mu^2-2*lambda)/sigma = (l1-l2)/2,
// which keeps the piecewise branches consistent to rounding at a, b and L.

#include <cmath>
#include <cstddef>
#include <optional>

#include "stockloan/boundary.hpp"
#include "stockloan/model.hpp"

namespace stockloan {

enum class ValueKind { Basic, CapAboveB, CapBelowB };
enum class TailMode { Printed, ExercisePayoff };

inline const char* to_string(ValueKind k) {
    switch (k) {
    case ValueKind::Basic: return "Basic";
    case ValueKind::CapAboveB: return "CapAboveB";
    default: return "CapBelowB";
    }
}

// Normalizer C(a, beta) = (beta/a)^s - (a/beta)^s with s = (l1-l2)/2.
inline double exit_normalizer(double a, double beta, const CharacteristicRoots& roots) {
    const double s = 0.5 * (roots.lambda1 - roots.lambda2);
    return detail::pow_pos(beta / a, s) - detail::pow_pos(a / beta, s);
}

// E[e^{lambda tau_b} 1{tau_b < tau_a}] for the discounted price started at
// x in (a, b); tends to 1 as x -> b and to 0 as x -> a.
inline double hitting_expectation(double x, double a, double b,
                                  const CharacteristicRoots& roots) {
    if (!(a < x && x < b))
        throw DomainError("hitting_expectation: x must lie in (a, b)");
    const double m = -0.5 * (roots.lambda1 + roots.lambda2); // mu/sigma
    const double s = 0.5 * (roots.lambda1 - roots.lambda2);  // sqrt(disc)/sigma
    const double num = detail::pow_pos(b, m) * detail::pow_pos(a, -s) *
                           detail::pow_pos(x, roots.lambda1) -
                       detail::pow_pos(b, m) * detail::pow_pos(a, s) *
                           detail::pow_pos(x, roots.lambda2);
    return num / exit_normalizer(a, b, roots);
}

namespace detail {

struct InteriorCoeffs {
    double c1 = 0.0;   // weight of x^{lambda1}
    double c2 = 0.0;   // weight of x^{lambda2}
    double c_ab = 0.0; // normalizer C(a, beta)
};

// Interior solution weights matching value ka at x=a and beta-q at x=beta.
inline InteriorCoeffs interior_coeffs(double a, double beta, double q, double k,
                                      const CharacteristicRoots& roots) {
    InteriorCoeffs co;
    co.c_ab = exit_normalizer(a, beta, roots);
    const double m = -0.5 * (roots.lambda1 + roots.lambda2);
    const double s = 0.5 * (roots.lambda1 - roots.lambda2);
    const double pay = (beta - q) / co.c_ab * pow_pos(beta, m);
    co.c1 = pay * pow_pos(a, -s);
    co.c2 = -pay * pow_pos(a, s);
    if (k != 0.0) {
        const double marg = k * a / co.c_ab * pow_pos(a, m);
        co.c1 -= marg * pow_pos(beta, -s);
        co.c2 += marg * pow_pos(beta, s);
    }
    return co;
}

inline double eval_piecewise(double x, const LoanTerms& terms,
                             const CharacteristicRoots& roots, double beta,
                             const InteriorCoeffs& co, TailMode tail) {
    if (x < 0.0)
        throw DomainError("value: x must be >= 0");
    if (x <= terms.a)
        return terms.margin * x;
    if (x < beta)
        return co.c1 * pow_pos(x, roots.lambda1) + co.c2 * pow_pos(x, roots.lambda2);
    if (!terms.cap)
        return x - terms.q;
    const double cap = *terms.cap;
    if (x < cap)
        return x - terms.q; // reachable only when beta = b <= cap
    if (tail == TailMode::ExercisePayoff)
        return cap - terms.q;
    return (cap - terms.q) * pow_pos(x / cap, roots.lambda2);
}

} // namespace detail

// Immutable evaluator for the piecewise closed form. Coefficients are solved
// once at construction; evaluation is pure and concurrency-safe.
class ValueFunction {
public:
    ValueFunction(const MarketParams& m, const LoanTerms& terms,
                  const CharacteristicRoots& roots, const BoundarySolution& bsol,
                  TailMode tail = TailMode::Printed)
        : market_(m), terms_(terms), roots_(roots), b_(bsol.b), tail_(tail) {
        terms.validate();
        if (!terms.cap && terms.margin == 0.0) {
            kind_ = ValueKind::Basic;
            beta_ = b_;
        } else if (terms.cap && *terms.cap < b_) {
            kind_ = ValueKind::CapBelowB;
            beta_ = *terms.cap;
        } else {
            kind_ = ValueKind::CapAboveB; // includes margin-only contracts (L absent)
            beta_ = b_;
        }
        co_ = detail::interior_coeffs(terms.a, beta_, terms.q, terms.margin, roots);
    }

    double operator()(double x) const {
        return detail::eval_piecewise(x, terms_, roots_, beta_, co_, tail_);
    }

    ValueKind kind() const { return kind_; }
    TailMode tail_mode() const { return tail_; }
    double boundary() const { return b_; }          // root of g, uncapped
    double exercise_level() const { return beta_; } // b or L, whichever binds
    double c1() const { return co_.c1; }
    double c2() const { return co_.c2; }
    double c_ab() const { return co_.c_ab; }
    const MarketParams& market() const { return market_; }
    const LoanTerms& terms() const { return terms_; }
    const CharacteristicRoots& roots() const { return roots_; }

    ValueFunction with_tail_mode(TailMode t) const {
        ValueFunction v = *this;
        v.tail_ = t;
        return v;
    }

private:
    MarketParams market_;
    LoanTerms terms_;
    CharacteristicRoots roots_;
    double b_;
    double beta_ = 0.0;
    TailMode tail_;
    ValueKind kind_ = ValueKind::Basic;
    detail::InteriorCoeffs co_;
};

// Piecewise value of the uncapped, margin-free contract.
inline double value_basic(double x, const LoanTerms& terms,
                          const CharacteristicRoots& roots, double b) {
    LoanTerms t = terms;
    t.cap.reset();
    t.margin = 0.0;
    const auto co = detail::interior_coeffs(t.a, b, t.q, 0.0, roots);
    return detail::eval_piecewise(x, t, roots, b, co, TailMode::Printed);
}

// Piecewise value of the contract with cap and/or margin.
inline double value_capped(double x, const LoanTerms& terms,
                           const CharacteristicRoots& roots, double b,
                           TailMode tail = TailMode::Printed) {
    if (terms.margin > margin_bound(roots, terms.q / terms.a))
        throw MarginTooLarge("value_capped: k exceeds h(q/a)");
    const double beta = terms.cap ? std::min(b, *terms.cap) : b;
    const auto co = detail::interior_coeffs(terms.a, beta, terms.q, terms.margin, roots);
    return detail::eval_piecewise(x, terms, roots, beta, co, tail);
}

// Time-t contract value from the time-0 one: V_t = e^{gamma t} f(e^{-gamma t} S_t).
inline double value_at_time(double t, double s_t, const ValueFunction& f) {
    const double g = f.terms().gamma;
    return std::exp(g * t) * f(std::exp(-g * t) * s_t);
}

// Central-difference residual of the pricing ODE at x inside the continuation
// region; O(h^2) for the closed forms. The interior branch solves the ODE for
// any beta, so pair this with the smooth-fit check to pin the boundary itself.
inline double ode_residual(const ValueFunction& f, double x, double h = 0.0) {
    const double a = f.terms().a;
    const double beta = f.exercise_level();
    if (h <= 0.0)
        h = std::max(1e-4 * x, 1e-7 * f.terms().q);
    if (!(x - 3.0 * h > a && x + 3.0 * h < beta))
        throw DomainError("ode_residual: stencil leaves the continuation region");
    const double fp = f(x + h);
    const double f0 = f(x);
    const double fm = f(x - h);
    const double d1 = (fp - fm) / (2.0 * h);
    const double d2 = (fp - 2.0 * f0 + fm) / (h * h);
    const double sigma = f.market().sigma;
    const double rt = f.market().r - f.terms().gamma; // rtilde <= 0
    const double delta = f.market().delta;
    return 0.5 * sigma * sigma * x * x * d2 + (rt - delta) * x * d1 - rt * f0;
}

// Image-expansion density of {tau_b1 in dt, tau_b1 < tau_a1} for a Brownian
// motion with drift mu and unit volatility, barriers a1 < 0 < b1. Truncation
// error of the 2N+1-term sum decays like exp(-(2N(b1-a1))^2 / (2t)).
inline double exit_time_density(double t, double a1, double b1, double mu, int n_terms) {
    if (!(t > 0.0))
        return 0.0;
    const double width = b1 - a1;
    double sum = 0.0;
    for (int n = -n_terms; n <= n_terms; ++n) {
        const double xn = 2.0 * n * width + b1;
        sum += xn * std::exp(-xn * xn / (2.0 * t));
    }
    const double pref = std::exp(mu * b1 - 0.5 * mu * mu * t) /
                        std::sqrt(2.0 * M_PI * t * t * t);
    return pref * sum;
}

// Quadrature of e^{lambda t} * exit_time_density over (0, t_max], composite
// Simpson in log-time. The exponentials are merged so the integrand decays
// like exp(-(mu^2 - 2 lambda) t / 2) and never overflows on the way.
inline double weighted_exit_quadrature(double a1, double b1, double mu, double lambda,
                                       double t_max, int n_steps, int n_terms) {
    if (!(a1 < 0.0 && 0.0 < b1))
        throw DomainError("weighted_exit_quadrature: need a1 < 0 < b1");
    if (n_steps < 2)
        throw DomainError("weighted_exit_quadrature: n_steps too small");
    if (n_steps % 2 != 0)
        ++n_steps;
    const double width = b1 - a1;
    const double rate = 0.5 * mu * mu - lambda; // positive when disc > 0
    auto integrand = [&](double u) {
        const double t = std::exp(u);
        double sum = 0.0;
        for (int n = -n_terms; n <= n_terms; ++n) {
            const double xn = 2.0 * n * width + b1;
            sum += xn * std::exp(-xn * xn / (2.0 * t));
        }
        const double log_pref = mu * b1 - rate * t - 0.5 * std::log(2.0 * M_PI * t * t * t);
        return std::exp(log_pref) * sum * t; // * t: Jacobian of u = ln t
    };
    // Below t ~ b1^2/1400 the nearest image term is exp(-700); integrand is 0.
    const double u_lo = std::log(b1 * b1 / 1400.0);
    const double u_hi = std::log(t_max);
    if (u_hi <= u_lo)
        throw DomainError("weighted_exit_quadrature: t_max too small");
    const double du = (u_hi - u_lo) / n_steps;
    double acc = integrand(u_lo) + integrand(u_hi);
    for (int i = 1; i < n_steps; ++i)
        acc += integrand(u_lo + i * du) * (i % 2 ? 4.0 : 2.0);
    return acc * du / 3.0;
}

} // namespace stockloan
