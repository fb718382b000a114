#pragma once

// Parameter containers, admissibility classification and the characteristic
// roots lambda1 > 1 >= lambda2 of the pricing ODE
//   (sigma^2/2) x^2 f'' + (rtilde - delta) x f' - rtilde f = 0,
// rtilde = r - gamma. Every closed form downstream is a combination of
// x^lambda1 and x^lambda2.

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "stockloan/errors.hpp"

namespace stockloan {

namespace detail {

// Shared power routine: x^p as exp(p ln x) so results are bit-identical
// across modules.
inline double pow_pos(double x, double p) {
    if (x < 0.0)
        throw DomainError("pow_pos: negative base");
    if (p == 0.0)
        return 1.0;
    if (x == 0.0)
        return p > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::exp(p * std::log(x));
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace detail

struct MarketParams {
    double r = 0.0;     // risk-free rate, per year
    double sigma = 0.0; // volatility, per sqrt(year)
    double delta = 0.0; // dividend yield, per year

    void validate() const {
        if (!(r > 0.0))
            throw InvalidParams("MarketParams: r must be > 0");
        if (!(sigma > 0.0))
            throw InvalidParams("MarketParams: sigma must be > 0");
        if (!(delta >= 0.0))
            throw InvalidParams("MarketParams: delta must be >= 0");
    }
};

struct LoanTerms {
    double q = 0.0;            // principal
    double gamma = 0.0;        // loan interest rate, per year
    double a = 0.0;            // automatic termination barrier, 0 < a <= q
    std::optional<double> cap; // cap level L, q < L; absent = uncapped contract
    double margin = 0.0;       // margin fraction k, 0 <= k < 1

    void validate() const {
        if (!(q > 0.0))
            throw InvalidParams("LoanTerms: q must be > 0");
        if (!(a > 0.0 && a <= q))
            throw InvalidParams("LoanTerms: need 0 < a <= q");
        if (cap && !(*cap > q))
            throw InvalidParams("LoanTerms: cap L must exceed q");
        if (!(margin >= 0.0 && margin < 1.0))
            throw InvalidParams("LoanTerms: need 0 <= k < 1");
    }
};

enum class RegimeTag { PositiveDividend, ZeroDividend, Inadmissible };

inline const char* to_string(RegimeTag t) {
    switch (t) {
    case RegimeTag::PositiveDividend: return "PositiveDividend";
    case RegimeTag::ZeroDividend: return "ZeroDividend";
    default: return "Inadmissible";
    }
}

struct ParameterRegime {
    RegimeTag tag = RegimeTag::Inadmissible;
    std::string detail; // for Inadmissible: which inequality failed

    bool admissible() const { return tag != RegimeTag::Inadmissible; }
};

// The default policy requires gamma-r+delta >= 0 whenever delta > 0, the
// condition under which the perpetual problem is well posed. The permissive
// policy accepts any delta > 0; ill-posed combinations it lets through still
// fail in the solvers.
enum class RegimePolicy { Section3, Section5Permissive };

inline ParameterRegime classify_regime(const MarketParams& m, double gamma,
                                       RegimePolicy policy = RegimePolicy::Section3) {
    if (m.delta > 0.0) {
        const double drift = gamma - m.r + m.delta;
        if (policy == RegimePolicy::Section3 && drift < 0.0)
            return {RegimeTag::Inadmissible,
                    "delta>0 requires gamma-r+delta>=0 (gamma-r+delta=" +
                        detail::fmt(drift) + " < 0)"};
        return {RegimeTag::PositiveDividend, "delta>0, gamma-r+delta>=0"};
    }
    if (m.delta == 0.0) {
        const double excess = gamma - m.r;
        const double half_var = 0.5 * m.sigma * m.sigma;
        if (excess > half_var)
            return {RegimeTag::ZeroDividend, "delta=0, gamma-r>sigma^2/2"};
        return {RegimeTag::Inadmissible,
                "delta=0 requires gamma-r>sigma^2/2 (gamma-r=" + detail::fmt(excess) +
                    " <= sigma^2/2=" + detail::fmt(half_var) + ")"};
    }
    return {RegimeTag::Inadmissible, "delta>=0 violated (delta=" + detail::fmt(m.delta) + ")"};
}

inline ParameterRegime classify_regime(const MarketParams& m, const LoanTerms& t,
                                       RegimePolicy policy = RegimePolicy::Section3) {
    return classify_regime(m, t.gamma, policy);
}

// Exponents of the power solutions x^lambda of the pricing operator, plus the
// auxiliary drift quantities they are built from.
struct CharacteristicRoots {
    double mu = 0.0;         // -(sigma/2 + (gamma-r+delta)/sigma)
    double lambda = 0.0;     // gamma - r
    double delta_disc = 0.0; // mu^2 - 2 lambda
    double sqrt_disc = 0.0;  // sqrt(delta_disc)
    double lambda1 = 0.0;    // (-mu + sqrt_disc)/sigma, > 1
    double lambda2 = 0.0;    // (-mu - sqrt_disc)/sigma, <= 1
};

inline CharacteristicRoots compute_roots(const MarketParams& m, double gamma) {
    const double lam = gamma - m.r;
    const double mu = -(m.sigma / 2.0 + (lam + m.delta) / m.sigma);
    const double disc = mu * mu - 2.0 * lam;
    if (disc < 0.0)
        throw NegativeDiscriminant("compute_roots: mu^2 - 2(gamma-r) = " +
                                   detail::fmt(disc) + " < 0");
    CharacteristicRoots cr;
    cr.mu = mu;
    cr.lambda = lam;
    cr.delta_disc = disc;
    cr.sqrt_disc = std::sqrt(disc);
    const double two_lam_over_var = 2.0 * lam / (m.sigma * m.sigma);
    if (m.delta == 0.0) {
        // delta = 0: lambda1 = 2(gamma-r)/sigma^2 and lambda2 = 1 exactly.
        cr.lambda1 = two_lam_over_var;
        cr.lambda2 = 1.0;
    } else {
        cr.lambda1 = (-mu + cr.sqrt_disc) / m.sigma;
        // Product identity lambda1*lambda2 = 2(gamma-r)/sigma^2; no
        // cancellation when gamma is close to r.
        cr.lambda2 = two_lam_over_var / cr.lambda1;
    }
    return cr;
}

// h(y) with the second-term coefficient fixed at q/a; the admissibility bound
// on the margin fraction is h evaluated at y = q/a itself.
inline double margin_h(const CharacteristicRoots& roots, double q_over_a, double y) {
    const double l1 = roots.lambda1;
    const double l2 = roots.lambda2;
    if (l1 == 1.0)
        throw DomainError("margin_h: lambda1 == 1");
    return (l1 + 1.0 - l2) / l1 * detail::pow_pos(y, 1.0 - l2) -
           q_over_a * (l1 - 1.0 - l2) / (l1 - 1.0) * detail::pow_pos(y, -l2);
}

inline double margin_bound(const CharacteristicRoots& roots, double q_over_a) {
    if (!(q_over_a >= 1.0))
        throw DomainError("margin_bound: q/a must be >= 1");
    return margin_h(roots, q_over_a, q_over_a);
}

} // namespace stockloan
