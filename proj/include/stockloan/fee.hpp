#pragma once

// Fee determination: the three-case split on S0 against (a, b ∧ L), the
// negotiation pipeline (accept terms -> solve boundary -> price the fee), and
// the inverse map from a target fee back to the termination barrier a.

#include <cmath>
#include <optional>
#include <string>

#include "stockloan/boundary.hpp"
#include "stockloan/model.hpp"
#include "stockloan/valuation.hpp"

namespace stockloan {

enum class FeeCase { TerminatedAtStart, ImmediateExercise, Active };

inline const char* to_string(FeeCase c) {
    switch (c) {
    case FeeCase::TerminatedAtStart: return "TerminatedAtStart";
    case FeeCase::ImmediateExercise: return "ImmediateExercise";
    default: return "Active";
    }
}

struct FeeQuote {
    FeeCase fee_case = FeeCase::Active;
    double c = 0.0;              // service fee
    double b = 0.0;              // exercise boundary (NaN when not solved)
    double exercise_level = 0.0; // b ∧ L (NaN when not solved)
    // diagnostics: inputs echo
    double s0 = 0.0;
    double value_s0 = 0.0; // f(S0)
};

inline FeeQuote fair_fee(double s0, const MarketParams& m, const LoanTerms& t,
                         RegimePolicy policy = RegimePolicy::Section3) {
    m.validate();
    t.validate();
    const ParameterRegime regime = classify_regime(m, t, policy);
    if (!regime.admissible())
        throw InvalidParams("fair_fee: inadmissible parameters: " + regime.detail);
    const CharacteristicRoots roots = compute_roots(m, t.gamma);
    if (t.margin > margin_bound(roots, t.q / t.a))
        throw MarginTooLarge("fair_fee: k=" + detail::fmt(t.margin) + " exceeds h(q/a)=" +
                             detail::fmt(margin_bound(roots, t.q / t.a)));

    FeeQuote fq;
    fq.s0 = s0;
    if (s0 <= t.a) {
        // Contract terminates immediately; the client effectively sells the
        // stock for k*S0 plus the retained principal.
        fq.fee_case = FeeCase::TerminatedAtStart;
        fq.c = t.margin * s0 + t.q - s0;
        fq.value_s0 = t.margin * s0;
        fq.b = std::numeric_limits<double>::quiet_NaN();
        fq.exercise_level = fq.b;
        return fq;
    }

    const BoundarySolution bs = solve_boundary(roots, t);
    const ValueFunction f(m, t, roots, bs);
    fq.b = bs.b;
    fq.exercise_level = f.exercise_level();
    fq.value_s0 = f(s0);
    if (s0 >= fq.exercise_level) {
        fq.fee_case = FeeCase::ImmediateExercise;
        fq.c = 0.0;
        return fq;
    }
    fq.fee_case = FeeCase::Active;
    fq.c = fq.value_s0 - s0 + t.q;
    if (fq.c < 0.0)
        throw DomainError("fair_fee: negative fee c=" + detail::fmt(fq.c) +
                          " (arbitrage-inconsistent parameters)");
    return fq;
}

// Full negotiation record: every intermediate quantity the three steps
// produce, for audit. Solver failures are surfaced here instead of thrown.
struct ContractQuote {
    bool ok = false;
    std::string error; // empty when ok
    MarketParams market;
    LoanTerms terms;
    double s0 = 0.0;
    ParameterRegime regime;
    CharacteristicRoots roots;
    double h_bound = 0.0; // h(q/a)
    BoundarySolution boundary;
    std::optional<ValueFunction> value;
    FeeQuote fee;
};

inline ContractQuote negotiate(const LoanTerms& draft, const MarketParams& m, double s0,
                               RegimePolicy policy = RegimePolicy::Section3) {
    ContractQuote cq;
    cq.market = m;
    cq.terms = draft;
    cq.s0 = s0;
    try {
        m.validate();
        draft.validate(); // step 1: accept the negotiated terms
        cq.regime = classify_regime(m, draft, policy);
        if (!cq.regime.admissible())
            throw InvalidParams("inadmissible parameters: " + cq.regime.detail);
        cq.roots = compute_roots(m, draft.gamma);
        cq.h_bound = margin_bound(cq.roots, draft.q / draft.a);
        if (draft.margin > cq.h_bound)
            throw MarginTooLarge("k=" + detail::fmt(draft.margin) + " exceeds h(q/a)=" +
                                 detail::fmt(cq.h_bound));
        if (s0 > draft.a) {
            cq.boundary = solve_boundary(cq.roots, draft); // step 2
            cq.value.emplace(m, draft, cq.roots, cq.boundary);
        }
        cq.fee = fair_fee(s0, m, draft, policy); // step 3
        cq.ok = true;
    } catch (const Error& e) {
        cq.ok = false;
        cq.error = e.what();
    }
    return cq;
}

// Inverse of a -> fair_fee(...).c for fixed other parameters. The fee is
// nonincreasing in a; endpoints are evaluated rather than assumed.
inline double implied_barrier(double target_c, const MarketParams& m,
                              const LoanTerms& terms_without_a, double s0,
                              double tol_scale = 1e-8) {
    m.validate();
    LoanTerms t = terms_without_a;
    const double q = t.q;
    const double a_lo = 1e-6 * q;
    const double a_hi = (1.0 - 1e-9) * q;
    auto fee_at = [&](double a) {
        t.a = a;
        return fair_fee(s0, m, t).c;
    };
    const double c_max = fee_at(a_lo); // fee shrinks as the barrier rises
    const double c_min = fee_at(a_hi);
    if (c_max < c_min - 1e-12 * q)
        throw MonotonicityViolation("implied_barrier: c(a_lo)=" + detail::fmt(c_max) +
                                    " < c(a_hi)=" + detail::fmt(c_min));
    const double tol = tol_scale * q;
    if (target_c > c_max + tol || target_c < c_min - tol)
        throw OutOfRange("implied_barrier: target c=" + detail::fmt(target_c) +
                         " outside achievable [" + detail::fmt(c_min) + ", " +
                         detail::fmt(c_max) + "]");

    double lo = a_lo, hi = a_hi;
    double mid = lo, c_mid = c_max;
    for (int i = 0; i < 200; ++i) {
        mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        c_mid = fee_at(mid);
        if (std::fabs(c_mid - target_c) <= tol)
            return mid;
        if (c_mid > target_c)
            lo = mid; // fee too high: raise the barrier
        else
            hi = mid;
    }
    if (std::fabs(c_mid - target_c) <= tol)
        return mid;
    throw OutOfRange("implied_barrier: no barrier reproduces c=" + detail::fmt(target_c) +
                     " within tolerance");
}

} // namespace stockloan
