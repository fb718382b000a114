#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "stockloan/valuation.hpp"
#include "test_support.hpp"

using namespace stockloan;
using namespace testsup;

namespace {
const CharacteristicRoots kRoots = compute_roots(ref_market(), 0.07);
const double kB50 = 143.83913944600415; // boundary for a = 50

ValueFunction make_vf(const LoanTerms& t, double b, TailMode tail = TailMode::Printed) {
    BoundarySolution bs;
    bs.b = b;
    bs.y_star = b / t.a;
    return ValueFunction(ref_market(), t, kRoots, bs, tail);
}
} // namespace

TEST_CASE("basic value function against reference values") {
    const LoanTerms t = ref_terms(50.0);
    CHECK(value_basic(30.0, t, kRoots, kB50) == 0.0);
    CHECK(value_basic(50.0, t, kRoots, kB50) == 0.0);
    CHECK(value_basic(60.0, t, kRoots, kB50) == doctest::Approx(1.1620575750942331).epsilon(1e-11));
    CHECK(value_basic(80.0, t, kRoots, kB50) == doctest::Approx(5.3305276298408870).epsilon(1e-11));
    CHECK(value_basic(100.0, t, kRoots, kB50) == doctest::Approx(12.643431711955024).epsilon(1e-11));
    CHECK(value_basic(120.0, t, kRoots, kB50) == doctest::Approx(23.947069591130674).epsilon(1e-11));
    CHECK(value_basic(140.0, t, kRoots, kB50) == doctest::Approx(40.107814365277457).epsilon(1e-11));
    CHECK(value_basic(150.0, t, kRoots, kB50) == doctest::Approx(50.0));
    CHECK_THROWS_AS(value_basic(-1.0, t, kRoots, kB50), DomainError);

    // both branches agree at the boundary
    const double just_below = value_basic(kB50 * (1.0 - 1e-12), t, kRoots, kB50);
    CHECK(std::fabs(just_below - (kB50 - 100.0)) < 1e-8);

    const ValueFunction f = make_vf(t, kB50);
    CHECK(f.kind() == ValueKind::Basic);
    for (double x : {25.0, 55.0, 90.0, 130.0, 200.0})
        CHECK(f(x) == value_basic(x, t, kRoots, kB50));
}

TEST_CASE("capped value function, cap above the boundary (L = 240)") {
    LoanTerms t = ref_terms(10.0);
    t.margin = 0.5;
    t.cap = 240.0;
    const double b = 179.40890562631184;
    const ValueFunction f = make_vf(t, b);
    CHECK(f.kind() == ValueKind::CapAboveB);
    CHECK(f.exercise_level() == doctest::Approx(b));
    CHECK(f(5.0) == doctest::Approx(2.5));
    CHECK(f(10.0) == doctest::Approx(5.0));
    CHECK(f(50.0) == doctest::Approx(13.620746796964617).epsilon(1e-11));
    CHECK(f(100.0) == doctest::Approx(27.489648324376217).epsilon(1e-11));
    CHECK(f(150.0) == doctest::Approx(54.249200960090118).epsilon(1e-11));
    CHECK(f(b) == doctest::Approx(79.408905626311836).epsilon(1e-11));
    CHECK(f(200.0) == doctest::Approx(100.0));
    CHECK(f(240.0) == doctest::Approx(140.0));
    // printed tail vs exercise payoff above the cap
    CHECK(f(260.0) == doctest::Approx(146.59434116996307).epsilon(1e-11));
    CHECK(f.with_tail_mode(TailMode::ExercisePayoff)(260.0) == doctest::Approx(140.0));
    CHECK(value_capped(260.0, t, kRoots, b) == doctest::Approx(146.59434116996307).epsilon(1e-11));
    CHECK(value_capped(260.0, t, kRoots, b, TailMode::ExercisePayoff) == doctest::Approx(140.0));
}

TEST_CASE("capped value function, cap below the boundary (L = 130)") {
    LoanTerms t = ref_terms(10.0);
    t.margin = 0.5;
    t.cap = 130.0;
    const double b = 179.40890562631184; // uncapped root; exercise at L instead
    const ValueFunction f = make_vf(t, b);
    CHECK(f.kind() == ValueKind::CapBelowB);
    CHECK(f.exercise_level() == doctest::Approx(130.0));
    CHECK(f(50.0) == doctest::Approx(13.033195348314894).epsilon(1e-11));
    CHECK(f(100.0) == doctest::Approx(22.407717487623066).epsilon(1e-11));
    CHECK(f(129.0) == doctest::Approx(29.710743939251216).epsilon(1e-11));
    CHECK(f(130.0) == doctest::Approx(30.0));
    CHECK(f(200.0) == doctest::Approx(38.432730199329038).epsilon(1e-11));
    CHECK(f.with_tail_mode(TailMode::ExercisePayoff)(200.0) == doctest::Approx(30.0));
}

TEST_CASE("margin-only contract exercises like the basic one above b") {
    LoanTerms t = ref_terms(50.0);
    t.margin = 0.3;
    const auto sol = solve_boundary(kRoots, t);
    const ValueFunction f = make_vf(t, sol.b);
    CHECK(f.kind() == ValueKind::CapAboveB);
    CHECK(f(t.a) == doctest::Approx(0.3 * t.a));
    CHECK(f(sol.b + 20.0) == doctest::Approx(sol.b + 20.0 - 100.0));
}

TEST_CASE("k = 0 with a loose cap coincides with the basic value") {
    LoanTerms t = ref_terms(50.0);
    t.cap = 500.0; // far above b
    for (double x : {55.0, 75.0, 100.0, 125.0, 140.0})
        CHECK(value_capped(x, t, kRoots, kB50) == value_basic(x, ref_terms(50.0), kRoots, kB50));
}

TEST_CASE("value_capped rejects k above the margin bound") {
    LoanTerms t = ref_terms(50.0);
    t.margin = 0.6; // h(2) = 0.5536
    CHECK_THROWS_AS(value_capped(80.0, t, kRoots, kB50), MarginTooLarge);
}

TEST_CASE("hitting expectation") {
    CHECK(hitting_expectation(50.5, 50.0, kB50, kRoots) ==
          doctest::Approx(0.0010455153597484068).epsilon(1e-10));
    CHECK(hitting_expectation(100.0, 50.0, kB50, kRoots) ==
          doctest::Approx(0.28840510721082246).epsilon(1e-11));
    CHECK(hitting_expectation(143.0, 50.0, kB50, kRoots) ==
          doctest::Approx(0.98097705776421882).epsilon(1e-11));
    // limits at the barriers
    CHECK(hitting_expectation(kB50 * (1.0 - 1e-10), 50.0, kB50, kRoots) ==
          doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::fabs(hitting_expectation(50.0 * (1.0 + 1e-10), 50.0, kB50, kRoots)) < 1e-7);
    CHECK_THROWS_AS(hitting_expectation(50.0, 50.0, kB50, kRoots), DomainError);
    CHECK_THROWS_AS(hitting_expectation(150.0, 50.0, kB50, kRoots), DomainError);
    // f(x) = (b - q) E[e^{lambda tau_b}; tau_b < tau_a]
    const double f100 = value_basic(100.0, ref_terms(50.0), kRoots, kB50);
    CHECK(f100 == doctest::Approx((kB50 - 100.0) *
                                  hitting_expectation(100.0, 50.0, kB50, kRoots))
                      .epsilon(1e-12));
}

TEST_CASE("time-t value scales the time-0 one") {
    const ValueFunction f = make_vf(ref_terms(50.0), kB50);
    for (double x : {60.0, 100.0, 140.0})
        CHECK(value_at_time(0.0, x, f) == doctest::Approx(f(x)));
    const double g = 0.07, t = 2.0;
    // discounted price in the termination region
    CHECK(value_at_time(t, 40.0 * std::exp(g * t), f) == doctest::Approx(0.0));
    // discounted price in the exercise region: S_t - q e^{gamma t}
    const double st = 160.0 * std::exp(g * t);
    CHECK(value_at_time(t, st, f) ==
          doctest::Approx(st - 100.0 * std::exp(g * t)).epsilon(1e-12));
}

TEST_CASE("ODE residual vanishes on the continuation region") {
    const ValueFunction f = make_vf(ref_terms(50.0), kB50);
    for (int i = 0; i < 200; ++i) {
        const double x = 51.0 + (142.0 - 51.0) * i / 199.0;
        const double res = ode_residual(f, x);
        CHECK(std::fabs(res) <= 1e-6 * (std::fabs(f(x)) + 100.0));
    }
    CHECK_THROWS_AS(ode_residual(f, 50.0001, 0.01), DomainError);
    CHECK_THROWS_AS(ode_residual(f, kB50 - 1e-5, 0.01), DomainError);
}

TEST_CASE("exercise-region operator term is nonpositive") {
    // delta x - rtilde q >= 0 for x > b makes stopping optimal there
    const double rt = 0.05 - 0.07;
    for (double x = kB50; x <= 3.0 * kB50; x += 10.0)
        CHECK(0.01 * x - rt * 100.0 >= 0.0);
}

TEST_CASE("smooth fit at the boundary, and its failure under a perturbed b") {
    const ValueFunction f = make_vf(ref_terms(50.0), kB50);
    const double h = 1e-5 * kB50;
    const double d = (3.0 * f(kB50) - 4.0 * f(kB50 - h) + f(kB50 - 2.0 * h)) / (2.0 * h);
    CHECK(std::fabs(d - 1.0) <= 1e-6);

    const double b_bad = kB50 * 1.05;
    const ValueFunction g = make_vf(ref_terms(50.0), b_bad);
    const double hb = 1e-5 * b_bad;
    const double db =
        (3.0 * g(b_bad) - 4.0 * g(b_bad - hb) + g(b_bad - 2.0 * hb)) / (2.0 * hb);
    CHECK(std::fabs(db - 1.0) > 1e-4);
}

TEST_CASE("payoff bounds and shape on a grid") {
    const LoanTerms t = ref_terms(50.0);
    const ValueFunction f = make_vf(t, kB50);
    const double lo = 25.0, hi = 2.0 * kB50;
    std::vector<double> vs(500);
    std::vector<double> xs(500);
    for (int i = 0; i < 500; ++i) {
        xs[i] = lo + (hi - lo) * i / 499.0;
        vs[i] = f(xs[i]);
        CHECK(vs[i] >= std::max(0.0, xs[i] - 100.0) - 1e-9);
        CHECK(vs[i] <= xs[i] + 1e-9);
        if (i > 0)
            CHECK(vs[i] >= vs[i - 1] - 1e-9);
    }
    for (int i = 0; i + 2 < 500; ++i)
        CHECK(vs[i + 1] <= 0.5 * (vs[i] + vs[i + 2]) + 1e-9);
}

TEST_CASE("small-barrier value approaches the barrier-free limit") {
    const double b0 = kLimitB;
    const LoanTerms t = ref_terms(0.1); // a = 1e-3 q
    const auto sol = solve_boundary(kRoots, t);
    double sup = 0.0;
    for (int i = 0; i < 400; ++i) {
        const double x = 1.0 + (280.0 - 1.0) * i / 399.0;
        const double fa = value_basic(x, t, kRoots, sol.b);
        const double f0 = x >= b0 ? x - 100.0
                                  : (b0 - 100.0) * std::pow(x / b0, kLambda1);
        sup = std::max(sup, std::fabs(fa - f0));
    }
    CHECK(sup < 0.1); // 1e-3 * q
}

TEST_CASE("value decreases as the termination barrier rises") {
    const double fs[] = {14.127746435375, 13.368508076684, 12.643431711955,
                         11.605696886283, 8.135682698913};
    const double as[] = {20.0, 40.0, 50.0, 60.0, 80.0};
    for (int i = 0; i < 5; ++i) {
        const auto sol = solve_boundary(kRoots, ref_terms(as[i]));
        CHECK(value_basic(100.0, ref_terms(as[i]), kRoots, sol.b) ==
              doctest::Approx(fs[i]).epsilon(1e-9));
        if (i > 0)
            CHECK(fs[i] < fs[i - 1]);
    }
}

TEST_CASE("closed forms stay continuous as the discriminant degenerates") {
    // delta = 0 with gamma - r barely above sigma^2/2: sqrt(disc)/sigma ~ 5e-9.
    // The two-power formulas approach the sinh-ratio limit
    // (x/b)^{-mu/sigma} * ln(x/a)/ln(b/a) with -mu/sigma -> 1, and must not
    // blow up from cancellation.
    const double sigma = 0.2, r = 0.05;
    const double a = 50.0, b = 200.0, x = 100.0;
    const double limit = (x / b) * std::log(x / a) / std::log(b / a);
    double prev = 0.0;
    for (double eps : {1e-8, 2e-8, 1e-7}) {
        const double gamma = r + 0.5 * sigma * sigma * (1.0 + eps);
        const MarketParams m{r, sigma, 0.0};
        REQUIRE(classify_regime(m, gamma).tag == RegimeTag::ZeroDividend);
        const auto roots = compute_roots(m, gamma);
        const double e = hitting_expectation(x, a, b, roots);
        CHECK(std::isfinite(e));
        CHECK(e == doctest::Approx(limit).epsilon(1e-4));
        if (prev != 0.0)
            CHECK(e == doctest::Approx(prev).epsilon(1e-4));
        prev = e;
    }
}

TEST_CASE("exit-time density series") {
    SUBCASE("nonnegative on a time grid with N = 50") {
        const double a1 = -4.6209812037329687, b1 = 2.4235026800029563;
        for (double t : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0, 500.0})
            CHECK(exit_time_density(t, a1, b1, -0.275, 50) >= -1e-12);
        CHECK(exit_time_density(0.0, a1, b1, -0.275, 50) == 0.0);
    }
    SUBCASE("symmetric driftless case sends half the mass through the top") {
        const double mass = weighted_exit_quadrature(-1.0, 1.0, 0.0, 0.0, 2000.0, 20000, 60);
        CHECK(mass == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("e^{lambda t}-weighted integral matches the closed form") {
        const double a1 = std::log(50.0 / 100.0) / 0.15;
        const double b1 = std::log(kB50 / 100.0) / 0.15;
        const double quad =
            weighted_exit_quadrature(a1, b1, kRoots.mu, kRoots.lambda, 2400.0, 20000, 60);
        const double closed = hitting_expectation(100.0, 50.0, kB50, kRoots);
        CHECK(quad == doctest::Approx(closed).epsilon(1e-6));
    }
}
