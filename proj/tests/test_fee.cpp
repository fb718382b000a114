#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stockloan/fee.hpp"
#include "test_support.hpp"

using namespace stockloan;
using namespace testsup;

TEST_CASE("fee cases partition the initial price axis") {
    const MarketParams m = ref_market();
    const LoanTerms t = ref_terms(50.0);

    SUBCASE("terminated at start: S0 <= a") {
        const auto fq = fair_fee(40.0, m, t);
        CHECK(fq.fee_case == FeeCase::TerminatedAtStart);
        CHECK(fq.c == doctest::Approx(60.0)); // k=0: c = q - S0
        const auto at_barrier = fair_fee(50.0, m, t);
        CHECK(at_barrier.fee_case == FeeCase::TerminatedAtStart);
    }
    SUBCASE("immediate exercise: S0 >= b") {
        const auto fq = fair_fee(150.0, m, t);
        CHECK(fq.fee_case == FeeCase::ImmediateExercise);
        CHECK(fq.c == 0.0);
    }
    SUBCASE("active: a < S0 < b, fee equals the closed-form value") {
        const auto fq = fair_fee(100.0, m, t);
        CHECK(fq.fee_case == FeeCase::Active);
        CHECK(fq.c == doctest::Approx(12.643431711955024).epsilon(1e-11));
        // audit identity S0 - q + c = f(S0)
        CHECK(100.0 - t.q + fq.c == doctest::Approx(fq.value_s0).epsilon(1e-12));
    }
    SUBCASE("margin pays out in the terminated case") {
        LoanTerms tk = t;
        tk.margin = 0.5;
        const auto fq = fair_fee(30.0, m, tk);
        CHECK(fq.fee_case == FeeCase::TerminatedAtStart);
        CHECK(fq.c == doctest::Approx(0.5 * 30.0 + 100.0 - 30.0));
    }
}

TEST_CASE("capped contract quotes") {
    const MarketParams m = ref_market();
    LoanTerms t = ref_terms(10.0);
    t.margin = 0.5;
    t.cap = 240.0;

    const auto fq = fair_fee(100.0, m, t);
    CHECK(fq.fee_case == FeeCase::Active);
    CHECK(fq.c == doctest::Approx(27.489648324376217).epsilon(1e-10));
    CHECK(fq.b == doctest::Approx(179.40890562631184).epsilon(1e-11));

    // above b∧L the fee must vanish
    CHECK(fair_fee(200.0, m, t).fee_case == FeeCase::ImmediateExercise);
    CHECK(fair_fee(200.0, m, t).c == 0.0);

    t.cap = 130.0; // cap below b: exercise level is L
    const auto fq2 = fair_fee(100.0, m, t);
    CHECK(fq2.fee_case == FeeCase::Active);
    CHECK(fq2.c == doctest::Approx(22.407717487623066).epsilon(1e-10));
    CHECK(fair_fee(135.0, m, t).fee_case == FeeCase::ImmediateExercise);
}

TEST_CASE("margin above the bound is rejected at the quote gate") {
    LoanTerms t = ref_terms(50.0);
    t.margin = 0.56; // h(2) = 0.5536...
    CHECK_THROWS_AS(fair_fee(100.0, ref_market(), t), MarginTooLarge);
}

TEST_CASE("negotiation pipeline") {
    const MarketParams m = ref_market();

    SUBCASE("degenerate cap/margin reduces to the basic pipeline") {
        const auto quote = negotiate(ref_terms(50.0), m, 100.0);
        REQUIRE(quote.ok);
        CHECK(quote.fee.c == doctest::Approx(12.643431711955024).epsilon(1e-11));
        CHECK(quote.boundary.b == doctest::Approx(143.83913944600415).epsilon(1e-11));
        CHECK(quote.h_bound == doctest::Approx(0.55363385606875402).epsilon(1e-11));
        CHECK(quote.value.has_value());
        CHECK(quote.regime.tag == RegimeTag::PositiveDividend);
    }
    SUBCASE("a = q surfaces the bracket failure in the diagnostics") {
        const auto quote = negotiate(ref_terms(100.0), m, 120.0);
        CHECK_FALSE(quote.ok);
        CHECK(quote.error.find("no root above q/a") != std::string::npos);
    }
    SUBCASE("full capped quote is self-consistent") {
        LoanTerms t = ref_terms(10.0);
        t.margin = 0.5;
        t.cap = 240.0;
        const auto quote = negotiate(t, m, 100.0);
        REQUIRE(quote.ok);
        CHECK(quote.fee.c == doctest::Approx(27.489648324376217).epsilon(1e-10));
        REQUIRE(quote.value.has_value());
        CHECK((*quote.value)(100.0) == doctest::Approx(quote.fee.value_s0));
        CHECK(quote.fee.exercise_level == doctest::Approx(179.40890562631184).epsilon(1e-11));
    }
    SUBCASE("inadmissible regime is reported, not thrown") {
        const auto quote = negotiate(ref_terms(50.0), MarketParams{0.05, 0.30, 0.0}, 100.0);
        CHECK_FALSE(quote.ok);
        CHECK(quote.error.find("sigma^2/2") != std::string::npos);
    }
}

TEST_CASE("implied barrier inverts the fee map") {
    const MarketParams m = ref_market();
    const LoanTerms t = ref_terms(50.0); // a is a placeholder

    SUBCASE("round trip recovers a known barrier") {
        const double target = fair_fee(100.0, m, ref_terms(50.0)).c;
        const double a = implied_barrier(target, m, t, 100.0);
        CHECK(a == doctest::Approx(50.0).epsilon(1e-4));
        // re-priced fee within 1e-8 * q of the target
        CHECK(std::fabs(fair_fee(100.0, m, ref_terms(a)).c - target) <= 1e-8 * 100.0);
    }
    SUBCASE("mid-range target re-prices consistently") {
        const double target = 10.0;
        const double a = implied_barrier(target, m, t, 100.0);
        CHECK(a > 0.0);
        CHECK(a < 100.0);
        CHECK(std::fabs(fair_fee(100.0, m, ref_terms(a)).c - target) <= 1e-8 * 100.0);
    }
    SUBCASE("targets outside the achievable range are rejected") {
        CHECK_THROWS_AS(implied_barrier(20.0, m, t, 100.0), OutOfRange); // c_max ~ 14.28
        CHECK_THROWS_AS(implied_barrier(-1.0, m, t, 100.0), OutOfRange);
    }
}

TEST_CASE("fee is nonincreasing in the barrier, cash is nondecreasing in S0") {
    const MarketParams m = ref_market();
    double prev_c = std::numeric_limits<double>::infinity();
    for (double a : {10.0, 25.0, 40.0, 55.0, 70.0, 85.0, 95.0}) {
        const double c = fair_fee(100.0, m, ref_terms(a)).c;
        CHECK(c <= prev_c + 1e-12);
        prev_c = c;
    }
    const LoanTerms t = ref_terms(50.0);
    const double b = 143.83913944600415;
    double prev_cash = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40; ++i) {
        const double s0 = 50.0 + (b - 50.0) * i / 40.0;
        const double cash = t.q - fair_fee(s0, m, t).c;
        CHECK(cash >= prev_cash - 1e-9);
        prev_cash = cash;
    }
}
