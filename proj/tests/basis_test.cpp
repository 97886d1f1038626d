#include <doctest.h>

#include <cmath>
#include <vector>

#include "amrmc/basis.hpp"
#include "oracles.hpp"

using namespace amrmc;

TEST_CASE("Hermite point values") {
    CHECK(hermite(0, 3.7) == 1.0);
    CHECK(hermite(1, 3.7) == 3.7);
    CHECK(hermite(2, 0.0) == -1.0);   // He_2(x) = x^2 - 1
    CHECK(hermite(4, 1.0) == -2.0);   // He_4(x) = x^4 - 6x^2 + 3
    CHECK_THROWS_AS(hermite(-1, 0.0), std::invalid_argument);
}

TEST_CASE("recurrence agrees with the factorial-sum formula") {
    for (int n = 0; n <= 15; ++n)
        for (int i = 0; i < 100; ++i) {
            const double x = -5.0 + 10.0 * i / 99.0;
            const double rec = hermite(n, x);
            const double sum = oracles::hermite_sum_formula(n, x);
            CHECK(std::abs(rec - sum) <= 1e-9 * std::max(1.0, std::abs(sum)));
        }
}

TEST_CASE("normalized Hermite basis values") {
    const BasisSpec spec{BasisFamily::HermiteNormalized, 2};
    const auto psi = eval_basis(spec, 1.0, 2.0);
    CHECK(psi[0] == 1.0);
    CHECK(psi[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(psi[2] == doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(1e-14));

    // scaling by sqrt(t): psi_k(x) = He_k(x / sqrt(t)) / sqrt(k!)
    const auto scaled = eval_basis({BasisFamily::HermiteNormalized, 5}, 4.0, 3.0);
    for (int k = 0; k <= 5; ++k) {
        double fact = 1.0;
        for (int i = 2; i <= k; ++i) fact *= i;
        CHECK(scaled[k] ==
              doctest::Approx(oracles::hermite_sum_formula(k, 1.5) / std::sqrt(fact))
                  .epsilon(1e-12));
    }
}

TEST_CASE("component 0 is exactly 1 for both families") {
    for (double t : {0.25, 1.0, 3.0})
        for (double state : {0.1, 1.0, 2.7}) {
            CHECK(eval_basis({BasisFamily::HermiteNormalized, 6}, t, state)[0] == 1.0);
            CHECK(eval_basis({BasisFamily::ExponentialMartingale, 6}, t, state)[0] == 1.0);
        }
}

TEST_CASE("exponential-martingale values") {
    // k = 2, t = 1, S = 1 (so W = 0.5): e^{2*0.5 - 2} = e^{-1}
    const auto psi = eval_basis({BasisFamily::ExponentialMartingale, 2}, 1.0, 1.0);
    CHECK(psi[2] == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

    // psi_1(S) = S holds exactly, bit for bit
    for (double s : {0.3, 1.0, 2.456789, 17.25})
        CHECK(eval_basis({BasisFamily::ExponentialMartingale, 3}, 0.7, s)[1] == s);

    // direct formula psi_k = S^k e^{k(1-k)t/2}
    const double t = 0.6, s = 1.8;
    const auto v = eval_basis({BasisFamily::ExponentialMartingale, 5}, t, s);
    for (int k = 0; k <= 5; ++k)
        CHECK(v[k] ==
              doctest::Approx(std::pow(s, k) * std::exp(0.5 * k * (1.0 - k) * t))
                  .epsilon(1e-12));
}

TEST_CASE("eval_basis rejects bad inputs") {
    CHECK_THROWS_AS(eval_basis({BasisFamily::HermiteNormalized, 2}, 0.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_basis({BasisFamily::HermiteNormalized, 2}, -1.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_basis({BasisFamily::ExponentialMartingale, 2}, 1.0, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_basis({BasisFamily::ExponentialMartingale, 2}, 1.0, -0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval_basis({BasisFamily::HermiteNormalized, -1}, 1.0, 1.0),
                    std::invalid_argument);
}

TEST_CASE("martingale scale factors") {
    CHECK(martingale_scale({BasisFamily::HermiteNormalized, 5}, 2, 4.0) == 4.0);
    CHECK(martingale_scale({BasisFamily::HermiteNormalized, 5}, 0, 17.0) == 1.0);
    CHECK(martingale_scale({BasisFamily::HermiteNormalized, 5}, 3, 4.0) == 8.0);
    CHECK(martingale_scale({BasisFamily::ExponentialMartingale, 5}, 4, 2.0) == 1.0);
    CHECK_THROWS_AS(martingale_scale({BasisFamily::HermiteNormalized, 5}, 2, 0.0),
                    std::invalid_argument);
}

TEST_CASE("Hermite square expansion coefficients") {
    const auto e0 = hermite_square_expansion(0);
    REQUIRE(e0.coefficients.size() == 1);
    CHECK(e0.coefficients[0] == 1.0);

    const auto e1 = hermite_square_expansion(1);
    CHECK(e1.coefficients == std::vector<double>{1.0, 1.0});  // x^2 = He_0 + He_2

    const auto e2 = hermite_square_expansion(2);
    CHECK(e2.coefficients == std::vector<double>{2.0, 4.0, 1.0});

    CHECK_THROWS_AS(hermite_square_expansion(-1), std::invalid_argument);
}

TEST_CASE("square expansion identity at probe points up to degree 10") {
    for (int n = 0; n <= 10; ++n) {
        const auto ex = hermite_square_expansion(n);
        for (double c : ex.coefficients) CHECK(c > 0.0);
        for (int i = 0; i < 50; ++i) {
            const double x = -4.0 + 8.0 * i / 49.0;
            double combo = 0.0;
            for (int j = 0; j <= n; ++j) combo += ex.coefficients[j] * hermite(2 * j, x);
            const double direct = hermite(n, x) * hermite(n, x);
            CHECK(std::abs(combo - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
        }
    }
}
