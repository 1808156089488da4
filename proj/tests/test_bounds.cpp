#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "ewa/averaging.hpp"
#include "ewa/bounds.hpp"
#include "ewa/detail/numeric.hpp"

using namespace ewa;

TEST_CASE("deviation tail and level: closed forms") {
    CHECK(deviation_tail(0.1, 200) ==
          doctest::Approx(0.036631277777468361).epsilon(1e-14));
    CHECK(deviation_level(0.2, 100) ==
          doctest::Approx(0.025902224919975961).epsilon(1e-14));

    // the level is the square root of the tail at matching inputs
    for (double lambda : {0.05, 0.2, 0.7}) {
        for (int m : {1, 50, 333}) {
            CHECK(deviation_level(lambda, m) * deviation_level(lambda, m) ==
                  doctest::Approx(deviation_tail(lambda, m)).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(deviation_tail(0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(deviation_tail(0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(deviation_level(-0.1, 10), std::invalid_argument);
}

TEST_CASE("perturbing one sample row moves the log partition by at most 1/m") {
    std::mt19937_64 eng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 3 + eng() % 12;
        int m = 5 + static_cast<int>(eng() % 40);
        std::vector<double> w(n, 1.0 / static_cast<double>(n));
        std::vector<double> errs(n), perturbed(n);
        for (std::size_t i = 0; i < n; ++i) {
            int wrong = static_cast<int>(eng() % (m + 1));
            errs[i] = static_cast<double>(wrong) / m;
            // replacing one example flips each hypothesis by at most one count
            int shift = static_cast<int>(eng() % 3) - 1;
            int moved = std::min(std::max(wrong + shift, 0), m);
            perturbed[i] = static_cast<double>(moved) / m;
        }
        double eta = std::exp(4.0 * detail::uniform01(eng));
        double diff = std::abs(log_partition(errs, w, eta) -
                               log_partition(perturbed, w, eta));
        CHECK(diff <= 1.0 / m + 1e-12);
    }
}

TEST_CASE("risk bounds from the log ratio: boundary constants and validity") {
    const double eta = 2.0;
    const double k = 16.0;
    const double gamma = std::log(8.0 * k) / eta;
    const double eps = 0.03;

    RiskBounds b = log_ratio_risk_bounds(eps, gamma, eta, 0.0, k);
    CHECK(b.weak_weight_cap == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(b.at_zero == doctest::Approx(2.5 * (eps + gamma)).epsilon(1e-13));
    CHECK(b.at_two_delta == doctest::Approx(5.0 * (eps + gamma)).epsilon(1e-13));
    CHECK(b.valid);

    RiskBounds wide = log_ratio_risk_bounds(eps, gamma, eta, 0.26, k);
    CHECK_FALSE(wide.valid);  // delta * eta pushed past 1/2
    CHECK(log_ratio_risk_bounds(eps, gamma, eta, 0.25, k).valid);

    RiskBounds weak = log_ratio_risk_bounds(eps, gamma * 0.99, eta, 0.0, k);
    CHECK_FALSE(weak.valid);  // margin below the weight-decay threshold

    // fractional weight v on the minority side enters as a class of size 2/v
    const double v = 0.25;
    RiskBounds f = log_ratio_risk_bounds(eps, gamma, eta, 0.1, 2.0 / v);
    CHECK(f.weak_weight_cap == (2.0 / v) * std::exp(-eta * gamma));

    CHECK_THROWS_AS(log_ratio_risk_bounds(-0.1, gamma, eta, 0.0, k),
                    std::invalid_argument);
    CHECK_THROWS_AS(log_ratio_risk_bounds(eps, 0.0, eta, 0.0, k),
                    std::invalid_argument);
    CHECK_THROWS_AS(log_ratio_risk_bounds(eps, gamma, eta, 0.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("risk bounds at the tuned parameters") {
    TunedRiskBounds b = tuned_risk_bounds(10000, 100, 0.05, 0.25, 0.05);
    CHECK(b.eta == doctest::Approx(66.84611727667927).epsilon(1e-14));
    CHECK(b.delta == doctest::Approx(0.037399525179596976).epsilon(1e-14));
    CHECK(b.sign_error == doctest::Approx(0.5755756418754344).epsilon(1e-13));
    CHECK(b.abstain == doctest::Approx(1.1239952517959698).epsilon(1e-13));
    CHECK(b.m_threshold == doctest::Approx(91360207.22024616).epsilon(1e-10));
    CHECK(b.sign_error_active);
    CHECK_FALSE(b.abstain_active);  // m sits far below the activation threshold

    CHECK(b.abstain >= 5.0 * 0.05);
    CHECK_THROWS_AS(tuned_risk_bounds(0, 100, 0.05, 0.25, 0.05),
                    std::invalid_argument);
    CHECK_THROWS_AS(tuned_risk_bounds(100, 100, 0.05, 0.25, -1.0),
                    std::invalid_argument);
}

TEST_CASE("single-hypothesis selection bound") {
    CHECK(occam_bound(400, 100, 0.05, 0.1) ==
          doctest::Approx(0.23784867119002347).epsilon(1e-14));
    // more data can only tighten it, a bigger class can only loosen it
    CHECK(occam_bound(1600, 100, 0.05, 0.1) < occam_bound(400, 100, 0.05, 0.1));
    CHECK(occam_bound(400, 1000, 0.05, 0.1) > occam_bound(400, 100, 0.05, 0.1));
    CHECK_THROWS_AS(occam_bound(400, 0, 0.05, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(occam_bound(400, 100, 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(occam_bound(400, 100, 0.05, -0.1), std::invalid_argument);
}

TEST_CASE("deviation tail uniform over learning rates") {
    CHECK(uniform_deviation_tail(16, 0.5, 200) ==
          doctest::Approx(6.1608890456157444e-10).epsilon(1e-12));
    CHECK(uniform_log_ratio_deviation_tail(16, 0.5, 200) ==
          uniform_deviation_tail(16, 0.5, 200));
    CHECK_THROWS_AS(uniform_deviation_tail(1, 0.5, 200), std::invalid_argument);
    CHECK_THROWS_AS(uniform_deviation_tail(16, 0.0, 200), std::invalid_argument);
    CHECK_THROWS_AS(uniform_deviation_tail(16, 0.5, 0), std::invalid_argument);
}

TEST_CASE("mistake and abstain reports carry values, clamps, and flags") {
    auto [mistake, abstain] = mistake_and_abstain_bounds(10000, 100, 0.05, 0.25, 0.05);
    TunedRiskBounds t = tuned_risk_bounds(10000, 100, 0.05, 0.25, 0.05);

    CHECK(mistake.name == "mistake_bound");
    CHECK(mistake.value == doctest::Approx(t.sign_error + 0.05).epsilon(1e-14));
    CHECK(mistake.clamped == mistake.value);  // below 1, no clamping
    CHECK(mistake.valid);

    CHECK(abstain.name == "abstain_bound");
    CHECK(abstain.value == doctest::Approx(t.abstain).epsilon(1e-14));
    CHECK(abstain.clamped == 1.0);  // raw value exceeds 1
    CHECK_FALSE(abstain.valid);

    REQUIRE(mistake.inputs.size() == 5);
    CHECK(mistake.inputs[0].first == "m");
    CHECK(mistake.inputs[0].second == 10000.0);
    CHECK(mistake.inputs[4].first == "epsilon_star");
    CHECK(mistake.note == "asymptotic terms instantiated with explicit constants");
    CHECK(abstain.note == mistake.note);
}
