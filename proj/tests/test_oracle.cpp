#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "ewa/averaging.hpp"
#include "ewa/detail/numeric.hpp"
#include "ewa/hypothesis_space.hpp"
#include "ewa/oracle.hpp"

using namespace ewa;

namespace {

DiscreteJointDistribution two_atoms() {
    DiscreteJointDistribution d;
    d.atoms = {{{0.0}, 1, 0.25}, {{1.0}, -1, 0.75}};
    return d;
}

// three points, four sign patterns, uniform prior
HypothesisSpace small_space() {
    std::vector<Instance> pts = {{0.0}, {1.0}, {2.0}};
    return table_space(pts, {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}});
}

DiscreteJointDistribution three_atoms() {
    DiscreteJointDistribution d;
    d.atoms = {{{0.0}, 1, 0.5}, {{1.0}, -1, 0.3}, {{2.0}, 1, 0.2}};
    return d;
}

}  // namespace

TEST_CASE("sample enumeration: order, probabilities, materialization") {
    DiscreteJointDistribution d = two_atoms();
    SampleEnumerator e(d, 2);
    REQUIRE(e.count() == 4);

    std::vector<double> probs;
    std::vector<std::vector<std::uint32_t>> seen;
    e.for_each_indices([&](std::span<const std::uint32_t> digits, double p) {
        seen.emplace_back(digits.begin(), digits.end());
        probs.push_back(p);
    });
    REQUIRE(seen.size() == 4);
    CHECK(seen[0] == std::vector<std::uint32_t>{0, 0});
    CHECK(seen[1] == std::vector<std::uint32_t>{0, 1});
    CHECK(seen[2] == std::vector<std::uint32_t>{1, 0});
    CHECK(seen[3] == std::vector<std::uint32_t>{1, 1});
    CHECK(probs[0] == doctest::Approx(0.0625).epsilon(1e-15));
    CHECK(probs[1] == doctest::Approx(0.1875).epsilon(1e-15));
    CHECK(probs[2] == doctest::Approx(0.1875).epsilon(1e-15));
    CHECK(probs[3] == doctest::Approx(0.5625).epsilon(1e-15));

    Sample s = e.materialize(seen[1]);
    REQUIRE(s.size() == 2);
    CHECK(s.examples[0].x[0] == 0.0);
    CHECK(s.examples[0].label == 1);
    CHECK(s.examples[1].x[0] == 1.0);
    CHECK(s.examples[1].label == -1);

    // partial ranges concatenate to the full pass
    std::vector<double> split;
    e.for_each_indices(0, 2, [&](std::span<const std::uint32_t>, double p) {
        split.push_back(p);
    });
    e.for_each_indices(2, 4, [&](std::span<const std::uint32_t>, double p) {
        split.push_back(p);
    });
    CHECK(split == probs);
}

TEST_CASE("sample enumeration: totals and degenerate cases") {
    DiscreteJointDistribution d = three_atoms();
    SampleEnumerator e(d, 4);
    CHECK(e.count() == 81);
    detail::CompensatedSum total;
    e.for_each_indices([&](std::span<const std::uint32_t>, double p) { total.add(p); });
    CHECK(total.value() == doctest::Approx(1.0).epsilon(1e-12));

    DiscreteJointDistribution one;
    one.atoms = {{{3.0}, -1, 1.0}};
    SampleEnumerator single(one, 3);
    CHECK(single.count() == 1);
    int calls = 0;
    single.for_each([&](const Sample& s, double p) {
        ++calls;
        CHECK(p == 1.0);
        REQUIRE(s.size() == 3);
        CHECK(s.examples[2].label == -1);
    });
    CHECK(calls == 1);
}

TEST_CASE("sample enumeration refuses oversized spaces by name") {
    DiscreteJointDistribution d = three_atoms();
    CHECK_THROWS_WITH_AS(SampleEnumerator(d, 3, EnumerationBudget{10}),
                         doctest::Contains("exceeds"), std::invalid_argument);
    CHECK_THROWS_AS(SampleEnumerator(d, 40), std::invalid_argument);
    CHECK_THROWS_AS(SampleEnumerator(d, 0), std::invalid_argument);
}

TEST_CASE("side subsets split the class at an instance") {
    HypothesisSpace s = small_space();
    std::vector<std::size_t> plus = side_subset(s, {1.0}, 1);
    std::vector<std::size_t> minus = side_subset(s, {1.0}, -1);
    CHECK(plus == std::vector<std::size_t>{0, 2});
    CHECK(minus == std::vector<std::size_t>{1, 3});
    CHECK_THROWS_AS(side_subset(s, {1.0}, 0), std::invalid_argument);
}

TEST_CASE("expected log partition sits in the sandwich band") {
    HypothesisSpace s = small_space();
    DiscreteJointDistribution d = three_atoms();
    std::vector<double> true_errs(s.size());
    for (std::size_t h = 0; h < s.size(); ++h) true_errs[h] = true_error(s, h, d);

    std::vector<std::size_t> all = {0, 1, 2, 3};
    for (double eta : {0.5, 1.0, 4.0, 16.0}) {
        for (int m : {1, 2, 4, 6}) {
            double lower = log_partition(true_errs, s.prior_weights(), eta);
            double expect = exact_expected_log_partition(s, d, eta, m, all);
            CHECK(expect >= lower - 1e-9);
            CHECK(expect <= lower + eta / (8.0 * m) + 1e-9);
        }
    }

    // restricted subsets obey the same band over renormalized weights
    std::vector<std::size_t> sub = side_subset(s, {0.0}, 1);
    std::vector<double> sub_errs, sub_w;
    for (std::size_t h : sub) {
        sub_errs.push_back(true_errs[h]);
        sub_w.push_back(s.prior_weights()[h]);
    }
    double lower = log_partition(sub_errs, sub_w, 2.0);
    double expect = exact_expected_log_partition(s, d, 2.0, 3, sub);
    CHECK(expect >= lower - 1e-9);
    CHECK(expect <= lower + 2.0 / 24.0 + 1e-9);

    CHECK_THROWS_AS(exact_expected_log_partition(s, d, 1.0, 2, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(exact_expected_log_partition(s, d, 1.0, 2, {9}),
                    std::invalid_argument);
}

TEST_CASE("worker count never changes exact results") {
    HypothesisSpace s = small_space();
    DiscreteJointDistribution d = three_atoms();
    std::vector<std::size_t> all = {0, 1, 2, 3};
    double e1 = exact_expected_log_partition(s, d, 3.0, 6, all, {}, 1);
    double e3 = exact_expected_log_partition(s, d, 3.0, 6, all, {}, 3);
    double e8 = exact_expected_log_partition(s, d, 3.0, 6, all, {}, 8);
    CHECK(e1 == e3);
    CHECK(e1 == e8);

    std::vector<double> thr = {0.05, 0.2, 0.5, 1.0};
    for (int sign : {1, -1}) {
        std::vector<double> p1 =
            exact_deviation_probabilities(s, d, 2.0, {1.0}, 5, sign, thr, {}, 1);
        std::vector<double> p4 =
            exact_deviation_probabilities(s, d, 2.0, {1.0}, 5, sign, thr, {}, 4);
        REQUIRE(p1.size() == thr.size());
        CHECK(p1 == p4);
        for (double p : p1) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
}

TEST_CASE("deviation probabilities: degenerate and validated inputs") {
    HypothesisSpace s = small_space();
    DiscreteJointDistribution one;
    one.atoms = {{{0.0}, 1, 1.0}};
    // a one-atom distribution admits a single sample, so there is no deviation
    for (int sign : {1, -1}) {
        double p = exact_deviation_probability(s, one, 1.0, {0.0}, 4, sign, 1e-9);
        CHECK(p == 0.0);
    }
    CHECK(exact_deviation_probability(s, one, 1.0, {0.0}, 4, 1, 0.0) == 1.0);

    DiscreteJointDistribution d = three_atoms();
    CHECK_THROWS_AS(
        exact_deviation_probability(s, d, 1.0, {0.0}, 2, 0, 0.1),
        std::invalid_argument);
    std::vector<double> none;
    CHECK(exact_deviation_probabilities(s, d, 1.0, {0.0}, 2, 1, none).empty());
}

TEST_CASE("per-tuple log ratio distribution matches direct evaluation") {
    HypothesisSpace s = small_space();
    DiscreteJointDistribution d = three_atoms();
    const Instance x = {2.0};
    const double eta = 1.7;
    auto rows = exact_log_ratio_distribution(s, d, eta, x, 3);
    SampleEnumerator e(d, 3);
    REQUIRE(rows.size() == e.count());
    std::size_t i = 0;
    e.for_each([&](const Sample& sample, double p) {
        LogRatioResult r = empirical_log_ratio(s, sample, eta, x);
        CHECK(rows[i].first == r.value);
        CHECK(rows[i].second == p);
        ++i;
    });
    detail::CompensatedSum mass;
    for (const auto& row : rows) mass.add(row.second);
    CHECK(mass.value() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("naive log ratio agrees with the shifted computation") {
    std::mt19937_64 eng(42);
    std::vector<Instance> pts = {{0.0}, {1.0}, {2.0}, {3.0}};
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<std::int8_t>> rows(3 + eng() % 6);
        for (auto& row : rows) {
            row.resize(pts.size());
            for (auto& v : row) v = (eng() & 1) ? 1 : -1;
        }
        // force both sides at the probe point
        rows[0][1] = 1;
        rows[1][1] = -1;
        HypothesisSpace s = table_space(pts, rows);
        Sample sample;
        int m = 2 + static_cast<int>(eng() % 8);
        for (int j = 0; j < m; ++j) {
            sample.examples.push_back(
                {pts[eng() % pts.size()], (eng() & 1) ? 1 : -1});
        }
        double eta = std::exp(5.0 * detail::uniform01(eng));
        LogRatioResult fast = empirical_log_ratio(s, sample, eta, {1.0});
        LogRatioResult slow = naive_log_ratio(s, sample, eta, {1.0});
        CHECK(std::abs(fast.value - slow.value) <= 1e-10);
    }
}

TEST_CASE("naive log ratio refuses ranges that would underflow") {
    std::vector<Instance> pts = {{0.0}};
    HypothesisSpace s = table_space(pts, {{1}, {-1}});
    Sample sample{{{{0.0}, -1}}};  // the +1 hypothesis errs on everything
    CHECK_THROWS_WITH_AS(naive_log_ratio(s, sample, 800.0, {0.0}),
                         doctest::Contains("underflow"), std::domain_error);
    CHECK_NOTHROW(naive_log_ratio(s, sample, 600.0, {0.0}));
    CHECK_THROWS_AS(naive_log_ratio(s, sample, 0.0, {0.0}),
                    std::invalid_argument);
}
