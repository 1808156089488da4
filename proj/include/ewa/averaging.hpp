#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "ewa/hypothesis_space.hpp"

namespace ewa {

struct WeightConfig {
    double eta = 1.0;    // > 0, inverse-temperature of the error weighting
    double delta = 0.0;  // >= 0, abstention half-width
};

/// Weighted log ratio at one instance. value is
/// (1/eta) * ln(W+ / W-) where W+- sums weight * exp(-eta * error) over the
/// hypotheses voting +1 resp. -1. A side with no weight makes its
/// log-partition -inf and pushes value to the opposite infinity; both sides
/// cannot be empty because the space is nonempty.
struct LogRatioResult {
    double value = 0.0;
    double log_weight_plus = 0.0;   // (1/eta) ln W+
    double log_weight_minus = 0.0;  // (1/eta) ln W-
};

/// (1/eta) * ln( sum_i weights[i] * exp(-eta * errors[i]) ), computed with a
/// max-shifted exponential sum so it stays finite for eta up to 1e6 and
/// beyond. Returns -inf when no entry has positive weight. Summation runs in
/// index order, which makes the result deterministic.
double log_partition(std::span<const double> errors,
                     std::span<const double> weights, double eta);

namespace detail_averaging {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

/// Core of every log-ratio computation: errors/weights indexed by hypothesis,
/// side_of(h) > 0 puts hypothesis h on the +1 side. Both per-side
/// log-partitions use the same shifted summation as log_partition.
template <class SideFn>
LogRatioResult log_ratio_partitioned(std::span<const double> errors,
                                     std::span<const double> weights,
                                     double eta, SideFn&& side_of) {
    using detail_averaging::kInf;
    if (errors.size() != weights.size()) {
        throw std::invalid_argument("log ratio: errors and weights differ in length");
    }
    if (errors.empty()) throw std::invalid_argument("log ratio: empty hypothesis list");
    if (!(eta > 0.0)) throw std::invalid_argument("log ratio: eta must be positive");

    double emin[2] = {kInf, kInf};  // [0] = minus side, [1] = plus side
    for (std::size_t i = 0; i < errors.size(); ++i) {
        double w = weights[i];
        if (w < 0.0) throw std::invalid_argument("log ratio: negative weight");
        if (w == 0.0) continue;
        int s = side_of(i) > 0 ? 1 : 0;
        if (errors[i] < emin[s]) emin[s] = errors[i];
    }
    double sum[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < errors.size(); ++i) {
        double w = weights[i];
        if (w == 0.0) continue;
        int s = side_of(i) > 0 ? 1 : 0;
        sum[s] += w * std::exp(-eta * (errors[i] - emin[s]));
    }
    auto side_log = [&](int s) {
        return sum[s] > 0.0 ? std::log(sum[s]) / eta - emin[s] : -kInf;
    };
    LogRatioResult r;
    r.log_weight_plus = side_log(1);
    r.log_weight_minus = side_log(0);
    if (r.log_weight_plus == -kInf && r.log_weight_minus == -kInf) {
        throw std::domain_error("log ratio: no weight on either side");
    }
    if (r.log_weight_plus == -kInf) {
        r.value = -kInf;
    } else if (r.log_weight_minus == -kInf) {
        r.value = kInf;
    } else {
        r.value = r.log_weight_plus - r.log_weight_minus;
    }
    return r;
}

/// Log ratio of the empirical-error weighting at x, prior-weighted.
LogRatioResult empirical_log_ratio(const HypothesisSpace& space,
                                   const Sample& sample, double eta,
                                   const Instance& x);

/// Log ratio of the true-error weighting at x, prior-weighted.
LogRatioResult true_log_ratio(const HypothesisSpace& space,
                              const DiscreteJointDistribution& dist,
                              double eta, const Instance& x);

/// Difference a.value - b.value evaluated side by side, so structurally
/// empty sides (both -inf) cancel to 0 and the result is always finite for
/// log ratios of the same space at the same instance.
double log_ratio_deviation(const LogRatioResult& a, const LogRatioResult& b);

/// Abstaining prediction: sign of the log ratio when it clears the band,
/// 0 when |log_ratio| <= delta. delta = +inf abstains everywhere.
int predict(double log_ratio, double delta);
int predict(const LogRatioResult& r, double delta);

/// Abstention half-width that makes nonzero predictions track the sign of
/// the true log ratio with confidence 1 - conf:
/// 2 sqrt(ln(sqrt(2)/conf) / m) + eta / (8m). Requires 0 < conf < sqrt(2).
double abstention_halfwidth(int m, double conf, double eta);

struct TunedParameters {
    double eta;
    double delta;
};

/// Sample-size driven choice eta = ln(8N) * m^(1/2 - theta) and the matching
/// abstention half-width 2 sqrt(ln(sqrt(2)/conf)/m) + ln(8N) / (8 m^(1/2+theta)).
/// Requires theta in (0, 1/2).
TunedParameters tuned_parameters(int m, std::size_t class_size, double conf,
                                 double theta);

/// Half-width valid for every eta >= 1 simultaneously:
/// 2 sqrt((2/m) ln(16 m ln(N) / conf^2)) + eta/m. Requires N >= 2, eta >= 1,
/// and the log argument to exceed 1.
double uniform_abstention_halfwidth(int m, std::size_t class_size, double conf,
                                    double eta);

/// Decreasing grid {4 ln(N) / (i * lambda) : i = 1 .. floor(4 ln(N)/lambda)}.
/// Every eta >= 1 has a grid point eta_hat with
/// |1/eta - 1/eta_hat| * ln(N) <= lambda/4. Empty when lambda > 4 ln(N).
std::vector<double> learning_rate_grid(std::size_t class_size, double lambda);

struct ErmChoice {
    std::size_t index = 0;        // lowest index among empirical minimizers
    double empirical_error = 0.0;
    int prediction = 0;
};

/// Empirical risk minimization baseline: lowest-index minimizer of the
/// empirical error, evaluated at x.
ErmChoice erm_predict(const HypothesisSpace& space, const Sample& sample,
                      const Instance& x);

}  // namespace ewa
