#include "ewa/averaging.hpp"

#include <algorithm>
#include <string>

namespace ewa {

using detail_averaging::kInf;

double log_partition(std::span<const double> errors,
                     std::span<const double> weights, double eta) {
    if (errors.size() != weights.size()) {
        throw std::invalid_argument("log_partition: errors and weights differ in length");
    }
    if (!(eta > 0.0)) throw std::invalid_argument("log_partition: eta must be positive");
    double emin = kInf;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (weights[i] < 0.0) throw std::invalid_argument("log_partition: negative weight");
        if (weights[i] > 0.0 && errors[i] < emin) emin = errors[i];
    }
    if (emin == kInf) return -kInf;  // no positive weight anywhere
    double sum = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (weights[i] == 0.0) continue;
        sum += weights[i] * std::exp(-eta * (errors[i] - emin));
    }
    return std::log(sum) / eta - emin;
}

LogRatioResult empirical_log_ratio(const HypothesisSpace& space,
                                   const Sample& sample, double eta,
                                   const Instance& x) {
    std::vector<double> errs = empirical_errors(space, sample);
    return log_ratio_partitioned(
        errs, space.prior_weights(), eta,
        [&](std::size_t h) { return space.predict(h, x); });
}

LogRatioResult true_log_ratio(const HypothesisSpace& space,
                              const DiscreteJointDistribution& dist,
                              double eta, const Instance& x) {
    std::vector<double> errs = true_errors(space, dist);
    return log_ratio_partitioned(
        errs, space.prior_weights(), eta,
        [&](std::size_t h) { return space.predict(h, x); });
}

double log_ratio_deviation(const LogRatioResult& a, const LogRatioResult& b) {
    auto side_diff = [](double x, double y) {
        if (x == -kInf && y == -kInf) return 0.0;
        if (x == -kInf || y == -kInf) {
            throw std::domain_error(
                "log ratio deviation: sides are empty in one operand only");
        }
        return x - y;
    };
    return side_diff(a.log_weight_plus, b.log_weight_plus) -
           side_diff(a.log_weight_minus, b.log_weight_minus);
}

int predict(double log_ratio, double delta) {
    if (!(delta >= 0.0)) throw std::invalid_argument("predict: delta must be >= 0");
    if (log_ratio > delta) return 1;
    if (log_ratio < -delta) return -1;
    return 0;
}

int predict(const LogRatioResult& r, double delta) { return predict(r.value, delta); }

double abstention_halfwidth(int m, double conf, double eta) {
    if (m < 1) throw std::invalid_argument("abstention_halfwidth: m must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("abstention_halfwidth: eta must be positive");
    if (!(conf > 0.0) || !(conf < std::sqrt(2.0))) {
        throw std::invalid_argument(
            "abstention_halfwidth: conf must lie in (0, sqrt(2))");
    }
    double md = static_cast<double>(m);
    return 2.0 * std::sqrt(std::log(std::sqrt(2.0) / conf) / md) + eta / (8.0 * md);
}

TunedParameters tuned_parameters(int m, std::size_t class_size, double conf,
                                 double theta) {
    if (m < 1) throw std::invalid_argument("tuned_parameters: m must be >= 1");
    if (class_size < 1) throw std::invalid_argument("tuned_parameters: empty class");
    if (!(theta > 0.0) || !(theta < 0.5)) {
        throw std::invalid_argument("tuned_parameters: theta must lie in (0, 1/2)");
    }
    if (!(conf > 0.0) || !(conf < std::sqrt(2.0))) {
        throw std::invalid_argument("tuned_parameters: conf must lie in (0, sqrt(2))");
    }
    double md = static_cast<double>(m);
    double ln8n = std::log(8.0 * static_cast<double>(class_size));
    TunedParameters p;
    p.eta = ln8n * std::pow(md, 0.5 - theta);
    p.delta = 2.0 * std::sqrt(std::log(std::sqrt(2.0) / conf) / md) +
              ln8n / (8.0 * std::pow(md, 0.5 + theta));
    return p;
}

double uniform_abstention_halfwidth(int m, std::size_t class_size, double conf,
                                    double eta) {
    if (m < 1) throw std::invalid_argument("uniform_abstention_halfwidth: m must be >= 1");
    if (class_size < 2) {
        throw std::invalid_argument(
            "uniform_abstention_halfwidth: class size must be >= 2");
    }
    if (!(eta >= 1.0)) {
        throw std::invalid_argument("uniform_abstention_halfwidth: eta must be >= 1");
    }
    if (!(conf > 0.0) || !(conf < 1.0)) {
        throw std::invalid_argument("uniform_abstention_halfwidth: conf must lie in (0, 1)");
    }
    double md = static_cast<double>(m);
    double arg = 16.0 * md * std::log(static_cast<double>(class_size)) / (conf * conf);
    if (!(arg > 1.0)) {
        throw std::invalid_argument(
            "uniform_abstention_halfwidth: log argument must exceed 1");
    }
    return 2.0 * std::sqrt((2.0 / md) * std::log(arg)) + eta / md;
}

std::vector<double> learning_rate_grid(std::size_t class_size, double lambda) {
    if (class_size < 2) {
        throw std::invalid_argument("learning_rate_grid: class size must be >= 2");
    }
    if (!(lambda > 0.0)) {
        throw std::invalid_argument("learning_rate_grid: lambda must be positive");
    }
    double top = 4.0 * std::log(static_cast<double>(class_size));
    auto count = static_cast<long long>(std::floor(top / lambda));
    std::vector<double> grid;
    grid.reserve(count > 0 ? static_cast<std::size_t>(count) : 0);
    for (long long i = 1; i <= count; ++i) {
        grid.push_back(top / (static_cast<double>(i) * lambda));
    }
    return grid;
}

ErmChoice erm_predict(const HypothesisSpace& space, const Sample& sample,
                      const Instance& x) {
    std::vector<double> errs = empirical_errors(space, sample);
    std::size_t best = 0;
    for (std::size_t h = 1; h < errs.size(); ++h) {
        if (errs[h] < errs[best]) best = h;  // strict keeps the lowest index on ties
    }
    ErmChoice c;
    c.index = best;
    c.empirical_error = errs[best];
    c.prediction = space.predict(best, x);
    return c;
}

}  // namespace ewa
