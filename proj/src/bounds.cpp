#include "ewa/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "ewa/averaging.hpp"

namespace ewa {

namespace {

void check_m(int m, const char* who) {
    if (m < 1) throw std::invalid_argument(std::string(who) + ": m must be >= 1");
}

void check_lambda(double lambda, const char* who) {
    if (!(lambda > 0.0)) {
        throw std::invalid_argument(std::string(who) + ": lambda must be positive");
    }
}

double clamp_probability(double v) { return v < 1.0 ? v : 1.0; }

}  // namespace

double deviation_tail(double lambda, int m) {
    check_m(m, "deviation_tail");
    check_lambda(lambda, "deviation_tail");
    return 2.0 * std::exp(-2.0 * lambda * lambda * static_cast<double>(m));
}

double deviation_level(double lambda, int m) {
    check_m(m, "deviation_level");
    check_lambda(lambda, "deviation_level");
    return std::sqrt(2.0) * std::exp(-lambda * lambda * static_cast<double>(m));
}

RiskBounds log_ratio_risk_bounds(double epsilon, double gamma, double eta,
                                 double delta, double effective_size) {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("risk bounds: epsilon must be >= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("risk bounds: gamma must be positive");
    if (!(eta > 0.0)) throw std::invalid_argument("risk bounds: eta must be positive");
    if (!(delta >= 0.0)) throw std::invalid_argument("risk bounds: delta must be >= 0");
    if (!(effective_size > 0.0)) {
        throw std::invalid_argument("risk bounds: effective class size must be positive");
    }
    RiskBounds b;
    b.weak_weight_cap = effective_size * std::exp(-eta * gamma);
    b.at_zero = 2.0 * (1.0 + 2.0 * b.weak_weight_cap) * (epsilon + gamma);
    b.at_two_delta = 4.0 *
                     (1.0 + 2.0 * effective_size * std::exp(eta * (2.0 * delta - gamma))) *
                     (epsilon + gamma);
    b.valid = (delta * eta <= 0.5) &&
              (gamma >= std::log(8.0 * effective_size) / eta);
    return b;
}

TunedRiskBounds tuned_risk_bounds(int m, std::size_t class_size, double conf,
                                  double theta, double epsilon) {
    check_m(m, "tuned_risk_bounds");
    if (!(epsilon >= 0.0)) {
        throw std::invalid_argument("tuned_risk_bounds: epsilon must be >= 0");
    }
    TunedParameters p = tuned_parameters(m, class_size, conf, theta);
    double md = static_cast<double>(m);
    double ln8n = std::log(8.0 * static_cast<double>(class_size));
    double mpow = std::pow(md, theta - 0.5);  // m^(theta - 1/2)

    TunedRiskBounds b;
    b.eta = p.eta;
    b.delta = p.delta;
    b.sign_error = (2.0 + 1.0 / (4.0 * md)) *
                   (epsilon + mpow + std::log(md) * mpow / ln8n);
    b.sign_error_active = m >= 8;
    b.abstain = 5.0 * (epsilon + 2.0 * p.delta + mpow);
    b.m_threshold = std::pow(
        8.0 * std::sqrt(std::log(std::sqrt(2.0) / conf)) * ln8n, 1.0 / theta);
    b.abstain_active = md >= b.m_threshold;
    return b;
}

double occam_bound(int m, std::size_t class_size, double conf,
                   double epsilon_star) {
    check_m(m, "occam_bound");
    if (class_size < 1) throw std::invalid_argument("occam_bound: empty class");
    if (!(conf > 0.0) || !(conf < 1.0)) {
        throw std::invalid_argument("occam_bound: conf must lie in (0, 1)");
    }
    if (!(epsilon_star >= 0.0)) {
        throw std::invalid_argument("occam_bound: epsilon_star must be >= 0");
    }
    return epsilon_star +
           std::sqrt(std::log(static_cast<double>(class_size) / conf) /
                     static_cast<double>(m));
}

double uniform_deviation_tail(std::size_t class_size, double lambda, int m) {
    check_m(m, "uniform_deviation_tail");
    check_lambda(lambda, "uniform_deviation_tail");
    if (class_size < 2) {
        throw std::invalid_argument("uniform_deviation_tail: class size must be >= 2");
    }
    double n = static_cast<double>(class_size);
    return (8.0 * std::log(n) / lambda) *
           std::exp(-lambda * lambda * static_cast<double>(m) / 2.0);
}

double uniform_log_ratio_deviation_tail(std::size_t class_size, double lambda,
                                        int m) {
    return uniform_deviation_tail(class_size, lambda, m);
}

std::pair<BoundReport, BoundReport> mistake_and_abstain_bounds(
    int m, std::size_t class_size, double conf, double theta,
    double epsilon_star) {
    TunedRiskBounds t = tuned_risk_bounds(m, class_size, conf, theta, epsilon_star);
    std::vector<std::pair<std::string, double>> inputs = {
        {"m", static_cast<double>(m)},
        {"class_size", static_cast<double>(class_size)},
        {"conf", conf},
        {"theta", theta},
        {"epsilon_star", epsilon_star},
    };
    BoundReport mistake;
    mistake.name = "mistake_bound";
    mistake.inputs = inputs;
    mistake.value = t.sign_error + conf;
    mistake.clamped = clamp_probability(mistake.value);
    mistake.valid = t.sign_error_active;
    mistake.note = "asymptotic terms instantiated with explicit constants";

    BoundReport abstain;
    abstain.name = "abstain_bound";
    abstain.inputs = inputs;
    abstain.value = t.abstain;
    abstain.clamped = clamp_probability(abstain.value);
    abstain.valid = t.abstain_active;
    abstain.note = "asymptotic terms instantiated with explicit constants";
    return {mistake, abstain};
}

}  // namespace ewa
