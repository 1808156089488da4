#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace ewa {

/// One evaluated bound, kept alongside the inputs that produced it. value is
/// the raw formula output in [0, inf); clamped caps probability-valued
/// bounds at 1 for comparison against measured rates. valid records whether
/// the preconditions of the underlying statement held; the value is still
/// reported when they did not.
struct BoundReport {
    std::string name;
    std::vector<std::pair<std::string, double>> inputs;
    double value = 0.0;
    double clamped = 0.0;
    bool valid = true;
    std::string note;
};

/// Tail bound 2 exp(-2 lambda^2 m) on the probability that the empirical
/// log ratio at a fixed instance deviates from the true one by more than
/// 2 lambda + eta/(8m) in a given direction.
double deviation_tail(double lambda, int m);

/// Level sqrt(2) exp(-lambda^2 m): with probability at least 1 - level over
/// the sample, the instance mass with log-ratio deviation beyond
/// 2 lambda + eta/(8m) is below this same level.
double deviation_level(double lambda, int m);

/// Risk bounds for the true-log-ratio predictor in terms of the mass epsilon
/// of hypotheses with error below epsilon + gamma. effective_size is the
/// class size |H|, or 1/V for a prior putting mass V on that set.
///   at_zero:      2 (1 + 2 K e^(-eta gamma)) (epsilon + gamma)
///   at_two_delta: 4 (1 + 2 K e^(eta (2 delta - gamma))) (epsilon + gamma)
/// Valid requires delta * eta <= 1/2 and gamma >= ln(8K)/eta, which caps the
/// weak-hypothesis weight K e^(-eta gamma) at 1/8.
struct RiskBounds {
    double at_zero = 0.0;
    double at_two_delta = 0.0;
    double weak_weight_cap = 0.0;  // K e^(-eta gamma)
    bool valid = true;
};
RiskBounds log_ratio_risk_bounds(double epsilon, double gamma, double eta,
                                 double delta, double effective_size);

/// The risk bounds specialized to the tuned eta/delta choice, with every
/// asymptotic term instantiated at explicit constants.
///   sign_error: (2 + 1/(4m)) (eps + m^(theta-1/2) + ln(m) m^(theta-1/2)/ln(8N)),
///               stated for m >= 8
///   abstain:    5 (eps + 2 delta + m^(theta-1/2)),
///               stated for m >= (8 sqrt(ln(sqrt(2)/conf)) ln(8N))^(1/theta)
struct TunedRiskBounds {
    double sign_error = 0.0;
    bool sign_error_active = false;  // m reached the stated regime
    double abstain = 0.0;
    bool abstain_active = false;
    double m_threshold = 0.0;  // smallest m where the abstain form is stated
    double eta = 0.0;
    double delta = 0.0;
};
TunedRiskBounds tuned_risk_bounds(int m, std::size_t class_size, double conf,
                                  double theta, double epsilon);

/// Single-hypothesis selection baseline:
/// epsilon_star + sqrt(ln(N / conf) / m).
double occam_bound(int m, std::size_t class_size, double conf,
                   double epsilon_star);

/// Tail bound (8 ln(N) / lambda) exp(-lambda^2 m / 2) on a log-partition
/// deviation of lambda holding simultaneously for every eta >= 1 over a
/// class of size N.
double uniform_deviation_tail(std::size_t class_size, double lambda, int m);

/// Same tail read for the log ratio (two log-partitions, one per side).
double uniform_log_ratio_deviation_tail(std::size_t class_size, double lambda,
                                        int m);

/// Mistake and abstention summaries at the tuned parameters: mistake adds
/// the confidence term conf to the tuned sign_error bound, abstain is the
/// tuned abstain bound. Both carry their inputs and validity flags.
std::pair<BoundReport, BoundReport> mistake_and_abstain_bounds(
    int m, std::size_t class_size, double conf, double theta,
    double epsilon_star);

}  // namespace ewa
