#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ewa/bounds.hpp"
#include "ewa/hypothesis_space.hpp"

namespace ewa {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Scenario names accepted by ExperimentConfig::scenario.
/// adversarial / favorable / stumps_noise run the comparison experiment,
/// abstention checks the half-width guarantee, concentration the deviation
/// tails, eta_uniformity the simultaneous-eta convergence.
const std::vector<std::string>& scenario_names();

struct ExperimentConfig {
    std::string scenario;
    int m = 200;
    int trials = 200;
    int test_points = 500;
    int workers = 1;
    std::optional<double> eta;    // empty = auto (sample-size tuned)
    std::optional<double> delta;  // empty = auto (abstention half-width); may be +inf
    double delta_conf = 0.05;
    double theta = 0.25;
    std::uint64_t master_seed = 1;

    // scenario parameters
    double epsilon = 0.05;  // adversarial noisy mass / 2
    int x2_size = 200;      // adversarial noisy-region atom count
    int class_size = 500;   // adversarial hypothesis count; favorable family size
    std::vector<double> lambda_grid;  // concentration levels; default 0.05 .. 0.5
    double lambda = 0.5;              // eta_uniformity grid coarseness
    int probe_atom = 0;               // concentration probe instance

    // optional explicit space/distribution, only for the generic scenarios
    std::string space_file;
    std::string distribution_file;
};

/// Strict JSON parse: unknown keys, bad types, and out-of-range values are
/// errors; an invalid scenario error lists the valid names.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::uint64_t trial);

struct TrialRow {
    int trial = 0;
    std::uint64_t seed = 0;
    double abstain_rate = 0.0;
    double mistake_rate = 0.0;
    double sign_disagreement_rate = 0.0;
    double correct_rate = 0.0;
    std::size_t erm_index = 0;
    double erm_error = 0.0;
    double probe_deviation = 0.0;  // concentration only
    bool has_probe = false;
    double sup_deviation = 0.0;  // eta_uniformity only
    bool has_sup = false;
};

struct LambdaRow {
    double lambda = 0.0;
    double threshold = 0.0;   // 2*lambda + eta/(8m)
    double tail_bound = 0.0;  // per-instance deviation tail
    double freq_plus = 0.0;   // probe-atom event frequency, s = +1
    double freq_minus = 0.0;
    double level = 0.0;  // paired deviation level
    double exceed_freq_plus = 0.0;   // trials whose measured tail mass > level
    double exceed_freq_minus = 0.0;
};

struct ExperimentReport {
    ExperimentConfig config;
    double eta = 0.0;    // resolved
    double delta = 0.0;  // resolved, may be +inf
    std::size_t hypothesis_count = 0;
    std::size_t atom_count = 0;

    double mean_abstain_rate = 0.0;
    double mean_mistake_rate = 0.0;
    double mean_sign_disagreement_rate = 0.0;
    double mean_correct_rate = 0.0;
    double mean_erm_error = 0.0;
    double frac_sign_disagreement_above_conf = 0.0;
    double best_hypothesis_true_error = 0.0;

    std::vector<TrialRow> trial_rows;
    std::vector<LambdaRow> lambda_rows;  // concentration
    std::vector<BoundReport> bound_values;
    std::vector<std::pair<std::string, double>> scenario_values;
};

// scenario constructions
std::pair<HypothesisSpace, DiscreteJointDistribution> build_adversarial(
    double epsilon, double eta, double delta, int x2_size, int class_size,
    std::uint64_t seed);
std::pair<HypothesisSpace, DiscreteJointDistribution> build_favorable(
    int class_size);
std::pair<HypothesisSpace, DiscreteJointDistribution> build_stumps_noise();

/// Runs the scenario named in the config. Bit-identical output for equal
/// config + master_seed at any worker count.
ExperimentReport run_experiment(const ExperimentConfig& config);

// scenario-checked wrappers over run_experiment
ExperimentReport run_concentration_experiment(const ExperimentConfig& config);
ExperimentReport run_abstention_experiment(const ExperimentConfig& config);
ExperimentReport run_comparison_experiment(const ExperimentConfig& config);
ExperimentReport run_eta_uniformity_experiment(const ExperimentConfig& config);

std::string report_to_json(const ExperimentReport& report);
/// One row per trial plus a final aggregate row; 17-significant-digit floats.
std::string report_to_csv(const ExperimentReport& report);
std::string manifest_json(const ExperimentReport& report,
                          const std::string& command_line,
                          const std::vector<std::string>& output_names);

/// Writes report.json, trials.csv, and manifest.json into out_dir (created
/// if absent). Returns the paths written.
std::vector<std::string> write_report_files(const ExperimentReport& report,
                                            const std::string& out_dir,
                                            const std::string& command_line);

}  // namespace ewa
