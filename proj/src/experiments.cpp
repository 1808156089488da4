#include "ewa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "ewa/averaging.hpp"
#include "ewa/detail/numeric.hpp"
#include "ewa/oracle.hpp"

namespace ewa {

namespace {

using nlohmann::json;
using detail::CompensatedSum;
using detail::fmt_double;
using detail::splitmix64;
using detail::uniform01;

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ScenarioKind { Adversarial, Favorable, StumpsNoise, Abstention, Concentration, EtaUniformity };

ScenarioKind scenario_kind(const std::string& name) {
    if (name == "adversarial") return ScenarioKind::Adversarial;
    if (name == "favorable") return ScenarioKind::Favorable;
    if (name == "stumps_noise") return ScenarioKind::StumpsNoise;
    if (name == "abstention") return ScenarioKind::Abstention;
    if (name == "concentration") return ScenarioKind::Concentration;
    if (name == "eta_uniformity") return ScenarioKind::EtaUniformity;
    std::string msg = "unknown scenario '" + name + "'; valid scenarios:";
    for (const auto& s : scenario_names()) msg += " " + s;
    throw std::invalid_argument(msg);
}

bool is_comparison(ScenarioKind k) {
    return k == ScenarioKind::Adversarial || k == ScenarioKind::Favorable ||
           k == ScenarioKind::StumpsNoise;
}

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Everything fixed before the first trial. Prediction and mistake tables are
// cached per atom so trials reduce to counting.
struct ScenarioData {
    ScenarioKind kind;
    HypothesisSpace space;
    DiscreteJointDistribution dist;
    std::vector<Instance> atom_instances;
    PredictionMatrix preds;          // hypothesis x atom
    std::vector<std::int8_t> wrong;  // hypothesis x atom, 1 = mislabels
    std::vector<double> true_errs;
    std::vector<double> cum;  // inclusive prefix probabilities, back() == 1
    std::size_t best_index = 0;
    double best_true_error = 0.0;
    std::size_t a2_begin = 0;  // adversarial: first noisy atom index

    ScenarioData(ScenarioKind k, HypothesisSpace s, DiscreteJointDistribution d)
        : kind(k), space(std::move(s)), dist(std::move(d)) {}
};

void finish_scenario(ScenarioData& sc) {
    const std::size_t k = sc.dist.atoms.size();
    const std::size_t n = sc.space.size();
    sc.atom_instances.reserve(k);
    for (const auto& a : sc.dist.atoms) sc.atom_instances.push_back(a.x);
    sc.preds = prediction_matrix(sc.space, sc.atom_instances);
    sc.wrong.resize(n * k);
    sc.true_errs.assign(n, 0.0);
    for (std::size_t h = 0; h < n; ++h) {
        CompensatedSum err;
        for (std::size_t a = 0; a < k; ++a) {
            int w = sc.preds.at(h, a) != sc.dist.atoms[a].label ? 1 : 0;
            sc.wrong[h * k + a] = static_cast<std::int8_t>(w);
            if (w) err.add(sc.dist.atoms[a].probability);
        }
        sc.true_errs[h] = err.value();
    }
    sc.cum.resize(k);
    double run = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        run += sc.dist.atoms[a].probability;
        sc.cum[a] = run;
    }
    sc.cum[k - 1] = 1.0;
    sc.best_index = 0;
    for (std::size_t h = 1; h < n; ++h) {
        if (sc.true_errs[h] < sc.true_errs[sc.best_index]) sc.best_index = h;
    }
    sc.best_true_error = sc.true_errs[sc.best_index];
}

std::size_t pick_atom(const std::vector<double>& cum, double u) {
    return static_cast<std::size_t>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
}

std::uint64_t scenario_seed(std::uint64_t master) {
    return splitmix64(master ^ 0xA5A5A5A5A5A5A5A5ull);
}

std::uint64_t calibration_seed(std::uint64_t master) {
    return splitmix64(master ^ 0x0DDC0FFEE0DDF00Dull);
}

bool enumerable_within(std::size_t atoms, int m, std::uint64_t budget) {
    std::uint64_t c = 1;
    for (int j = 0; j < m; ++j) {
        if (c > budget / atoms) return false;
        c *= atoms;
    }
    return true;
}

// ---- config parsing ----

int get_positive_int(const json& v, const char* key) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw std::runtime_error(std::string("config key '") + key + "' must be an integer");
    }
    std::int64_t x = v.get<std::int64_t>();
    if (x < 1 || x > std::numeric_limits<int>::max()) {
        throw std::runtime_error(std::string("config key '") + key + "' must be a positive integer");
    }
    return static_cast<int>(x);
}

double get_real(const json& v, const char* key) {
    if (!v.is_number()) {
        throw std::runtime_error(std::string("config key '") + key + "' must be a number");
    }
    return v.get<double>();
}

std::string get_string(const json& v, const char* key) {
    if (!v.is_string()) {
        throw std::runtime_error(std::string("config key '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

void validate_config(const ExperimentConfig& cfg) {
    scenario_kind(cfg.scenario);
    ScenarioKind kind = scenario_kind(cfg.scenario);
    if (cfg.m < 1) throw std::runtime_error("config: m must be >= 1");
    if (cfg.trials < 1) throw std::runtime_error("config: trials must be >= 1");
    if (cfg.test_points < 1) throw std::runtime_error("config: test_points must be >= 1");
    if (cfg.workers < 1) throw std::runtime_error("config: workers must be >= 1");
    if (!(cfg.delta_conf > 0.0 && cfg.delta_conf < 1.0)) {
        throw std::runtime_error("config: delta_conf must lie in (0, 1)");
    }
    if (!(cfg.theta > 0.0 && cfg.theta < 0.5)) {
        throw std::runtime_error("config: theta must lie in (0, 1/2)");
    }
    if (cfg.eta && !(*cfg.eta > 0.0)) throw std::runtime_error("config: eta must be positive");
    if (cfg.delta && !(*cfg.delta >= 0.0)) throw std::runtime_error("config: delta must be nonnegative");
    if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 0.25)) {
        throw std::runtime_error("config: epsilon must lie in [0, 1/4)");
    }
    if (cfg.x2_size < 1) throw std::runtime_error("config: x2_size must be >= 1");
    if (cfg.class_size < 1) throw std::runtime_error("config: class_size must be >= 1");
    if (!(cfg.lambda > 0.0)) throw std::runtime_error("config: lambda must be positive");
    if (cfg.probe_atom < 0) throw std::runtime_error("config: probe_atom must be >= 0");
    for (double l : cfg.lambda_grid) {
        if (!(l > 0.0)) throw std::runtime_error("config: lambda_grid entries must be positive");
    }
    if (cfg.space_file.empty() != cfg.distribution_file.empty()) {
        throw std::runtime_error("config: space_file and distribution_file must be given together");
    }
    if (!cfg.space_file.empty() && is_comparison(kind)) {
        throw std::runtime_error("config: scenario '" + cfg.scenario +
                                 "' builds its own space; space_file is not accepted");
    }
}

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["scenario"] = cfg.scenario;
    j["m"] = cfg.m;
    j["trials"] = cfg.trials;
    j["test_points"] = cfg.test_points;
    j["workers"] = cfg.workers;
    if (cfg.eta) {
        j["eta"] = *cfg.eta;
    } else {
        j["eta"] = "auto";
    }
    if (cfg.delta) {
        if (std::isinf(*cfg.delta)) {
            j["delta"] = "+inf";
        } else {
            j["delta"] = *cfg.delta;
        }
    } else {
        j["delta"] = "auto";
    }
    j["delta_conf"] = cfg.delta_conf;
    j["theta"] = cfg.theta;
    j["master_seed"] = cfg.master_seed;
    j["epsilon"] = cfg.epsilon;
    j["x2_size"] = cfg.x2_size;
    j["class_size"] = cfg.class_size;
    j["lambda_grid"] = cfg.lambda_grid;
    j["lambda"] = cfg.lambda;
    j["probe_atom"] = cfg.probe_atom;
    j["space_file"] = cfg.space_file;
    j["distribution_file"] = cfg.distribution_file;
    return j;
}

json json_number(double v) {
    if (std::isinf(v)) return json(v > 0 ? "+inf" : "-inf");
    return json(v);
}

json bound_to_json(const BoundReport& b) {
    json j;
    j["name"] = b.name;
    json in;
    for (const auto& [k, v] : b.inputs) in[k] = json_number(v);
    j["inputs"] = in;
    j["value"] = json_number(b.value);
    j["clamped"] = json_number(b.clamped);
    j["valid"] = b.valid;
    j["note"] = b.note;
    return j;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {
        "adversarial", "favorable",     "stumps_noise",
        "abstention",  "concentration", "eta_uniformity"};
    return names;
}

std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::uint64_t trial) {
    return splitmix64(splitmix64(master_seed) + trial);
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse: ") + e.what());
    }
    if (!root.is_object()) throw std::runtime_error("config parse: top level must be an object");

    ExperimentConfig cfg;
    bool saw_scenario = false;
    for (const auto& [key, value] : root.items()) {
        if (key == "scenario") {
            cfg.scenario = get_string(value, "scenario");
            saw_scenario = true;
        } else if (key == "m") {
            cfg.m = get_positive_int(value, "m");
        } else if (key == "trials") {
            cfg.trials = get_positive_int(value, "trials");
        } else if (key == "test_points") {
            cfg.test_points = get_positive_int(value, "test_points");
        } else if (key == "workers") {
            cfg.workers = get_positive_int(value, "workers");
        } else if (key == "eta") {
            if (value.is_string()) {
                if (value.get<std::string>() != "auto") {
                    throw std::runtime_error("config key 'eta' must be a positive number or \"auto\"");
                }
                cfg.eta.reset();
            } else {
                cfg.eta = get_real(value, "eta");
            }
        } else if (key == "delta") {
            if (value.is_string()) {
                std::string s = value.get<std::string>();
                if (s == "auto") {
                    cfg.delta.reset();
                } else if (s == "inf" || s == "+inf") {
                    cfg.delta = kInf;
                } else {
                    throw std::runtime_error(
                        "config key 'delta' must be a nonnegative number, \"auto\", or \"inf\"");
                }
            } else {
                cfg.delta = get_real(value, "delta");
            }
        } else if (key == "delta_conf") {
            cfg.delta_conf = get_real(value, "delta_conf");
        } else if (key == "theta") {
            cfg.theta = get_real(value, "theta");
        } else if (key == "master_seed") {
            if (!value.is_number_integer() && !value.is_number_unsigned()) {
                throw std::runtime_error("config key 'master_seed' must be an integer");
            }
            if (value.is_number_integer() && value.get<std::int64_t>() < 0) {
                throw std::runtime_error("config key 'master_seed' must be nonnegative");
            }
            cfg.master_seed = value.get<std::uint64_t>();
        } else if (key == "epsilon") {
            cfg.epsilon = get_real(value, "epsilon");
        } else if (key == "x2_size") {
            cfg.x2_size = get_positive_int(value, "x2_size");
        } else if (key == "class_size") {
            cfg.class_size = get_positive_int(value, "class_size");
        } else if (key == "lambda_grid") {
            if (!value.is_array()) throw std::runtime_error("config key 'lambda_grid' must be an array");
            cfg.lambda_grid.clear();
            for (const auto& e : value) cfg.lambda_grid.push_back(get_real(e, "lambda_grid"));
        } else if (key == "lambda") {
            cfg.lambda = get_real(value, "lambda");
        } else if (key == "probe_atom") {
            if (!value.is_number_integer() && !value.is_number_unsigned()) {
                throw std::runtime_error("config key 'probe_atom' must be an integer");
            }
            cfg.probe_atom = value.get<int>();
        } else if (key == "space_file") {
            cfg.space_file = get_string(value, "space_file");
        } else if (key == "distribution_file") {
            cfg.distribution_file = get_string(value, "distribution_file");
        } else {
            throw std::runtime_error("config parse: unknown key '" + key + "'");
        }
    }
    if (!saw_scenario) throw std::runtime_error("config parse: missing required key 'scenario'");
    if (cfg.lambda_grid.empty()) {
        for (int i = 1; i <= 10; ++i) cfg.lambda_grid.push_back(0.05 * i);
    }
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_experiment_config(buf.str());
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::pair<HypothesisSpace, DiscreteJointDistribution> build_adversarial(
    double epsilon, double eta, double delta, int x2_size, int class_size,
    std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon < 0.25)) {
        throw std::invalid_argument("adversarial construction: epsilon must lie in [0, 1/4)");
    }
    if (!(eta > 0.0)) throw std::invalid_argument("adversarial construction: eta must be positive");
    if (!(delta >= 0.0)) throw std::invalid_argument("adversarial construction: delta must be nonnegative");
    if (!(eta * delta < 0.5)) {
        throw std::invalid_argument("adversarial construction: eta * delta must be below 1/2");
    }
    if (x2_size < 1) throw std::invalid_argument("adversarial construction: x2_size must be >= 1");
    if (class_size < 1) throw std::invalid_argument("adversarial construction: class_size must be >= 1");

    std::mt19937_64 eng(seed);
    DiscreteJointDistribution dist;
    dist.atoms.reserve(1 + static_cast<std::size_t>(x2_size));
    dist.atoms.push_back({{-1.0}, 1, 1.0 - 2.0 * epsilon});
    std::vector<int> labels(static_cast<std::size_t>(x2_size));
    for (int i = 0; i < x2_size; ++i) {
        labels[static_cast<std::size_t>(i)] = uniform01(eng) < 0.5 ? 1 : -1;
    }
    double atom_mass = 2.0 * epsilon / x2_size;
    for (int i = 0; i < x2_size; ++i) {
        dist.atoms.push_back({{static_cast<double>(i)},
                              labels[static_cast<std::size_t>(i)], atom_mass});
    }
    dist.validate();

    std::vector<Instance> instances;
    instances.reserve(dist.atoms.size());
    for (const auto& a : dist.atoms) instances.push_back(a.x);
    double p_correct = 0.5 - eta * delta;
    std::vector<std::vector<std::int8_t>> rows(static_cast<std::size_t>(class_size));
    for (auto& row : rows) {
        row.resize(instances.size());
        row[0] = 1;  // everything is correct on the clean region
        for (int i = 0; i < x2_size; ++i) {
            int y = labels[static_cast<std::size_t>(i)];
            row[static_cast<std::size_t>(1 + i)] =
                static_cast<std::int8_t>(uniform01(eng) < p_correct ? y : -y);
        }
    }
    return {table_space(std::move(instances), std::move(rows)), std::move(dist)};
}

std::pair<HypothesisSpace, DiscreteJointDistribution> build_favorable(int class_size) {
    if (class_size < 5 || (class_size - 1) % 4 != 0) {
        throw std::invalid_argument(
            "favorable construction: class_size must be 4k + 1 for some k >= 1 "
            "(one distinguished hypothesis plus four equal blocks)");
    }
    const int n = class_size - 1;
    const int block = n / 4;
    constexpr int kAtoms = 8;

    DiscreteJointDistribution dist;
    std::vector<Instance> instances;
    for (int a = 0; a < kAtoms; ++a) {
        dist.atoms.push_back({{static_cast<double>(a)}, 1, 1.0 / kAtoms});
        instances.push_back({static_cast<double>(a)});
    }
    dist.validate();

    // Hypothesis 0 is wrong only on atom 0 (error 1/8). The rest split into
    // four blocks; block t is wrong exactly on atoms 2t and 2t+1 (error 1/4),
    // so on every atom exactly 3/4 of the non-distinguished family is right.
    std::vector<std::vector<std::int8_t>> rows(static_cast<std::size_t>(class_size));
    rows[0].assign(kAtoms, 1);
    rows[0][0] = -1;
    for (int j = 1; j <= n; ++j) {
        int t = (j - 1) / block;
        auto& row = rows[static_cast<std::size_t>(j)];
        row.assign(kAtoms, 1);
        row[static_cast<std::size_t>(2 * t)] = -1;
        row[static_cast<std::size_t>(2 * t + 1)] = -1;
    }
    return {table_space(std::move(instances), std::move(rows)), std::move(dist)};
}

std::pair<HypothesisSpace, DiscreteJointDistribution> build_stumps_noise() {
    std::vector<double> cuts;
    for (int i = 0; i < 20; ++i) cuts.push_back(0.05 * i);
    HypothesisSpace space = stump_space(cuts);

    DiscreteJointDistribution dist;
    dist.atoms = {
        {{0.05}, 1, 0.125},   {{0.15}, 1, 0.125},  {{0.25}, 1, 0.125},
        {{0.35}, 1, 0.125},   {{0.45}, 1, 0.0625}, {{0.55}, -1, 0.0625},
        {{0.65}, -1, 0.125},  {{0.75}, -1, 0.125}, {{0.85}, -1, 0.09375},
        {{0.85}, 1, 0.03125},
    };
    dist.validate();
    return {std::move(space), std::move(dist)};
}

namespace {

ScenarioData build_scenario(const ExperimentConfig& cfg, double eta_for_build,
                            double delta_for_build) {
    ScenarioKind kind = scenario_kind(cfg.scenario);
    switch (kind) {
        case ScenarioKind::Adversarial: {
            auto [space, dist] =
                build_adversarial(cfg.epsilon, eta_for_build, delta_for_build,
                                  cfg.x2_size, cfg.class_size,
                                  scenario_seed(cfg.master_seed));
            ScenarioData sc(kind, std::move(space), std::move(dist));
            sc.a2_begin = 1;
            finish_scenario(sc);
            return sc;
        }
        case ScenarioKind::Favorable: {
            auto [space, dist] = build_favorable(cfg.class_size);
            ScenarioData sc(kind, std::move(space), std::move(dist));
            finish_scenario(sc);
            return sc;
        }
        default: {
            if (!cfg.space_file.empty()) {
                HypothesisSpace space = load_space(cfg.space_file);
                DiscreteJointDistribution dist = load_distribution(cfg.distribution_file);
                ScenarioData sc(kind, std::move(space), std::move(dist));
                finish_scenario(sc);
                return sc;
            }
            auto [space, dist] = build_stumps_noise();
            ScenarioData sc(kind, std::move(space), std::move(dist));
            finish_scenario(sc);
            return sc;
        }
    }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    if (cfg.lambda_grid.empty()) {
        for (int i = 1; i <= 10; ++i) cfg.lambda_grid.push_back(0.05 * i);
    }
    validate_config(cfg);
    const ScenarioKind kind = scenario_kind(cfg.scenario);

    // eta/delta resolution. The adversarial construction itself consumes
    // eta * delta, so its class size fixes the tuned eta before building.
    double eta = 0.0;
    if (cfg.eta) {
        eta = *cfg.eta;
    } else {
        std::size_t n_for_eta = kind == ScenarioKind::Adversarial ||
                                        kind == ScenarioKind::Favorable
                                    ? static_cast<std::size_t>(cfg.class_size)
                                    : 0;
        if (n_for_eta == 0) {
            // generic scenarios know their class size only after the build
            ScenarioData probe = build_scenario(cfg, 1.0, 0.0);
            n_for_eta = probe.space.size();
        }
        eta = tuned_parameters(cfg.m, n_for_eta, cfg.delta_conf, cfg.theta).eta;
    }
    double delta = cfg.delta ? *cfg.delta
                             : abstention_halfwidth(cfg.m, cfg.delta_conf, eta);

    ScenarioData sc = build_scenario(cfg, eta, delta);
    const std::size_t k = sc.dist.atoms.size();
    const std::size_t n = sc.space.size();
    const std::vector<double>& weights = sc.space.prior_weights();
    const std::vector<double> unit_weights(n, 1.0);

    if (kind == ScenarioKind::Concentration &&
        static_cast<std::size_t>(cfg.probe_atom) >= k) {
        throw std::invalid_argument("concentration: probe_atom is out of range for " +
                                    std::to_string(k) + " atoms");
    }

    // exact per-atom truth at the resolved eta
    std::vector<LogRatioResult> true_lr(k);
    std::vector<int> true_sign(k);
    std::vector<int> atom_label(k);
    for (std::size_t a = 0; a < k; ++a) {
        true_lr[a] = log_ratio_partitioned(
            sc.true_errs, weights, eta,
            [&](std::size_t h) { return sc.preds.at(h, a); });
        true_sign[a] = sign_of(true_lr[a].value);
        atom_label[a] = sc.dist.atoms[a].label;
    }

    // eta_uniformity precomputation: grid and per-eta expected log partition
    std::vector<double> grid;
    std::vector<double> grid_expect;
    bool expectation_exact = false;
    if (kind == ScenarioKind::EtaUniformity) {
        grid = learning_rate_grid(n, cfg.lambda);
        if (grid.empty()) {
            throw std::invalid_argument(
                "eta_uniformity: lambda is too coarse, the learning-rate grid is empty");
        }
        grid_expect.resize(grid.size());
        EnumerationBudget budget;
        expectation_exact = enumerable_within(k, cfg.m, budget.max_sample_space);
        if (expectation_exact) {
            std::vector<std::size_t> all(n);
            for (std::size_t h = 0; h < n; ++h) all[h] = h;
            for (std::size_t g = 0; g < grid.size(); ++g) {
                grid_expect[g] = exact_expected_log_partition(
                    sc.space, sc.dist, grid[g], cfg.m, all, budget, cfg.workers);
            }
        } else {
            // held-out calibration average over fresh seeded samples
            const int calib = std::max(1000, 2 * cfg.trials);
            std::mt19937_64 eng(calibration_seed(cfg.master_seed));
            std::vector<std::uint32_t> cnt(k);
            std::vector<double> errs(n);
            std::vector<CompensatedSum> acc(grid.size());
            const double inv_m = 1.0 / cfg.m;
            for (int c = 0; c < calib; ++c) {
                std::fill(cnt.begin(), cnt.end(), 0u);
                for (int j = 0; j < cfg.m; ++j) ++cnt[pick_atom(sc.cum, uniform01(eng))];
                for (std::size_t h = 0; h < n; ++h) {
                    std::uint32_t w = 0;
                    for (std::size_t a = 0; a < k; ++a) {
                        w += cnt[a] * static_cast<std::uint32_t>(sc.wrong[h * k + a]);
                    }
                    errs[h] = w * inv_m;
                }
                for (std::size_t g = 0; g < grid.size(); ++g) {
                    acc[g].add(log_partition(errs, weights, grid[g]));
                }
            }
            for (std::size_t g = 0; g < grid.size(); ++g) {
                grid_expect[g] = acc[g].value() / calib;
            }
        }
    }

    // per-trial outputs, indexed by trial so aggregation order is fixed
    const int trials = cfg.trials;
    const std::size_t n_lambda = cfg.lambda_grid.size();
    std::vector<TrialRow> rows(static_cast<std::size_t>(trials));
    std::vector<std::uint8_t> dev_event;   // trial x lambda x {plus,minus}
    std::vector<double> tail_mass;         // trial x lambda x {plus,minus}
    if (kind == ScenarioKind::Concentration) {
        dev_event.assign(static_cast<std::size_t>(trials) * n_lambda * 2, 0);
        tail_mass.assign(static_cast<std::size_t>(trials) * n_lambda * 2, 0.0);
    }
    std::vector<int> mono_violations;
    if (kind == ScenarioKind::EtaUniformity) {
        mono_violations.assign(static_cast<std::size_t>(trials), 0);
    }

    const double inv_m = 1.0 / cfg.m;
    const double inv_t = 1.0 / cfg.test_points;
    const double dev_margin = eta / (8.0 * cfg.m);

    auto run_trial = [&](int t, std::vector<std::uint32_t>& cnt,
                         std::vector<std::uint32_t>& tcnt,
                         std::vector<double>& errs,
                         std::vector<LogRatioResult>& hat,
                         std::vector<int>& pred, std::vector<double>& devs) {
        TrialRow row;
        row.trial = t;
        row.seed = derive_trial_seed(cfg.master_seed, static_cast<std::uint64_t>(t));
        std::mt19937_64 eng(row.seed);

        std::fill(cnt.begin(), cnt.end(), 0u);
        for (int j = 0; j < cfg.m; ++j) ++cnt[pick_atom(sc.cum, uniform01(eng))];
        std::fill(tcnt.begin(), tcnt.end(), 0u);
        for (int j = 0; j < cfg.test_points; ++j) {
            ++tcnt[pick_atom(sc.cum, uniform01(eng))];
        }

        for (std::size_t h = 0; h < n; ++h) {
            std::uint32_t w = 0;
            for (std::size_t a = 0; a < k; ++a) {
                w += cnt[a] * static_cast<std::uint32_t>(sc.wrong[h * k + a]);
            }
            errs[h] = w * inv_m;
        }

        for (std::size_t a = 0; a < k; ++a) {
            hat[a] = log_ratio_partitioned(errs, weights, eta, [&](std::size_t h) {
                return sc.preds.at(h, a);
            });
            pred[a] = predict(hat[a].value, delta);
        }

        std::size_t erm = 0;
        for (std::size_t h = 1; h < n; ++h) {
            if (errs[h] < errs[erm]) erm = h;
        }
        row.erm_index = erm;
        row.erm_error = sc.true_errs[erm];

        std::uint32_t abstain = 0, mistake = 0, correct = 0, disagree = 0;
        for (std::size_t a = 0; a < k; ++a) {
            if (tcnt[a] == 0) continue;
            if (pred[a] == 0) {
                abstain += tcnt[a];
            } else {
                if (pred[a] == atom_label[a]) {
                    correct += tcnt[a];
                } else {
                    mistake += tcnt[a];
                }
                if (pred[a] != true_sign[a]) disagree += tcnt[a];
            }
        }
        row.abstain_rate = abstain * inv_t;
        row.mistake_rate = mistake * inv_t;
        row.correct_rate = correct * inv_t;
        row.sign_disagreement_rate = disagree * inv_t;

        if (kind == ScenarioKind::Concentration) {
            for (std::size_t a = 0; a < k; ++a) {
                devs[a] = log_ratio_deviation(true_lr[a], hat[a]);
            }
            row.probe_deviation = devs[static_cast<std::size_t>(cfg.probe_atom)];
            row.has_probe = true;
            for (std::size_t li = 0; li < n_lambda; ++li) {
                double thr = 2.0 * cfg.lambda_grid[li] + dev_margin;
                std::size_t base = (static_cast<std::size_t>(t) * n_lambda + li) * 2;
                if (row.probe_deviation >= thr) dev_event[base] = 1;
                if (-row.probe_deviation >= thr) dev_event[base + 1] = 1;
                double mass_plus = 0.0, mass_minus = 0.0;
                for (std::size_t a = 0; a < k; ++a) {
                    if (tcnt[a] == 0) continue;
                    if (devs[a] >= thr) mass_plus += tcnt[a] * inv_t;
                    if (-devs[a] >= thr) mass_minus += tcnt[a] * inv_t;
                }
                tail_mass[base] = mass_plus;
                tail_mass[base + 1] = mass_minus;
            }
        }

        if (kind == ScenarioKind::EtaUniformity) {
            double sup = 0.0;
            double prev_f = 0.0, prev_g = 0.0, prev_eta = 0.0;
            int viol = 0;
            // grid is decreasing; walk it backwards for ascending eta
            for (std::size_t gi = grid.size(); gi-- > 0;) {
                double e = grid[gi];
                double rhat = log_partition(errs, weights, e);
                sup = std::max(sup, std::abs(rhat - grid_expect[gi]));
                double f = log_partition(errs, unit_weights, e);
                double g = f - std::log(static_cast<double>(n)) / e;
                if (prev_eta > 0.0) {
                    if (f > prev_f + 1e-12) ++viol;
                    if (g < prev_g - 1e-12) ++viol;
                }
                prev_f = f;
                prev_g = g;
                prev_eta = e;
            }
            row.sup_deviation = sup;
            row.has_sup = true;
            mono_violations[static_cast<std::size_t>(t)] = viol;
        }

        rows[static_cast<std::size_t>(t)] = row;
    };

    const int workers = std::max(1, std::min(cfg.workers, trials));
    if (workers == 1) {
        std::vector<std::uint32_t> cnt(k), tcnt(k);
        std::vector<double> errs(n), devs(k);
        std::vector<LogRatioResult> hat(k);
        std::vector<int> pred(k);
        for (int t = 0; t < trials; ++t) run_trial(t, cnt, tcnt, errs, hat, pred, devs);
    } else {
        std::mutex err_mutex;
        std::exception_ptr first_error;
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    std::vector<std::uint32_t> cnt(k), tcnt(k);
                    std::vector<double> errs(n), devs(k);
                    std::vector<LogRatioResult> hat(k);
                    std::vector<int> pred(k);
                    for (int t = w; t < trials; t += workers) {
                        run_trial(t, cnt, tcnt, errs, hat, pred, devs);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    ExperimentReport rep;
    rep.config = cfg;
    rep.eta = eta;
    rep.delta = delta;
    rep.hypothesis_count = n;
    rep.atom_count = k;
    rep.trial_rows = std::move(rows);
    rep.best_hypothesis_true_error = sc.best_true_error;

    CompensatedSum s_abstain, s_mistake, s_disagree, s_correct, s_erm;
    int above_conf = 0;
    for (const auto& row : rep.trial_rows) {
        s_abstain.add(row.abstain_rate);
        s_mistake.add(row.mistake_rate);
        s_disagree.add(row.sign_disagreement_rate);
        s_correct.add(row.correct_rate);
        s_erm.add(row.erm_error);
        if (row.sign_disagreement_rate > cfg.delta_conf) ++above_conf;
    }
    const double inv_trials = 1.0 / trials;
    rep.mean_abstain_rate = s_abstain.value() * inv_trials;
    rep.mean_mistake_rate = s_mistake.value() * inv_trials;
    rep.mean_sign_disagreement_rate = s_disagree.value() * inv_trials;
    rep.mean_correct_rate = s_correct.value() * inv_trials;
    rep.mean_erm_error = s_erm.value() * inv_trials;
    rep.frac_sign_disagreement_above_conf = above_conf * inv_trials;

    if (kind == ScenarioKind::Concentration) {
        rep.lambda_rows.reserve(n_lambda);
        for (std::size_t li = 0; li < n_lambda; ++li) {
            LambdaRow lr;
            lr.lambda = cfg.lambda_grid[li];
            lr.threshold = 2.0 * lr.lambda + dev_margin;
            lr.tail_bound = deviation_tail(lr.lambda, cfg.m);
            lr.level = deviation_level(lr.lambda, cfg.m);
            int ev_p = 0, ev_m = 0, ex_p = 0, ex_m = 0;
            for (int t = 0; t < trials; ++t) {
                std::size_t base = (static_cast<std::size_t>(t) * n_lambda + li) * 2;
                ev_p += dev_event[base];
                ev_m += dev_event[base + 1];
                if (tail_mass[base] > lr.level) ++ex_p;
                if (tail_mass[base + 1] > lr.level) ++ex_m;
            }
            lr.freq_plus = ev_p * inv_trials;
            lr.freq_minus = ev_m * inv_trials;
            lr.exceed_freq_plus = ex_p * inv_trials;
            lr.exceed_freq_minus = ex_m * inv_trials;
            rep.lambda_rows.push_back(lr);
        }
        rep.scenario_values.emplace_back(
            "probe_true_log_ratio",
            true_lr[static_cast<std::size_t>(cfg.probe_atom)].value);
    }

    if (is_comparison(kind)) {
        auto [mistake_b, abstain_b] = mistake_and_abstain_bounds(
            cfg.m, n, cfg.delta_conf, cfg.theta, sc.best_true_error);
        rep.bound_values.push_back(mistake_b);
        rep.bound_values.push_back(abstain_b);

        BoundReport occam;
        occam.name = "single_hypothesis_selection";
        occam.inputs = {{"m", static_cast<double>(cfg.m)},
                        {"class_size", static_cast<double>(n)},
                        {"conf", cfg.delta_conf},
                        {"epsilon_star", sc.best_true_error}};
        occam.value = occam_bound(cfg.m, n, cfg.delta_conf, sc.best_true_error);
        occam.clamped = std::min(1.0, occam.value);
        occam.note = "selection baseline: epsilon_star + sqrt(ln(N/conf)/m)";
        rep.bound_values.push_back(occam);

        double gamma = std::log(8.0 * static_cast<double>(n)) / eta;
        RiskBounds risk = log_ratio_risk_bounds(sc.best_true_error, gamma, eta,
                                                delta, static_cast<double>(n));
        BoundReport risk0;
        risk0.name = "log_ratio_risk_at_zero";
        risk0.inputs = {{"epsilon", sc.best_true_error},
                        {"gamma", gamma},
                        {"eta", eta},
                        {"class_size", static_cast<double>(n)}};
        risk0.value = risk.at_zero;
        risk0.clamped = std::min(1.0, risk.at_zero);
        risk0.valid = risk.valid;
        risk0.note = "true-log-ratio sign risk at the smallest valid margin gamma";
        rep.bound_values.push_back(risk0);
        BoundReport risk2;
        risk2.name = "log_ratio_risk_at_two_delta";
        risk2.inputs = {{"epsilon", sc.best_true_error},
                        {"gamma", gamma},
                        {"eta", eta},
                        {"delta", delta},
                        {"class_size", static_cast<double>(n)}};
        risk2.value = risk.at_two_delta;
        risk2.clamped = std::min(1.0, risk.at_two_delta);
        risk2.valid = risk.valid;
        risk2.note = "risk of trusting log ratios that clear twice the band";
        rep.bound_values.push_back(risk2);
    }

    if (kind == ScenarioKind::Abstention) {
        BoundReport hw;
        hw.name = "abstention_halfwidth";
        hw.inputs = {{"m", static_cast<double>(cfg.m)},
                     {"conf", cfg.delta_conf},
                     {"eta", eta}};
        hw.value = abstention_halfwidth(cfg.m, cfg.delta_conf, eta);
        hw.clamped = hw.value;
        hw.note = "half-width making nonzero predictions track the true log-ratio "
                  "sign in each trial with probability 1 - conf";
        rep.bound_values.push_back(hw);
    }

    if (kind == ScenarioKind::EtaUniformity) {
        int exceed = 0;
        long total_viol = 0;
        for (int t = 0; t < trials; ++t) {
            if (rep.trial_rows[static_cast<std::size_t>(t)].sup_deviation > cfg.lambda) ++exceed;
            total_viol += mono_violations[static_cast<std::size_t>(t)];
        }
        rep.scenario_values.emplace_back("grid_size", static_cast<double>(grid.size()));
        rep.scenario_values.emplace_back("sup_exceed_frequency", exceed * inv_trials);
        rep.scenario_values.emplace_back("monotonicity_violations",
                                         static_cast<double>(total_viol));
        rep.scenario_values.emplace_back("expectation_exact",
                                         expectation_exact ? 1.0 : 0.0);

        BoundReport ut;
        ut.name = "uniform_deviation_tail";
        ut.inputs = {{"class_size", static_cast<double>(n)},
                     {"lambda", cfg.lambda},
                     {"m", static_cast<double>(cfg.m)}};
        ut.value = uniform_deviation_tail(n, cfg.lambda, cfg.m);
        ut.clamped = std::min(1.0, ut.value);
        ut.note = "probability that any learning rate >= 1 sees a log-partition "
                  "deviation beyond lambda";
        rep.bound_values.push_back(ut);
    }

    if (kind == ScenarioKind::Adversarial) {
        double a2_mass = 2.0 * cfg.epsilon;
        CompensatedSum sign_err;
        for (std::size_t a = 0; a < k; ++a) {
            if (true_sign[a] != atom_label[a]) sign_err.add(sc.dist.atoms[a].probability);
        }
        CompensatedSum a2_ylr;
        for (std::size_t a = sc.a2_begin; a < k; ++a) {
            a2_ylr.add(sc.dist.atoms[a].probability * atom_label[a] * true_lr[a].value);
        }
        CompensatedSum mean_err;
        for (double e : sc.true_errs) mean_err.add(e);
        rep.scenario_values.emplace_back("a2_mass", a2_mass);
        rep.scenario_values.emplace_back("sign_l_error_mass", sign_err.value());
        rep.scenario_values.emplace_back(
            "mean_a2_y_log_ratio", a2_mass > 0.0 ? a2_ylr.value() / a2_mass : 0.0);
        rep.scenario_values.emplace_back(
            "target_a2_y_log_ratio",
            std::log((0.5 - eta * delta) / (0.5 + eta * delta)) / eta);
        rep.scenario_values.emplace_back("approx_a2_y_log_ratio", -4.0 * delta);
        rep.scenario_values.emplace_back("mean_hypothesis_true_error",
                                         mean_err.value() / static_cast<double>(n));
        rep.scenario_values.emplace_back("expected_hypothesis_true_error",
                                         a2_mass * (0.5 + eta * delta));
    }

    if (kind == ScenarioKind::Favorable) {
        const double n_prime = static_cast<double>(n - 1);
        double formula = std::log(3.0 + 4.0 * std::exp(eta / 8.0) / n_prime) / eta;
        double max_dev = 0.0;
        int correct_atoms = 0;
        for (std::size_t a = 0; a < k; ++a) {
            if (true_sign[a] == atom_label[a]) ++correct_atoms;
            if (a == 0) continue;  // the distinguished hypothesis is wrong here
            max_dev = std::max(
                max_dev, std::abs(atom_label[a] * true_lr[a].value - formula));
        }
        rep.scenario_values.emplace_back("formula_y_log_ratio", formula);
        rep.scenario_values.emplace_back("max_formula_deviation", max_dev);
        rep.scenario_values.emplace_back("true_sign_correct_atoms",
                                         static_cast<double>(correct_atoms));
    }

    return rep;
}

namespace {

ExperimentReport run_checked(const ExperimentConfig& cfg,
                             std::initializer_list<const char*> allowed,
                             const char* op) {
    for (const char* a : allowed) {
        if (cfg.scenario == a) return run_experiment(cfg);
    }
    std::string msg = std::string(op) + " expects scenario in {";
    bool first = true;
    for (const char* a : allowed) {
        if (!first) msg += ", ";
        msg += a;
        first = false;
    }
    msg += "}, got '" + cfg.scenario + "'";
    throw std::invalid_argument(msg);
}

}  // namespace

ExperimentReport run_concentration_experiment(const ExperimentConfig& cfg) {
    return run_checked(cfg, {"concentration"}, "concentration experiment");
}

ExperimentReport run_abstention_experiment(const ExperimentConfig& cfg) {
    return run_checked(cfg, {"abstention"}, "abstention experiment");
}

ExperimentReport run_comparison_experiment(const ExperimentConfig& cfg) {
    return run_checked(cfg, {"adversarial", "favorable", "stumps_noise"},
                       "comparison experiment");
}

ExperimentReport run_eta_uniformity_experiment(const ExperimentConfig& cfg) {
    return run_checked(cfg, {"eta_uniformity"}, "eta uniformity experiment");
}

std::string report_to_json(const ExperimentReport& rep) {
    json j;
    j["artifact_version"] = kArtifactVersion;
    j["scenario"] = rep.config.scenario;
    j["config"] = config_to_json(rep.config);
    j["resolved"] = {{"eta", json_number(rep.eta)}, {"delta", json_number(rep.delta)}};
    j["hypothesis_count"] = rep.hypothesis_count;
    j["atom_count"] = rep.atom_count;

    json agg;
    agg["mean_abstain_rate"] = json_number(rep.mean_abstain_rate);
    agg["mean_mistake_rate"] = json_number(rep.mean_mistake_rate);
    agg["mean_sign_disagreement_rate"] = json_number(rep.mean_sign_disagreement_rate);
    agg["mean_correct_rate"] = json_number(rep.mean_correct_rate);
    agg["mean_erm_error"] = json_number(rep.mean_erm_error);
    agg["frac_sign_disagreement_above_conf"] =
        json_number(rep.frac_sign_disagreement_above_conf);
    agg["best_hypothesis_true_error"] = json_number(rep.best_hypothesis_true_error);
    j["aggregates"] = agg;

    json sv;
    for (const auto& [name, value] : rep.scenario_values) sv[name] = json_number(value);
    j["scenario_values"] = sv;

    json bounds = json::array();
    for (const auto& b : rep.bound_values) bounds.push_back(bound_to_json(b));
    j["bounds"] = bounds;

    json lrows = json::array();
    for (const auto& lr : rep.lambda_rows) {
        json r;
        r["lambda"] = json_number(lr.lambda);
        r["threshold"] = json_number(lr.threshold);
        r["tail_bound"] = json_number(lr.tail_bound);
        r["freq_plus"] = json_number(lr.freq_plus);
        r["freq_minus"] = json_number(lr.freq_minus);
        r["level"] = json_number(lr.level);
        r["exceed_freq_plus"] = json_number(lr.exceed_freq_plus);
        r["exceed_freq_minus"] = json_number(lr.exceed_freq_minus);
        lrows.push_back(r);
    }
    j["lambda_rows"] = lrows;

    json trials = json::array();
    for (const auto& row : rep.trial_rows) {
        json r;
        r["trial"] = row.trial;
        r["seed"] = row.seed;
        r["abstain_rate"] = json_number(row.abstain_rate);
        r["mistake_rate"] = json_number(row.mistake_rate);
        r["sign_disagreement_rate"] = json_number(row.sign_disagreement_rate);
        r["correct_rate"] = json_number(row.correct_rate);
        r["erm_index"] = row.erm_index;
        r["erm_error"] = json_number(row.erm_error);
        if (row.has_probe) r["probe_deviation"] = json_number(row.probe_deviation);
        if (row.has_sup) r["sup_deviation"] = json_number(row.sup_deviation);
        trials.push_back(r);
    }
    j["trials"] = trials;

    return j.dump(2) + "\n";
}

std::string report_to_csv(const ExperimentReport& rep) {
    std::ostringstream out;
    out << "trial,seed,abstain_rate,mistake_rate,sign_disagreement_rate,"
           "correct_rate,erm_index,erm_error,probe_deviation,sup_deviation\n";
    for (const auto& row : rep.trial_rows) {
        out << row.trial << ',' << row.seed << ',' << fmt_double(row.abstain_rate)
            << ',' << fmt_double(row.mistake_rate) << ','
            << fmt_double(row.sign_disagreement_rate) << ','
            << fmt_double(row.correct_rate) << ',' << row.erm_index << ','
            << fmt_double(row.erm_error) << ','
            << (row.has_probe ? fmt_double(row.probe_deviation) : "") << ','
            << (row.has_sup ? fmt_double(row.sup_deviation) : "") << '\n';
    }
    out << "aggregate,," << fmt_double(rep.mean_abstain_rate) << ','
        << fmt_double(rep.mean_mistake_rate) << ','
        << fmt_double(rep.mean_sign_disagreement_rate) << ','
        << fmt_double(rep.mean_correct_rate) << ",,"
        << fmt_double(rep.mean_erm_error) << ",,\n";
    return out.str();
}

std::string manifest_json(const ExperimentReport& rep,
                          const std::string& command_line,
                          const std::vector<std::string>& output_names) {
    json j;
    j["command"] = command_line;
    j["artifact_version"] = kArtifactVersion;
    j["master_seed"] = rep.config.master_seed;
    j["generated_utc"] = utc_timestamp();
    j["config"] = config_to_json(rep.config);
    j["resolved"] = {{"eta", json_number(rep.eta)}, {"delta", json_number(rep.delta)}};
    j["outputs"] = output_names;
    return j.dump(2) + "\n";
}

std::vector<std::string> write_report_files(const ExperimentReport& rep,
                                            const std::string& out_dir,
                                            const std::string& command_line) {
    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error(out_dir + ": cannot create output directory");

    auto write_file = [&](const std::string& name, const std::string& content) {
        fs::path p = dir / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        if (!out.good()) throw std::runtime_error(p.string() + ": write failed");
        return p.string();
    };

    std::vector<std::string> paths;
    paths.push_back(write_file("report.json", report_to_json(rep)));
    paths.push_back(write_file("trials.csv", report_to_csv(rep)));
    paths.push_back(write_file(
        "manifest.json",
        manifest_json(rep, command_line, {"report.json", "trials.csv"})));
    return paths;
}

}  // namespace ewa
