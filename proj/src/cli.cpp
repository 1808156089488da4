#include "ewa/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ewa/averaging.hpp"
#include "ewa/bounds.hpp"
#include "ewa/detail/numeric.hpp"
#include "ewa/experiments.hpp"
#include "ewa/hypothesis_space.hpp"

namespace ewa::cli {

namespace {

using detail::fmt_double;
using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string default_out_dir() {
    const char* env = std::getenv("EWA_OUT_DIR");
    return env && *env ? env : ".";
}

std::string join_args(int argc, const char* const* argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double parse_strict_real(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(what);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(what + ": not a number: '" + s + "'");
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out.good()) throw std::runtime_error(path + ": write failed");
}

// ---- score ----

struct ScoreArgs {
    std::string dataset;
    std::string space;
    double eta = 1.0;
    std::string delta = "0";
    double delta_conf = 0.05;
    std::string out_path;
};

int run_score(const ScoreArgs& args, const std::string& command,
              std::ostream& out) {
    Sample sample = load_dataset(args.dataset);
    HypothesisSpace space = load_space(args.space);
    const int m = static_cast<int>(sample.size());

    bool delta_auto = false;
    double delta;
    if (args.delta == "auto") {
        delta = abstention_halfwidth(m, args.delta_conf, args.eta);
        delta_auto = true;
    } else if (args.delta == "inf" || args.delta == "+inf") {
        delta = kInf;
    } else {
        delta = parse_strict_real(args.delta, "--delta");
        if (delta < 0.0) throw std::runtime_error("--delta: must be nonnegative");
    }

    std::vector<double> errs = empirical_errors(space, sample);
    const std::vector<double>& weights = space.prior_weights();

    std::ostringstream csv;
    csv << "row,log_ratio,prediction\n";
    int count_plus = 0, count_minus = 0, count_abstain = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const Instance& x = sample.examples[i].x;
        LogRatioResult lr = log_ratio_partitioned(
            errs, weights, args.eta,
            [&](std::size_t h) { return space.predict(h, x); });
        int p = predict(lr.value, delta);
        if (p > 0) {
            ++count_plus;
        } else if (p < 0) {
            ++count_minus;
        } else {
            ++count_abstain;
        }
        csv << i << ',' << fmt_double(lr.value) << ',' << p << '\n';
    }

    std::string out_path = args.out_path.empty()
                               ? default_out_dir() + "/score.csv"
                               : args.out_path;
    write_text_file(out_path, csv.str());

    json manifest;
    manifest["command"] = command;
    manifest["artifact_version"] = kArtifactVersion;
    manifest["generated_utc"] = utc_timestamp();
    json cfg;
    cfg["dataset"] = args.dataset;
    cfg["space"] = args.space;
    cfg["eta"] = args.eta;
    cfg["delta"] = std::isinf(delta) ? json("+inf") : json(delta);
    cfg["delta_mode"] = delta_auto ? "auto" : "explicit";
    cfg["delta_conf"] = args.delta_conf;
    manifest["config"] = cfg;
    manifest["outputs"] = {out_path};
    write_text_file(out_path + ".manifest.json", manifest.dump(2) + "\n");

    out << "scored " << m << " rows against " << space.size()
        << " hypotheses\n";
    out << "eta = " << fmt_double(args.eta) << "\n";
    out << "delta = " << fmt_double(delta) << (delta_auto ? " (auto)" : "")
        << "\n";
    out << "predictions: +1 x " << count_plus << ", -1 x " << count_minus
        << ", abstain x " << count_abstain << "\n";
    out << "wrote " << out_path << "\n";
    return 0;
}

// ---- experiment ----

struct ExperimentArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed;     // empty = keep config value
    int trials = -1;      // -1 = keep config value
    int workers = -1;
    std::string scenario;  // empty = keep config value
};

int run_experiment_cmd(const ExperimentArgs& args, const std::string& command,
                       std::ostream& out) {
    ExperimentConfig cfg = load_experiment_config(args.config_path);
    if (!args.scenario.empty()) cfg.scenario = args.scenario;
    if (!args.seed.empty()) {
        try {
            cfg.master_seed = std::stoull(args.seed);
        } catch (const std::exception&) {
            throw std::runtime_error("--seed: not a 64-bit unsigned integer: '" +
                                     args.seed + "'");
        }
    }
    if (args.trials > 0) cfg.trials = args.trials;
    if (args.workers > 0) cfg.workers = args.workers;

    ExperimentReport rep = run_experiment(cfg);
    std::string dir = args.out_dir.empty() ? default_out_dir() : args.out_dir;
    std::vector<std::string> paths = write_report_files(rep, dir, command);

    out << "scenario " << cfg.scenario << ": " << cfg.trials << " trials, m = "
        << cfg.m << ", eta = " << fmt_double(rep.eta) << ", delta = "
        << fmt_double(rep.delta) << "\n";
    out << "mean rates: abstain " << fmt_double(rep.mean_abstain_rate)
        << ", mistake " << fmt_double(rep.mean_mistake_rate)
        << ", sign disagreement " << fmt_double(rep.mean_sign_disagreement_rate)
        << "\n";
    out << "mean erm error " << fmt_double(rep.mean_erm_error)
        << " (best possible " << fmt_double(rep.best_hypothesis_true_error)
        << ")\n";
    for (const auto& p : paths) out << "wrote " << p << "\n";
    return 0;
}

// ---- bounds ----

struct BoundParams {
    double m = 200;
    double class_size = 40;
    double conf = 0.05;
    double theta = 0.25;
    double eta = 1.0;
    double delta = 0.0;
    double lambda = 0.1;
    double epsilon = 0.05;
    double gamma = std::numeric_limits<double>::quiet_NaN();  // NaN = ln(8N)/eta
};

int param_as_int(double v, const char* name) {
    double r = std::round(v);
    if (!(r >= 1) || std::abs(v - r) > 1e-9) {
        throw std::runtime_error(std::string("--") + name +
                                 ": must be a positive integer, got " +
                                 fmt_double(v));
    }
    return static_cast<int>(r);
}

std::size_t param_as_size(double v, const char* name) {
    return static_cast<std::size_t>(param_as_int(v, name));
}

double resolved_gamma(const BoundParams& p) {
    if (!std::isnan(p.gamma)) return p.gamma;
    return std::log(8.0 * p.class_size) / p.eta;
}

struct BoundDef {
    std::vector<std::string> columns;
    std::function<std::vector<double>(const BoundParams&)> eval;
};

const std::map<std::string, BoundDef>& bound_registry() {
    static const std::map<std::string, BoundDef> reg = {
        {"deviation_tail",
         {{"value"},
          [](const BoundParams& p) {
              return std::vector<double>{deviation_tail(p.lambda, param_as_int(p.m, "m"))};
          }}},
        {"deviation_level",
         {{"value"},
          [](const BoundParams& p) {
              return std::vector<double>{deviation_level(p.lambda, param_as_int(p.m, "m"))};
          }}},
        {"uniform_tail",
         {{"value"},
          [](const BoundParams& p) {
              return std::vector<double>{uniform_deviation_tail(
                  param_as_size(p.class_size, "class-size"), p.lambda,
                  param_as_int(p.m, "m"))};
          }}},
        {"halfwidth",
         {{"value"},
          [](const BoundParams& p) {
              return std::vector<double>{
                  abstention_halfwidth(param_as_int(p.m, "m"), p.conf, p.eta)};
          }}},
        {"uniform_halfwidth",
         {{"value"},
          [](const BoundParams& p) {
              return std::vector<double>{uniform_abstention_halfwidth(
                  param_as_int(p.m, "m"), param_as_size(p.class_size, "class-size"),
                  p.conf, p.eta)};
          }}},
        {"tuned",
         {{"eta", "delta"},
          [](const BoundParams& p) {
              TunedParameters t =
                  tuned_parameters(param_as_int(p.m, "m"),
                                   param_as_size(p.class_size, "class-size"),
                                   p.conf, p.theta);
              return std::vector<double>{t.eta, t.delta};
          }}},
        {"risk",
         {{"at_zero", "at_two_delta", "weak_weight_cap", "valid"},
          [](const BoundParams& p) {
              RiskBounds r = log_ratio_risk_bounds(p.epsilon, resolved_gamma(p),
                                                   p.eta, p.delta, p.class_size);
              return std::vector<double>{r.at_zero, r.at_two_delta,
                                         r.weak_weight_cap, r.valid ? 1.0 : 0.0};
          }}},
        {"tuned_risk",
         {{"sign_error", "sign_error_active", "abstain", "abstain_active",
           "m_threshold"},
          [](const BoundParams& p) {
              TunedRiskBounds t = tuned_risk_bounds(
                  param_as_int(p.m, "m"), param_as_size(p.class_size, "class-size"),
                  p.conf, p.theta, p.epsilon);
              return std::vector<double>{t.sign_error,
                                         t.sign_error_active ? 1.0 : 0.0,
                                         t.abstain, t.abstain_active ? 1.0 : 0.0,
                                         t.m_threshold};
          }}},
        {"occam",
         {{"value"},
          [](const BoundParams& p) {
              return std::vector<double>{occam_bound(
                  param_as_int(p.m, "m"), param_as_size(p.class_size, "class-size"),
                  p.conf, p.epsilon)};
          }}},
        {"mistake_abstain",
         {{"mistake", "mistake_valid", "abstain", "abstain_valid"},
          [](const BoundParams& p) {
              auto [mb, ab] = mistake_and_abstain_bounds(
                  param_as_int(p.m, "m"), param_as_size(p.class_size, "class-size"),
                  p.conf, p.theta, p.epsilon);
              return std::vector<double>{mb.value, mb.valid ? 1.0 : 0.0, ab.value,
                                         ab.valid ? 1.0 : 0.0};
          }}},
    };
    return reg;
}

double* param_slot(BoundParams& p, const std::string& name) {
    if (name == "m") return &p.m;
    if (name == "class_size" || name == "class-size") return &p.class_size;
    if (name == "conf") return &p.conf;
    if (name == "theta") return &p.theta;
    if (name == "eta") return &p.eta;
    if (name == "delta") return &p.delta;
    if (name == "lambda") return &p.lambda;
    if (name == "epsilon") return &p.epsilon;
    if (name == "gamma") return &p.gamma;
    return nullptr;
}

struct Sweep {
    std::string param;
    std::vector<double> values;
};

Sweep parse_sweep(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos) {
        throw std::runtime_error("--sweep: expected param=start:stop:count, got '" +
                                 text + "'");
    }
    Sweep sweep;
    sweep.param = text.substr(0, eq);
    std::string rest = text.substr(eq + 1);
    auto c1 = rest.find(':');
    auto c2 = rest.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
        throw std::runtime_error("--sweep: expected param=start:stop:count, got '" +
                                 text + "'");
    }
    double start = parse_strict_real(rest.substr(0, c1), "--sweep start");
    double stop = parse_strict_real(rest.substr(c1 + 1, c2 - c1 - 1), "--sweep stop");
    double count_real = parse_strict_real(rest.substr(c2 + 1), "--sweep count");
    int count = param_as_int(count_real, "sweep count");
    if (count == 1) {
        sweep.values.push_back(start);
    } else {
        for (int i = 0; i < count; ++i) {
            sweep.values.push_back(start + (stop - start) * i / (count - 1));
        }
    }
    return sweep;
}

struct BoundsArgs {
    std::string bound;
    std::string sweep;
    BoundParams params;
};

int run_bounds(const BoundsArgs& args, std::ostream& out) {
    const auto& reg = bound_registry();
    auto it = reg.find(args.bound);
    if (it == reg.end()) {
        std::string msg = "unknown bound '" + args.bound + "'; supported:";
        for (const auto& [name, def] : reg) msg += " " + name;
        throw std::runtime_error(msg);
    }
    Sweep sweep = parse_sweep(args.sweep);
    BoundParams params = args.params;
    double* slot = param_slot(params, sweep.param);
    if (!slot) {
        throw std::runtime_error(
            "--sweep: unknown parameter '" + sweep.param +
            "'; parameters: m class_size conf theta eta delta lambda epsilon gamma");
    }

    out << sweep.param;
    for (const auto& col : it->second.columns) out << ',' << col;
    out << '\n';
    for (double v : sweep.values) {
        *slot = v;
        std::vector<double> vals = it->second.eval(params);
        out << fmt_double(v);
        for (double x : vals) out << ',' << fmt_double(x);
        out << '\n';
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
    CLI::App app{
        "Averaged classifier with abstention: scoring, seeded experiments, "
        "and bound tables"};
    app.set_version_flag("--version", std::string(kArtifactVersion));
    app.require_subcommand(1);

    ScoreArgs score;
    CLI::App* score_cmd = app.add_subcommand(
        "score", "Score a dataset with the abstaining averaged classifier");
    score_cmd->add_option("--dataset", score.dataset, "CSV dataset path")->required();
    score_cmd->add_option("--space", score.space, "hypothesis space description path")
        ->required();
    score_cmd->add_option("--eta", score.eta, "error weighting rate (> 0)");
    score_cmd->add_option("--delta", score.delta,
                          "abstention half-width: number, 'auto', or 'inf'");
    score_cmd->add_option("--delta-conf", score.delta_conf,
                          "confidence for --delta auto");
    score_cmd->add_option("--out", score.out_path,
                          "output CSV path (default $EWA_OUT_DIR/score.csv)");

    ExperimentArgs exp;
    CLI::App* exp_cmd =
        app.add_subcommand("experiment", "Run a seeded experiment scenario");
    exp_cmd->add_option("--config", exp.config_path, "experiment config JSON path")
        ->required();
    exp_cmd->add_option("--out", exp.out_dir,
                        "output directory (default $EWA_OUT_DIR)");
    exp_cmd->add_option("--seed", exp.seed, "override master_seed");
    exp_cmd->add_option("--trials", exp.trials, "override trial count");
    exp_cmd->add_option("--workers", exp.workers, "override worker count");
    exp_cmd->add_option("--scenario", exp.scenario, "override scenario name");

    BoundsArgs bounds;
    CLI::App* bounds_cmd =
        app.add_subcommand("bounds", "Print a bound table over a parameter sweep");
    bounds_cmd->add_option("--bound", bounds.bound, "bound name")->required();
    bounds_cmd
        ->add_option("--sweep", bounds.sweep, "swept parameter: name=start:stop:count")
        ->required();
    bounds_cmd->add_option("--m", bounds.params.m, "sample size");
    bounds_cmd->add_option("--class-size", bounds.params.class_size,
                           "hypothesis count N");
    bounds_cmd->add_option("--conf", bounds.params.conf, "confidence parameter");
    bounds_cmd->add_option("--theta", bounds.params.theta, "tuning exponent");
    bounds_cmd->add_option("--eta", bounds.params.eta, "error weighting rate");
    bounds_cmd->add_option("--delta", bounds.params.delta, "abstention half-width");
    bounds_cmd->add_option("--lambda", bounds.params.lambda, "deviation level");
    bounds_cmd->add_option("--epsilon", bounds.params.epsilon,
                           "best hypothesis error");
    bounds_cmd->add_option("--gamma", bounds.params.gamma,
                           "risk margin (default ln(8N)/eta)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        std::string command = join_args(argc, argv);
        if (score_cmd->parsed()) return run_score(score, command, out);
        if (exp_cmd->parsed()) return run_experiment_cmd(exp, command, out);
        if (bounds_cmd->parsed()) return run_bounds(bounds, out);
        err << "error: no subcommand\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace ewa::cli
