#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ewa/averaging.hpp"
#include "ewa/bounds.hpp"
#include "ewa/cli.hpp"
#include "ewa/detail/numeric.hpp"

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"ewa"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = ewa::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path test_dir() {
    fs::path dir = fs::temp_directory_path() / "ewa_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
    fs::path p = test_dir() / name;
    std::ofstream out(p);
    out << content;
    return p.string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string stump_pair_space() {
    return write_file("pair.space", "family = stumps\ncuts = 0.5\n");
}

std::string three_row_dataset() {
    return write_file("three.csv",
                      "f0,label\n0.2,+1\n0.8,+1\n0.9,-1\n");
}

}  // namespace

TEST_CASE("cli: score writes per-row log ratios and a manifest") {
    std::string out_csv = (test_dir() / "score_basic.csv").string();
    CliResult r = run_cli({"score", "--dataset", three_row_dataset(), "--space",
                           stump_pair_space(), "--eta", "1", "--delta", "0",
                           "--out", out_csv});
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out.find("scored 3 rows against 2 hypotheses") != std::string::npos);
    CHECK(r.out.find("wrote " + out_csv) != std::string::npos);
    CHECK(r.out.find("predictions: +1 x 1, -1 x 2, abstain x 0") !=
          std::string::npos);

    // two opposite stumps: the log ratio is their empirical error difference
    std::vector<double> errs = {2.0 / 3.0, 1.0 / 3.0};
    std::vector<double> w = {0.5, 0.5};
    ewa::LogRatioResult lr = ewa::log_ratio_partitioned(
        errs, w, 1.0, [](std::size_t h) { return h == 0 ? -1 : 1; });
    CHECK(lr.value == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    std::string third = ewa::detail::fmt_double(lr.value);
    std::string csv = slurp(out_csv);
    CHECK(csv == "row,log_ratio,prediction\n0," + third + ",1\n1,-" + third +
                     ",-1\n2,-" + third + ",-1\n");

    json manifest = json::parse(slurp(out_csv + ".manifest.json"));
    CHECK(manifest["config"]["delta_mode"] == "explicit");
    CHECK(manifest["config"]["eta"] == 1.0);
    CHECK(manifest["outputs"][0] == out_csv);
}

TEST_CASE("cli: score resolves delta modes") {
    std::string out_csv = (test_dir() / "score_auto.csv").string();
    CliResult r = run_cli({"score", "--dataset", three_row_dataset(), "--space",
                           stump_pair_space(), "--eta", "2", "--delta", "auto",
                           "--delta-conf", "0.1", "--out", out_csv});
    REQUIRE(r.code == 0);
    double expected = ewa::abstention_halfwidth(3, 0.1, 2.0);
    CHECK(r.out.find("delta = " + ewa::detail::fmt_double(expected) +
                     " (auto)") != std::string::npos);

    CliResult inf = run_cli({"score", "--dataset", three_row_dataset(),
                             "--space", stump_pair_space(), "--delta", "inf",
                             "--out", (test_dir() / "score_inf.csv").string()});
    REQUIRE(inf.code == 0);
    CHECK(inf.out.find("abstain x 3") != std::string::npos);
    CHECK(inf.out.find("delta = +inf") != std::string::npos);
}

TEST_CASE("cli: score failures name the offending input") {
    std::string bad = write_file("bad.csv", "f0,label\n0.2,+1\n0.8,2\n");
    CliResult r = run_cli({"score", "--dataset", bad, "--space",
                           stump_pair_space()});
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") != std::string::npos);
    CHECK(r.err.find(":3:") != std::string::npos);

    CliResult missing = run_cli({"score", "--dataset",
                                 (test_dir() / "nope.csv").string(), "--space",
                                 stump_pair_space()});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("cannot open") != std::string::npos);

    CliResult neg = run_cli({"score", "--dataset", three_row_dataset(),
                             "--space", stump_pair_space(), "--delta", "-0.5"});
    CHECK(neg.code == 1);
    CHECK(neg.err.find("nonnegative") != std::string::npos);

    CliResult junk = run_cli({"score", "--dataset", three_row_dataset(),
                              "--space", stump_pair_space(), "--delta", "zz"});
    CHECK(junk.code == 1);
    CHECK(junk.err.find("not a number") != std::string::npos);
}

TEST_CASE("cli: experiment runs a config and honors overrides") {
    std::string space = write_file("exp.space", "family = stumps\ncuts = 0.25\n");
    std::string dist = write_file("exp.dist", "atom = 0.5 | +1 | 1.0\n");
    json cfg = {{"scenario", "abstention"}, {"m", 10},      {"trials", 5},
                {"test_points", 8},         {"eta", 1.5},   {"delta", 0.05},
                {"master_seed", 11},        {"space_file", space},
                {"distribution_file", dist}};
    std::string cfg_path = write_file("exp_config.json", cfg.dump());

    fs::path out_a = test_dir() / "exp_a";
    CliResult a = run_cli({"experiment", "--config", cfg_path, "--out",
                           out_a.string()});
    REQUIRE(a.code == 0);
    CHECK(a.out.find("scenario abstention: 5 trials, m = 10") != std::string::npos);
    CHECK(fs::exists(out_a / "report.json"));
    CHECK(fs::exists(out_a / "trials.csv"));
    CHECK(fs::exists(out_a / "manifest.json"));

    // same seed reproduces the bytes; an overridden seed changes them
    fs::path out_b = test_dir() / "exp_b";
    run_cli({"experiment", "--config", cfg_path, "--out", out_b.string()});
    CHECK(slurp((out_a / "trials.csv").string()) ==
          slurp((out_b / "trials.csv").string()));
    fs::path out_c = test_dir() / "exp_c";
    run_cli({"experiment", "--config", cfg_path, "--out", out_c.string(),
             "--seed", "12"});
    CHECK(slurp((out_a / "trials.csv").string()) !=
          slurp((out_c / "trials.csv").string()));

    // trial-count override shows up in the csv row count
    fs::path out_d = test_dir() / "exp_d";
    run_cli({"experiment", "--config", cfg_path, "--out", out_d.string(),
             "--trials", "2"});
    std::string csv = slurp((out_d / "trials.csv").string());
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    CliResult bad_scenario = run_cli({"experiment", "--config", cfg_path,
                                      "--scenario", "bogus"});
    CHECK(bad_scenario.code == 1);
    CHECK(bad_scenario.err.find("valid scenarios") != std::string::npos);

    CliResult bad_seed = run_cli({"experiment", "--config", cfg_path, "--seed",
                                  "abc"});
    CHECK(bad_seed.code == 1);
    CHECK(bad_seed.err.find("--seed") != std::string::npos);

    CliResult no_cfg = run_cli({"experiment", "--config",
                                (test_dir() / "ghost.json").string()});
    CHECK(no_cfg.code == 1);
    CHECK(no_cfg.err.find("cannot open") != std::string::npos);
}

TEST_CASE("cli: bounds sweeps print rows matching the direct functions") {
    CliResult r = run_cli({"bounds", "--bound", "deviation_tail", "--sweep",
                           "lambda=0.1:0.5:5", "--m", "200"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "lambda,value");
    for (int i = 0; i < 5; ++i) {
        REQUIRE(std::getline(lines, line));
        double lambda = 0.1 + 0.1 * i;
        std::string expected = ewa::detail::fmt_double(lambda) + "," +
                               ewa::detail::fmt_double(ewa::deviation_tail(lambda, 200));
        CHECK(line == expected);
    }
    CHECK_FALSE(std::getline(lines, line));

    CliResult tuned = run_cli({"bounds", "--bound", "tuned", "--sweep",
                               "m=10000:10000:1", "--class-size", "100",
                               "--conf", "0.05", "--theta", "0.25"});
    REQUIRE(tuned.code == 0);
    CHECK(tuned.out.find("m,eta,delta\n") == 0);
    ewa::TunedParameters tp = ewa::tuned_parameters(10000, 100, 0.05, 0.25);
    CHECK(tuned.out.find(ewa::detail::fmt_double(tp.eta)) != std::string::npos);
    CHECK(tuned.out.find(ewa::detail::fmt_double(tp.delta)) != std::string::npos);

    // default gamma sits exactly at the validity boundary
    CliResult risk = run_cli({"bounds", "--bound", "risk", "--sweep",
                              "epsilon=0.05:0.05:1", "--eta", "2",
                              "--class-size", "16", "--delta", "0.1"});
    REQUIRE(risk.code == 0);
    CHECK(risk.out.find("epsilon,at_zero,at_two_delta,weak_weight_cap,valid\n") == 0);
    ewa::RiskBounds rb = ewa::log_ratio_risk_bounds(
        0.05, std::log(8.0 * 16.0) / 2.0, 2.0, 0.1, 16.0);
    CHECK(risk.out.find("," + ewa::detail::fmt_double(rb.weak_weight_cap) + ",1\n") !=
          std::string::npos);
    CHECK(rb.weak_weight_cap == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("cli: bounds failures list what is supported") {
    CliResult unknown = run_cli({"bounds", "--bound", "zzz", "--sweep",
                                 "m=1:10:2"});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("unknown bound 'zzz'") != std::string::npos);
    CHECK(unknown.err.find("deviation_tail") != std::string::npos);
    CHECK(unknown.err.find("mistake_abstain") != std::string::npos);

    CliResult param = run_cli({"bounds", "--bound", "deviation_tail", "--sweep",
                               "zeta=1:10:2"});
    CHECK(param.code == 1);
    CHECK(param.err.find("unknown parameter 'zeta'") != std::string::npos);

    CliResult shape = run_cli({"bounds", "--bound", "deviation_tail", "--sweep",
                               "m=1:2"});
    CHECK(shape.code == 1);
    CHECK(shape.err.find("param=start:stop:count") != std::string::npos);

    CliResult theta = run_cli({"bounds", "--bound", "tuned", "--sweep",
                               "m=100:100:1", "--theta", "0.7"});
    CHECK(theta.code == 1);
    CHECK(theta.err.find("(0, 1/2)") != std::string::npos);

    CliResult frac_m = run_cli({"bounds", "--bound", "deviation_tail", "--sweep",
                                "m=2.5:2.5:1"});
    CHECK(frac_m.code == 1);
    CHECK(frac_m.err.find("positive integer") != std::string::npos);
}

TEST_CASE("cli: top-level flags and subcommand requirement") {
    CliResult version = run_cli({"--version"});
    CHECK(version.code == 0);
    CHECK(version.out.find("0.1.0") != std::string::npos);

    CliResult none = run_cli({});
    CHECK(none.code != 0);

    // default output location follows EWA_OUT_DIR
    fs::path env_dir = test_dir() / "env_out";
    fs::create_directories(env_dir);
    setenv("EWA_OUT_DIR", env_dir.string().c_str(), 1);
    CliResult r = run_cli({"score", "--dataset", three_row_dataset(), "--space",
                           stump_pair_space()});
    unsetenv("EWA_OUT_DIR");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(env_dir / "score.csv"));
    CHECK(fs::exists(env_dir / "score.csv.manifest.json"));
}
