#include "ewa/hypothesis_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace ewa {

namespace {

constexpr double kPriorSumTolerance = 1e-9;
constexpr double kProbabilitySumTolerance = 1e-12;

[[noreturn]] void fail_arg(const std::string& msg) {
    throw std::invalid_argument(msg);
}

}  // namespace

HypothesisSpace::HypothesisSpace(std::vector<HypothesisFn> hypotheses,
                                 std::vector<double> prior)
    : hypotheses_(std::move(hypotheses)), prior_(std::move(prior)) {
    if (hypotheses_.empty()) fail_arg("hypothesis space must be nonempty");
    if (prior_.empty()) {
        prior_.assign(hypotheses_.size(), 1.0 / static_cast<double>(hypotheses_.size()));
        return;
    }
    if (prior_.size() != hypotheses_.size()) {
        fail_arg("prior weight count " + std::to_string(prior_.size()) +
                 " does not match hypothesis count " + std::to_string(hypotheses_.size()));
    }
    double sum = 0.0;
    for (double w : prior_) {
        if (!(w >= 0.0)) fail_arg("prior weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kPriorSumTolerance) {
        fail_arg("prior weights sum to " + std::to_string(sum) + ", expected 1");
    }
}

int HypothesisSpace::predict(std::size_t h, const Instance& x) const {
    int p = hypotheses_.at(h)(x);
    if (p != 1 && p != -1) {
        throw std::logic_error("hypothesis " + std::to_string(h) +
                               " returned " + std::to_string(p) +
                               ", predictions must be -1 or +1");
    }
    return p;
}

void DiscreteJointDistribution::validate() const {
    if (atoms.empty()) fail_arg("distribution must have at least one atom");
    double sum = 0.0;
    std::size_t width = atoms.front().x.size();
    for (const DistAtom& a : atoms) {
        if (a.label != 1 && a.label != -1) fail_arg("atom labels must be -1 or +1");
        if (!(a.probability >= 0.0)) fail_arg("atom probabilities must be nonnegative");
        if (a.x.size() != width) fail_arg("atom instances must share one coordinate count");
        sum += a.probability;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
        fail_arg("atom probabilities sum to " + std::to_string(sum) + ", expected 1");
    }
    // distinctness under exact coordinate equality
    std::vector<std::size_t> order(atoms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto key_less = [&](std::size_t i, std::size_t j) {
        if (atoms[i].x != atoms[j].x) return atoms[i].x < atoms[j].x;
        return atoms[i].label < atoms[j].label;
    };
    std::sort(order.begin(), order.end(), key_less);
    for (std::size_t i = 1; i < order.size(); ++i) {
        const DistAtom& a = atoms[order[i - 1]];
        const DistAtom& b = atoms[order[i]];
        if (a.x == b.x && a.label == b.label) {
            fail_arg("duplicate (instance, label) atom in distribution");
        }
    }
}

PredictionMatrix prediction_matrix(const HypothesisSpace& space,
                                   const std::vector<Instance>& instances) {
    PredictionMatrix m;
    m.num_hypotheses = space.size();
    m.num_instances = instances.size();
    m.values.resize(m.num_hypotheses * m.num_instances);
    for (std::size_t h = 0; h < m.num_hypotheses; ++h) {
        for (std::size_t i = 0; i < m.num_instances; ++i) {
            m.values[h * m.num_instances + i] =
                static_cast<std::int8_t>(space.predict(h, instances[i]));
        }
    }
    return m;
}

double empirical_error(const HypothesisFn& h, const Sample& sample) {
    if (sample.empty()) fail_arg("empirical error needs a nonempty sample");
    std::size_t wrong = 0;
    for (const LabeledExample& e : sample.examples) {
        if (h(e.x) != e.label) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(sample.size());
}

double empirical_error(const HypothesisSpace& space, std::size_t h,
                       const Sample& sample) {
    if (sample.empty()) fail_arg("empirical error needs a nonempty sample");
    std::size_t wrong = 0;
    for (const LabeledExample& e : sample.examples) {
        if (space.predict(h, e.x) != e.label) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(sample.size());
}

std::vector<double> empirical_errors(const HypothesisSpace& space,
                                     const Sample& sample) {
    std::vector<double> errs(space.size());
    for (std::size_t h = 0; h < space.size(); ++h) {
        errs[h] = empirical_error(space, h, sample);
    }
    return errs;
}

double true_error(const HypothesisFn& h, const DiscreteJointDistribution& d) {
    double mass = 0.0;
    for (const DistAtom& a : d.atoms) {
        if (h(a.x) != a.label) mass += a.probability;
    }
    return mass;
}

double true_error(const HypothesisSpace& space, std::size_t h,
                  const DiscreteJointDistribution& d) {
    double mass = 0.0;
    for (const DistAtom& a : d.atoms) {
        if (space.predict(h, a.x) != a.label) mass += a.probability;
    }
    return mass;
}

std::vector<double> true_errors(const HypothesisSpace& space,
                                const DiscreteJointDistribution& d) {
    std::vector<double> errs(space.size());
    for (std::size_t h = 0; h < space.size(); ++h) {
        errs[h] = true_error(space, h, d);
    }
    return errs;
}

HypothesisSpace stump_space(const std::vector<double>& cuts) {
    if (cuts.empty()) fail_arg("stump family needs at least one cut point");
    std::vector<HypothesisFn> fns;
    fns.reserve(cuts.size() * 2);
    for (double c : cuts) {
        fns.push_back([c](const Instance& x) { return x.at(0) > c ? 1 : -1; });
        fns.push_back([c](const Instance& x) { return x.at(0) > c ? -1 : 1; });
    }
    return HypothesisSpace(std::move(fns));
}

HypothesisSpace rectangle_space(const std::vector<double>& grid_x,
                                const std::vector<double>& grid_y) {
    if (grid_x.size() < 2 || grid_y.size() < 2) {
        fail_arg("rectangle family needs at least two grid lines per axis");
    }
    if (!std::is_sorted(grid_x.begin(), grid_x.end()) ||
        !std::is_sorted(grid_y.begin(), grid_y.end())) {
        fail_arg("rectangle grid lines must be sorted");
    }
    std::vector<HypothesisFn> fns;
    for (std::size_t i1 = 0; i1 < grid_x.size(); ++i1) {
        for (std::size_t i2 = i1 + 1; i2 < grid_x.size(); ++i2) {
            for (std::size_t j1 = 0; j1 < grid_y.size(); ++j1) {
                for (std::size_t j2 = j1 + 1; j2 < grid_y.size(); ++j2) {
                    const double x0 = grid_x[i1], x1 = grid_x[i2];
                    const double y0 = grid_y[j1], y1 = grid_y[j2];
                    for (int inside : {1, -1}) {
                        fns.push_back([x0, x1, y0, y1, inside](const Instance& p) {
                            bool in = p.at(0) >= x0 && p.at(0) <= x1 &&
                                      p.at(1) >= y0 && p.at(1) <= y1;
                            return in ? inside : -inside;
                        });
                    }
                }
            }
        }
    }
    return HypothesisSpace(std::move(fns));
}

namespace {

int lookup_domain_index(const Instance& x, int domain_size) {
    long i = std::lround(x.at(0));
    if (i < 0) i = 0;
    if (i >= domain_size) i = domain_size - 1;
    return static_cast<int>(i);
}

}  // namespace

HypothesisSpace lookup_table_space(int domain_size) {
    if (domain_size < 1 || domain_size > 20) {
        fail_arg("lookup table domain size must be in [1, 20], got " +
                 std::to_string(domain_size));
    }
    const std::uint32_t count = 1u << domain_size;
    std::vector<HypothesisFn> fns;
    fns.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        fns.push_back([t, domain_size](const Instance& x) {
            int i = lookup_domain_index(x, domain_size);
            return ((t >> (domain_size - 1 - i)) & 1u) ? -1 : 1;
        });
    }
    return HypothesisSpace(std::move(fns));
}

HypothesisSpace table_space(std::vector<Instance> instances,
                            std::vector<std::vector<std::int8_t>> rows,
                            std::vector<double> prior) {
    if (instances.empty()) fail_arg("table space needs at least one instance");
    auto index = std::make_shared<std::map<Instance, std::size_t>>();
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (!index->emplace(instances[i], i).second) {
            fail_arg("table space instances must be distinct");
        }
    }
    std::vector<HypothesisFn> fns;
    fns.reserve(rows.size());
    for (std::size_t h = 0; h < rows.size(); ++h) {
        if (rows[h].size() != instances.size()) {
            fail_arg("table row " + std::to_string(h) + " has wrong width");
        }
        for (std::int8_t v : rows[h]) {
            if (v != 1 && v != -1) fail_arg("table entries must be -1 or +1");
        }
        auto row = std::make_shared<std::vector<std::int8_t>>(std::move(rows[h]));
        fns.push_back([index, row](const Instance& x) -> int {
            auto it = index->find(x);
            if (it == index->end()) return 1;  // total off the listed domain
            return (*row)[it->second];
        });
    }
    return HypothesisSpace(std::move(fns), std::move(prior));
}

// ---- file parsing ----

namespace {

[[noreturn]] void fail_parse(const std::string& path, std::size_t line,
                             const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

double parse_real(const std::string& tok, const std::string& path, std::size_t line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        fail_parse(path, line, "not a number: '" + tok + "'");
    }
    if (pos != tok.size()) fail_parse(path, line, "trailing junk in number: '" + tok + "'");
    return v;
}

int parse_label(const std::string& tok, const std::string& path, std::size_t line) {
    if (tok == "1" || tok == "+1") return 1;
    if (tok == "-1") return -1;
    fail_parse(path, line, "label must be -1 or +1, got '" + tok + "'");
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::ifstream open_or_fail(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    return in;
}

// "key = value" lines, '#' comments, blank lines skipped
std::vector<std::pair<std::string, std::string>> read_kv_lines(
    const std::string& path, std::vector<std::size_t>* line_numbers) {
    std::ifstream in = open_or_fail(path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) fail_parse(path, lineno, "expected 'key = value'");
        out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        if (line_numbers) line_numbers->push_back(lineno);
    }
    return out;
}

}  // namespace

Sample load_dataset(const std::string& path) {
    std::ifstream in = open_or_fail(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::vector<std::string> header = split(trim(line), ',');
    if (header.size() < 2 || trim(header.back()) != "label") {
        fail_parse(path, 1, "header must be f0,..,f{k-1},label");
    }
    const std::size_t width = header.size() - 1;
    for (std::size_t i = 0; i < width; ++i) {
        if (trim(header[i]) != "f" + std::to_string(i)) {
            fail_parse(path, 1, "feature column " + std::to_string(i) +
                                    " must be named f" + std::to_string(i));
        }
    }
    Sample sample;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        std::vector<std::string> cells = split(t, ',');
        if (cells.size() != header.size()) {
            fail_parse(path, lineno, "expected " + std::to_string(header.size()) +
                                         " columns, got " + std::to_string(cells.size()));
        }
        LabeledExample e;
        e.x.reserve(width);
        for (std::size_t i = 0; i < width; ++i) {
            e.x.push_back(parse_real(trim(cells[i]), path, lineno));
        }
        e.label = parse_label(trim(cells.back()), path, lineno);
        sample.examples.push_back(std::move(e));
    }
    if (sample.empty()) throw std::runtime_error(path + ": dataset has no rows");
    return sample;
}

DiscreteJointDistribution load_distribution(const std::string& path) {
    std::vector<std::size_t> lines;
    auto kv = read_kv_lines(path, &lines);
    DiscreteJointDistribution dist;
    for (std::size_t i = 0; i < kv.size(); ++i) {
        if (kv[i].first != "atom") {
            fail_parse(path, lines[i], "unknown key '" + kv[i].first + "', expected 'atom'");
        }
        std::vector<std::string> parts = split(kv[i].second, '|');
        if (parts.size() != 3) {
            fail_parse(path, lines[i], "atom needs 'features | label | probability'");
        }
        DistAtom a;
        for (const std::string& tok : split_ws(parts[0])) {
            a.x.push_back(parse_real(tok, path, lines[i]));
        }
        if (a.x.empty()) fail_parse(path, lines[i], "atom needs at least one coordinate");
        a.label = parse_label(trim(parts[1]), path, lines[i]);
        a.probability = parse_real(trim(parts[2]), path, lines[i]);
        dist.atoms.push_back(std::move(a));
    }
    try {
        dist.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return dist;
}

HypothesisSpace load_space(const std::string& path) {
    auto kv = read_kv_lines(path, nullptr);
    std::map<std::string, std::string> m;
    for (auto& [k, v] : kv) {
        if (!m.emplace(k, v).second) {
            throw std::runtime_error(path + ": duplicate key '" + k + "'");
        }
    }
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = m.find(k);
        if (it == m.end()) throw std::runtime_error(path + ": missing key '" + k + "'");
        return it->second;
    };
    auto reals = [&](const std::string& text) {
        std::vector<double> out;
        for (const std::string& tok : split_ws(text)) out.push_back(parse_real(tok, path, 0));
        return out;
    };

    const std::string family = need("family");
    std::vector<double> prior;
    if (auto it = m.find("prior_weights"); it != m.end()) prior = reals(it->second);

    static const char* known[] = {"family",      "cuts",        "grid_x",
                                  "grid_y",      "domain_size", "prior_weights"};
    for (auto& [k, v] : m) {
        (void)v;
        bool ok = false;
        for (const char* name : known) ok = ok || (k == name);
        if (!ok) throw std::runtime_error(path + ": unknown key '" + k + "'");
    }

    auto finish = [&](HypothesisSpace base) {
        if (prior.empty()) return base;
        try {
            return base.with_prior(std::move(prior));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path + ": " + e.what());
        }
    };

    try {
        if (family == "stumps") return finish(stump_space(reals(need("cuts"))));
        if (family == "rectangles") {
            return finish(rectangle_space(reals(need("grid_x")), reals(need("grid_y"))));
        }
        if (family == "lookup_tables") {
            double n = parse_real(need("domain_size"), path, 0);
            return finish(lookup_table_space(static_cast<int>(n)));
        }
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    throw std::runtime_error(path + ": unknown family '" + family +
                             "', expected stumps, rectangles, or lookup_tables");
}

}  // namespace ewa
