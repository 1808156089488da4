#include "ewa/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "ewa/detail/numeric.hpp"

namespace ewa {

namespace {

constexpr std::uint64_t kBlockTuples = 65536;

std::uint64_t checked_tuple_count(std::size_t num_atoms, int m,
                                  std::uint64_t budget) {
    if (num_atoms == 0) throw std::invalid_argument("enumeration: distribution has no atoms");
    if (m < 1) throw std::invalid_argument("enumeration: sample size must be >= 1");
    long double approx = std::pow(static_cast<long double>(num_atoms),
                                  static_cast<long double>(m));
    std::uint64_t count = 1;
    for (int j = 0; j < m; ++j) {
        if (count > budget / num_atoms) {
            throw std::invalid_argument(
                "enumeration: sample space size " + std::to_string(num_atoms) +
                "^" + std::to_string(m) + " ~= " +
                std::to_string(static_cast<double>(approx)) +
                " exceeds budget " + std::to_string(budget));
        }
        count *= num_atoms;
    }
    return count;
}

// wrong(h, a) == 1 when hypothesis h mislabels atom a.
struct MistakeMatrix {
    std::size_t num_atoms = 0;
    std::vector<std::int8_t> values;  // row-major by hypothesis

    int at(std::size_t h, std::size_t a) const {
        return values[h * num_atoms + a];
    }
};

MistakeMatrix mistake_matrix(const HypothesisSpace& space,
                             const DiscreteJointDistribution& dist) {
    MistakeMatrix m;
    m.num_atoms = dist.atoms.size();
    m.values.resize(space.size() * m.num_atoms);
    for (std::size_t h = 0; h < space.size(); ++h) {
        for (std::size_t a = 0; a < m.num_atoms; ++a) {
            int p = space.predict(h, dist.atoms[a].x);
            m.values[h * m.num_atoms + a] =
                static_cast<std::int8_t>(p != dist.atoms[a].label ? 1 : 0);
        }
    }
    return m;
}

// Runs body(block_index) for every fixed-size tuple block, block w, w+W, ..
// on worker w. Block boundaries never depend on the worker count, so any
// block-indexed output is reproducible for every `workers` value.
template <class Body>
void run_blocked(std::uint64_t nblocks, int workers, Body&& body) {
    int w = std::max(1, workers);
    std::uint64_t cap = std::min<std::uint64_t>(static_cast<std::uint64_t>(w), nblocks);
    if (cap <= 1) {
        for (std::uint64_t b = 0; b < nblocks; ++b) body(b);
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(cap));
    for (std::uint64_t t = 0; t < cap; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (std::uint64_t b = t; b < nblocks; b += cap) body(b);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

SampleEnumerator::SampleEnumerator(const DiscreteJointDistribution& dist, int m,
                                   EnumerationBudget budget)
    : dist_(&dist), m_(m) {
    dist.validate();
    count_ = checked_tuple_count(dist.atoms.size(), m, budget.max_sample_space);
}

Sample SampleEnumerator::materialize(std::span<const std::uint32_t> digits) const {
    Sample s;
    s.examples.reserve(digits.size());
    for (auto d : digits) {
        const auto& atom = dist_->atoms[d];
        s.examples.push_back({atom.x, atom.label});
    }
    return s;
}

double SampleEnumerator::probability(std::span<const std::uint32_t> digits) const {
    double p = 1.0;
    for (auto d : digits) p *= dist_->atoms[d].probability;
    return p;
}

std::vector<std::size_t> side_subset(const HypothesisSpace& space,
                                     const Instance& x, int side) {
    if (side != 1 && side != -1) {
        throw std::invalid_argument("side subset: side must be -1 or +1");
    }
    std::vector<std::size_t> out;
    for (std::size_t h = 0; h < space.size(); ++h) {
        if (space.predict(h, x) == side) out.push_back(h);
    }
    return out;
}

double exact_expected_log_partition(const HypothesisSpace& space,
                                    const DiscreteJointDistribution& dist,
                                    double eta, int m,
                                    const std::vector<std::size_t>& subset,
                                    EnumerationBudget budget, int workers) {
    if (subset.empty()) {
        throw std::invalid_argument("expected log partition: empty hypothesis subset");
    }
    double subset_weight = 0.0;
    for (auto h : subset) {
        if (h >= space.size()) {
            throw std::invalid_argument("expected log partition: hypothesis index out of range");
        }
        subset_weight += space.prior_weights()[h];
    }
    if (!(subset_weight > 0.0)) {
        throw std::invalid_argument("expected log partition: subset carries no prior weight");
    }

    SampleEnumerator enumerator(dist, m, budget);
    const std::size_t k = dist.atoms.size();
    const std::size_t s_count = subset.size();

    MistakeMatrix full = mistake_matrix(space, dist);
    std::vector<std::int8_t> wrong(s_count * k);
    std::vector<double> wsub(s_count);
    for (std::size_t j = 0; j < s_count; ++j) {
        wsub[j] = space.prior_weights()[subset[j]];
        for (std::size_t a = 0; a < k; ++a) {
            wrong[j * k + a] = static_cast<std::int8_t>(full.at(subset[j], a));
        }
    }

    const std::uint64_t count = enumerator.count();
    const std::uint64_t nblocks = (count + kBlockTuples - 1) / kBlockTuples;
    std::vector<double> block_values(nblocks, 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);

    run_blocked(nblocks, workers, [&](std::uint64_t b) {
        std::vector<std::uint32_t> cnt(k);
        std::vector<double> errs(s_count);
        detail::CompensatedSum acc;
        std::uint64_t begin = b * kBlockTuples;
        std::uint64_t end = std::min(count, begin + kBlockTuples);
        enumerator.for_each_indices(begin, end,
                                    [&](std::span<const std::uint32_t> digits, double p) {
            std::fill(cnt.begin(), cnt.end(), 0u);
            for (auto d : digits) ++cnt[d];
            for (std::size_t j = 0; j < s_count; ++j) {
                std::uint32_t wrong_count = 0;
                for (std::size_t a = 0; a < k; ++a) {
                    wrong_count += cnt[a] * static_cast<std::uint32_t>(wrong[j * k + a]);
                }
                errs[j] = wrong_count * inv_m;
            }
            acc.add(p * log_partition(errs, wsub, eta));
        });
        block_values[b] = acc.value();
    });

    detail::CompensatedSum total;
    for (auto v : block_values) total.add(v);
    return total.value();
}

std::vector<double> exact_deviation_probabilities(
    const HypothesisSpace& space, const DiscreteJointDistribution& dist,
    double eta, const Instance& x, int m, int sign,
    std::span<const double> thresholds, EnumerationBudget budget, int workers) {
    if (sign != 1 && sign != -1) {
        throw std::invalid_argument("deviation probability: sign must be -1 or +1");
    }
    if (thresholds.empty()) return {};

    SampleEnumerator enumerator(dist, m, budget);
    const std::size_t k = dist.atoms.size();
    const std::size_t n = space.size();
    MistakeMatrix wrong = mistake_matrix(space, dist);
    std::vector<std::int8_t> sides(n);
    for (std::size_t h = 0; h < n; ++h) {
        sides[h] = static_cast<std::int8_t>(space.predict(h, x));
    }
    const std::vector<double>& weights = space.prior_weights();
    LogRatioResult truth = true_log_ratio(space, dist, eta, x);

    const std::uint64_t count = enumerator.count();
    const std::uint64_t nblocks = (count + kBlockTuples - 1) / kBlockTuples;
    const std::size_t t_count = thresholds.size();
    std::vector<double> block_mass(nblocks * t_count, 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);

    run_blocked(nblocks, workers, [&](std::uint64_t b) {
        std::vector<std::uint32_t> cnt(k);
        std::vector<double> errs(n);
        std::vector<detail::CompensatedSum> acc(t_count);
        std::uint64_t begin = b * kBlockTuples;
        std::uint64_t end = std::min(count, begin + kBlockTuples);
        enumerator.for_each_indices(begin, end,
                                    [&](std::span<const std::uint32_t> digits, double p) {
            std::fill(cnt.begin(), cnt.end(), 0u);
            for (auto d : digits) ++cnt[d];
            for (std::size_t h = 0; h < n; ++h) {
                std::uint32_t wrong_count = 0;
                for (std::size_t a = 0; a < k; ++a) {
                    wrong_count += cnt[a] * static_cast<std::uint32_t>(wrong.at(h, a));
                }
                errs[h] = wrong_count * inv_m;
            }
            LogRatioResult hat = log_ratio_partitioned(
                errs, weights, eta, [&](std::size_t h) { return sides[h]; });
            double dev = sign * log_ratio_deviation(truth, hat);
            for (std::size_t t = 0; t < t_count; ++t) {
                if (dev >= thresholds[t]) acc[t].add(p);
            }
        });
        for (std::size_t t = 0; t < t_count; ++t) {
            block_mass[b * t_count + t] = acc[t].value();
        }
    });

    std::vector<double> out(t_count, 0.0);
    for (std::size_t t = 0; t < t_count; ++t) {
        detail::CompensatedSum total;
        for (std::uint64_t b = 0; b < nblocks; ++b) total.add(block_mass[b * t_count + t]);
        out[t] = total.value();
    }
    return out;
}

double exact_deviation_probability(const HypothesisSpace& space,
                                   const DiscreteJointDistribution& dist,
                                   double eta, const Instance& x, int m,
                                   int sign, double threshold,
                                   EnumerationBudget budget, int workers) {
    double thresholds[1] = {threshold};
    return exact_deviation_probabilities(space, dist, eta, x, m, sign,
                                         thresholds, budget, workers)[0];
}

std::vector<std::pair<double, double>> exact_log_ratio_distribution(
    const HypothesisSpace& space, const DiscreteJointDistribution& dist,
    double eta, const Instance& x, int m, EnumerationBudget budget) {
    SampleEnumerator enumerator(dist, m, budget);
    const std::size_t k = dist.atoms.size();
    const std::size_t n = space.size();
    MistakeMatrix wrong = mistake_matrix(space, dist);
    std::vector<std::int8_t> sides(n);
    for (std::size_t h = 0; h < n; ++h) {
        sides[h] = static_cast<std::int8_t>(space.predict(h, x));
    }
    const std::vector<double>& weights = space.prior_weights();
    const double inv_m = 1.0 / static_cast<double>(m);

    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(enumerator.count()));
    std::vector<std::uint32_t> cnt(k);
    std::vector<double> errs(n);
    enumerator.for_each_indices([&](std::span<const std::uint32_t> digits, double p) {
        std::fill(cnt.begin(), cnt.end(), 0u);
        for (auto d : digits) ++cnt[d];
        for (std::size_t h = 0; h < n; ++h) {
            std::uint32_t wrong_count = 0;
            for (std::size_t a = 0; a < k; ++a) {
                wrong_count += cnt[a] * static_cast<std::uint32_t>(wrong.at(h, a));
            }
            errs[h] = wrong_count * inv_m;
        }
        LogRatioResult hat = log_ratio_partitioned(
            errs, weights, eta, [&](std::size_t h) { return sides[h]; });
        out.emplace_back(hat.value, p);
    });
    return out;
}

LogRatioResult naive_log_ratio(const HypothesisSpace& space,
                               const Sample& sample, double eta,
                               const Instance& x) {
    if (!(eta > 0.0)) throw std::invalid_argument("naive log ratio: eta must be positive");
    std::vector<double> errs = empirical_errors(space, sample);
    double max_err = *std::max_element(errs.begin(), errs.end());
    if (eta * max_err > 700.0) {
        throw std::domain_error(
            "naive log ratio refused: eta * max empirical error = " +
            std::to_string(eta * max_err) +
            " > 700 would underflow the unshifted exponentials");
    }
    const std::vector<double>& weights = space.prior_weights();
    double sum_plus = 0.0;
    double sum_minus = 0.0;
    for (std::size_t h = 0; h < space.size(); ++h) {
        double term = weights[h] * std::exp(-eta * errs[h]);
        if (space.predict(h, x) > 0) {
            sum_plus += term;
        } else {
            sum_minus += term;
        }
    }
    LogRatioResult r;
    r.log_weight_plus = std::log(sum_plus) / eta;
    r.log_weight_minus = std::log(sum_minus) / eta;
    r.value = std::log(sum_plus / sum_minus) / eta;
    return r;
}

}  // namespace ewa
