#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ewa/averaging.hpp"
#include "ewa/hypothesis_space.hpp"

namespace ewa {

/// Cap on the number of ordered sample tuples an exact computation may
/// enumerate. Requests beyond it are refused with the offending size named.
struct EnumerationBudget {
    std::uint64_t max_sample_space = 2'000'000;
};

/// Exhaustive enumeration of every ordered m-tuple of distribution atoms.
/// Tuple t is addressed by its base-|atoms| digits, most significant digit
/// first, so index ranges partition the space for parallel work.
class SampleEnumerator {
  public:
    SampleEnumerator(const DiscreteJointDistribution& dist, int m,
                     EnumerationBudget budget = {});

    std::uint64_t count() const { return count_; }
    int sample_size() const { return m_; }

    /// f(atom_indices, probability) for every tuple in [begin, end).
    template <class F>
    void for_each_indices(std::uint64_t begin, std::uint64_t end, F&& f) const {
        const std::size_t k = dist_->atoms.size();
        if (begin >= end) return;
        std::vector<std::uint32_t> digits(static_cast<std::size_t>(m_));
        std::uint64_t idx = begin;
        for (int j = m_ - 1; j >= 0; --j) {
            digits[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(idx % k);
            idx /= k;
        }
        for (std::uint64_t t = begin; t < end; ++t) {
            f(std::span<const std::uint32_t>(digits), probability(digits));
            // odometer increment
            for (int j = m_ - 1; j >= 0; --j) {
                auto& d = digits[static_cast<std::size_t>(j)];
                if (++d < k) break;
                d = 0;
            }
        }
    }

    template <class F>
    void for_each_indices(F&& f) const {
        for_each_indices(0, count_, f);
    }

    /// f(sample, probability) convenience that materializes each tuple.
    template <class F>
    void for_each(F&& f) const {
        for_each_indices([&](std::span<const std::uint32_t> digits, double p) {
            f(materialize(digits), p);
        });
    }

    Sample materialize(std::span<const std::uint32_t> digits) const;
    double probability(std::span<const std::uint32_t> digits) const;

  private:
    const DiscreteJointDistribution* dist_;
    int m_;
    std::uint64_t count_;
};

/// Hypothesis indices voting `side` (+1 or -1) at x.
std::vector<std::size_t> side_subset(const HypothesisSpace& space,
                                     const Instance& x, int side);

/// Exact expectation over all samples of the prior-weighted empirical
/// log-partition of the given hypothesis subset. Tuples are reduced in fixed
/// blocks with compensated summation, so the result is bit-identical for any
/// worker count.
double exact_expected_log_partition(const HypothesisSpace& space,
                                    const DiscreteJointDistribution& dist,
                                    double eta, int m,
                                    const std::vector<std::size_t>& subset,
                                    EnumerationBudget budget = {},
                                    int workers = 1);

/// Exact P[ sign * (true log ratio - empirical log ratio) >= threshold ] at
/// a fixed instance, one probability per threshold. Deviations are taken
/// side by side so structurally empty sides cancel.
std::vector<double> exact_deviation_probabilities(
    const HypothesisSpace& space, const DiscreteJointDistribution& dist,
    double eta, const Instance& x, int m, int sign,
    std::span<const double> thresholds, EnumerationBudget budget = {},
    int workers = 1);

double exact_deviation_probability(const HypothesisSpace& space,
                                   const DiscreteJointDistribution& dist,
                                   double eta, const Instance& x, int m,
                                   int sign, double threshold,
                                   EnumerationBudget budget = {},
                                   int workers = 1);

/// Every (empirical log ratio value, sample probability) pair at x, one per
/// tuple, in tuple order.
std::vector<std::pair<double, double>> exact_log_ratio_distribution(
    const HypothesisSpace& space, const DiscreteJointDistribution& dist,
    double eta, const Instance& x, int m, EnumerationBudget budget = {});

/// Reference log ratio via direct, unshifted exponential sums. Refuses
/// configurations where eta * max empirical error > 700 because the naive
/// exponentials would underflow to zero.
LogRatioResult naive_log_ratio(const HypothesisSpace& space,
                               const Sample& sample, double eta,
                               const Instance& x);

}  // namespace ewa
