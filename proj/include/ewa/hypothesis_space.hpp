#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ewa {

/// A point to classify: a fixed-length list of real coordinates.
/// Coordinate count must be constant across the instances of one run.
using Instance = std::vector<double>;

struct LabeledExample {
    Instance x;
    int label = 1;  // -1 or +1
};

struct Sample {
    std::vector<LabeledExample> examples;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
};

using HypothesisFn = std::function<int(const Instance&)>;

/// Finite indexed family of deterministic {-1,+1} predictors together with
/// nonnegative prior weights summing to 1. Index order is part of the
/// contract: it is the canonical tie-break order for empirical risk
/// minimization and the fixed summation order of every weight sum.
class HypothesisSpace {
  public:
    /// Empty prior means uniform 1/|H|. Throws std::invalid_argument when the
    /// family is empty, a weight is negative, or the weights do not sum to 1
    /// within 1e-9.
    explicit HypothesisSpace(std::vector<HypothesisFn> hypotheses,
                             std::vector<double> prior = {});

    std::size_t size() const { return hypotheses_.size(); }

    /// Evaluates hypothesis h at x. Throws std::logic_error if the predictor
    /// returns anything other than -1 or +1.
    int predict(std::size_t h, const Instance& x) const;

    const std::vector<double>& prior_weights() const { return prior_; }

    /// Same predictors under different prior weights (same validation rules).
    HypothesisSpace with_prior(std::vector<double> prior) const {
        return HypothesisSpace(hypotheses_, std::move(prior));
    }

  private:
    std::vector<HypothesisFn> hypotheses_;
    std::vector<double> prior_;
};

/// One point of a discrete joint distribution over (instance, label) pairs.
struct DistAtom {
    Instance x;
    int label = 1;
    double probability = 0.0;
};

/// Finite-support joint distribution. Atom (x, label) pairs are distinct
/// under exact coordinate equality and probabilities sum to 1 within 1e-12.
struct DiscreteJointDistribution {
    std::vector<DistAtom> atoms;

    /// Throws std::invalid_argument on any violated structural invariant.
    void validate() const;
};

/// Dense {-1,+1} matrix of every hypothesis evaluated at every instance.
struct PredictionMatrix {
    std::size_t num_hypotheses = 0;
    std::size_t num_instances = 0;
    std::vector<std::int8_t> values;  // row-major, hypothesis index is the row

    int at(std::size_t h, std::size_t i) const {
        return values[h * num_instances + i];
    }
};

PredictionMatrix prediction_matrix(const HypothesisSpace& space,
                                   const std::vector<Instance>& instances);

/// Fraction of sample points the hypothesis labels incorrectly.
double empirical_error(const HypothesisFn& h, const Sample& sample);
double empirical_error(const HypothesisSpace& space, std::size_t h,
                       const Sample& sample);
std::vector<double> empirical_errors(const HypothesisSpace& space,
                                     const Sample& sample);

/// Probability mass the hypothesis labels incorrectly.
double true_error(const HypothesisFn& h, const DiscreteJointDistribution& d);
double true_error(const HypothesisSpace& space, std::size_t h,
                  const DiscreteJointDistribution& d);
std::vector<double> true_errors(const HypothesisSpace& space,
                                const DiscreteJointDistribution& d);

// ---- built-in families ----

/// 1-D threshold stumps on coordinate 0. Two per cut point, in cut order:
/// index 2k predicts +1 strictly above cuts[k], index 2k+1 is its flip.
HypothesisSpace stump_space(const std::vector<double>& cuts);

/// Axis-aligned rectangles spanned by two sorted grid-line lists. One
/// hypothesis per (x-interval, y-interval, inside-label) choice; the closed
/// rectangle carries inside_label, the outside its negation.
HypothesisSpace rectangle_space(const std::vector<double>& grid_x,
                                const std::vector<double>& grid_y);

/// All 2^n binary lookup tables over the finite domain {0, .., n-1}, n <= 20.
/// Instances address the domain through coordinate 0 rounded to the nearest
/// integer and clamped into range. Tables are enumerated as bit patterns in
/// index order: table t maps domain point i to +1 when bit (n-1-i) of t is 0.
HypothesisSpace lookup_table_space(int domain_size);

/// Explicit prediction table over a fixed instance list. rows[h][i] is the
/// prediction of hypothesis h at instances[i]; instances not in the list get
/// +1 so every hypothesis stays total.
HypothesisSpace table_space(std::vector<Instance> instances,
                            std::vector<std::vector<std::int8_t>> rows,
                            std::vector<double> prior = {});

// ---- file interfaces ----

/// CSV with header f0,..,f{k-1},label; labels are -1 or +1. Parse errors
/// carry the offending 1-based line number.
Sample load_dataset(const std::string& path);

/// Key/value text, one "atom = f0 f1 .. | label | probability" per line.
DiscreteJointDistribution load_distribution(const std::string& path);

/// Key/value text naming a built-in family: "family = stumps" with "cuts",
/// "family = rectangles" with "grid_x"/"grid_y", or "family = lookup_tables"
/// with "domain_size"; optional "prior_weights" list.
HypothesisSpace load_space(const std::string& path);

}  // namespace ewa
