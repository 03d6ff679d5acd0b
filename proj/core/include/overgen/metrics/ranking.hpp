#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "overgen/types.hpp"

namespace overgen::metrics {

struct ScoredLabel {
    double score;
    bool positive;
};

struct ApDetail {
    /// Percent; nullopt when there are no positives.
    std::optional<double> ap;
    /// Tied positives ranked below / above tied negatives.
    std::optional<double> pessimistic;
    std::optional<double> optimistic;
    std::size_t n = 0;
    std::size_t n_positive = 0;
    /// Items whose score is shared with an item of the other label.
    std::size_t n_mixed_ties = 0;
};

/// Average precision in percent: sum over distinct score thresholds, in descending order, of
/// (recall gain) x (precision at the threshold). Items with equal scores enter together, so the result
/// does not depend on input order; with no ties it is the mean precision at each positive's rank.
/// Throws PreconditionError on NaN scores.
std::optional<double> average_precision(std::span<const ScoredLabel> items);
ApDetail average_precision_detail(std::span<const ScoredLabel> items);

/// AP of a scorer giving every candidate the same score: 100 x prevalence. Equal, bit for bit, to
/// average_precision over constant scores.
std::optional<double> constant_baseline(std::span<const bool> labels);
std::optional<double> constant_baseline(std::size_t n_positive, std::size_t n);

struct EvalCandidate {
    std::string candidate_id;
    int rank = 0;  // decode rank: 0 greedy, i for sample i
    bool positive = false;
};

struct EvalInstance {
    std::string instance_id;
    std::vector<EvalCandidate> candidates;
};

struct EvalSet {
    std::vector<EvalInstance> instances;
    Threshold threshold = Threshold::at_3of3;
    /// Candidates without an aggregated label, counted as not acceptable.
    std::size_t n_unlabeled = 0;

    std::size_t n_candidates() const;
    std::size_t n_positive() const;
};

/// Groups candidates by instance (first-appearance order) and marks positives at `threshold`.
EvalSet build_eval_set(std::span<const ExplanationCandidate> candidates, std::span<const AggregatedLabel> labels,
                       Threshold threshold);

/// instance id -> selected candidate id.
using SelectionMap = std::unordered_map<std::string, std::string>;

/// 100 x (instances whose selected candidate is positive) / instances. Throws PreconditionError for an
/// instance without a selection or with a selection outside its candidates.
double select1_accuracy(const EvalSet& set, const SelectionMap& selected);

/// Explanation-level AP over every candidate; unscored candidates rank below all scored ones.
std::optional<double> explanation_ap(const EvalSet& set, const std::unordered_map<std::string, double>& scores);
ApDetail explanation_ap_detail(const EvalSet& set, const std::unordered_map<std::string, double>& scores);

/// Percent of instances with at least one positive candidate.
double oracle_select1(const EvalSet& set);

/// Select-1 accuracy of always choosing the greedy candidate.
double greedy_select1(const EvalSet& set);

struct Estimate {
    double mean = 0.0;
    /// Standard error of the mean across trials.
    double stderr_ = 0.0;
    int n_trials = 0;
};

struct RandomBaseline {
    Estimate select1;
    Estimate ap;
};

/// Uniform random selector and uniform random scorer, each trial seeded from `seed` and the trial index.
/// Trials run in parallel; results do not depend on scheduling. Throws PreconditionError if n_trials < 2.
RandomBaseline random_baseline(const EvalSet& set, int n_trials, std::uint64_t seed);

/// Exact expectation of the random selector: mean over instances of the positive share.
double random_select1_expectation(const EvalSet& set);

}  // namespace overgen::metrics
