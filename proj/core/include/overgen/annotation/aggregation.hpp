#pragma once

#include <span>
#include <string>
#include <vector>

#include "overgen/error.hpp"
#include "overgen/types.hpp"

namespace overgen::annotation {

class IncompleteItemError : public Error {
public:
    using Error::Error;
};

/// Counts the non-excluded acceptability judgments of one candidate. Throws IncompleteItemError
/// unless exactly `n_raters` are present.
AggregatedLabel aggregate_acceptability(const std::string& candidate_id, std::span<const Judgment> judgments,
                                        int n_raters = 3);

struct AggregationResult {
    std::vector<AggregatedLabel> labels;
    /// Candidates without exactly n_raters judgments; excluded from `labels`.
    std::vector<std::string> incomplete;
};

/// Aggregates every candidate in `candidate_ids` order. A pure function of the judgment set.
AggregationResult aggregate_all(std::span<const std::string> candidate_ids, std::span<const Judgment> judgments,
                                int n_raters = 3);

/// Per-bucket counts: index i holds the number of labels with n_accept == i.
std::vector<std::size_t> agreement_buckets(std::span<const AggregatedLabel> labels, int n_raters = 3);

std::size_t count_positive(std::span<const AggregatedLabel> labels, Threshold threshold);

}  // namespace overgen::annotation
