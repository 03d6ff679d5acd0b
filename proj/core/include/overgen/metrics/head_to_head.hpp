#pragma once

#include <span>
#include <string>

#include "overgen/types.hpp"

namespace overgen::metrics {

struct PreferenceShares {
    double a = 0.0;
    double tie = 0.0;
    double b = 0.0;
    std::size_t n = 0;
};

struct HeadToHeadTally {
    std::string source_a;
    std::string source_b;
    /// Percent of all responses.
    PreferenceShares per_annotation;
    /// Percent of items; an item goes to an option chosen by a strict majority of its raters, else tie.
    PreferenceShares per_item;
    /// Items without exactly `raters_per_item` responses; left out of both views.
    std::size_t n_incomplete = 0;
};

/// Tallies non-excluded head-to-head judgments, mapping left/right back to sources. Throws
/// PreconditionError for a judgment whose sources are not {source_a, source_b}.
HeadToHeadTally head_to_head_tally(std::span<const Judgment> judgments, const std::string& source_a,
                                   const std::string& source_b, int raters_per_item = 3);

}  // namespace overgen::metrics
