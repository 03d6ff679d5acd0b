#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "overgen/annotation/study.hpp"

namespace overgen::annotation {

/// Simulated rater for offline runs and tests.
struct SyntheticAnnotator {
    std::string id;
    /// Probability of flipping the planted answer.
    double error_rate = 0.1;
    std::int64_t ms_per_page = 35000;
    /// Always answers the opposite of the planted rule.
    bool adversarial = false;
};

using PlantedRule = std::function<bool(const StudyItem&)>;

/// Drives the annotators round-robin through claim and record on an acceptability study until
/// none of them can claim another page. Returns the number of judgments recorded. Every claim and
/// record uses `now`, so a fixed value gives byte-identical judgments.
std::size_t simulate_acceptability(Study& study, std::span<const SyntheticAnnotator> annotators, const PlantedRule& rule,
                                   std::uint64_t seed, Clock::time_point now = Clock::now());

}  // namespace overgen::annotation
