#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/filter/filter_input.hpp"
#include "overgen/types.hpp"

namespace overgen::filter {

enum class LabelScheme {
    with_agreement,     // positive iff at least 2 of 3 raters accepted
    without_agreement,  // the answer of one randomly drawn rater
};

std::string_view to_string(LabelScheme scheme);
LabelScheme parse_label_scheme(std::string_view text);

struct TrainingExample {
    std::string candidate_id;
    std::string instance_id;
    Split split = Split::train;
    FilterInput input;
    bool label = false;

    bool operator==(const TrainingExample&) const = default;
};

struct TrainingSet {
    LabelScheme scheme = LabelScheme::with_agreement;
    FilterMode mode = FilterMode::full;
    std::vector<TrainingExample> examples;
    /// Candidates left out because their annotation was incomplete.
    std::size_t n_incomplete = 0;
    /// Degenerate (empty) candidates left out.
    std::size_t n_degenerate = 0;

    std::size_t count(Split split) const;
    std::size_t positives(Split split) const;
};

/// Builds labelled filter inputs. Each candidate takes its instance's split, so the five candidates of an
/// instance always land together. Candidates without an aggregated label are skipped and counted.
/// without_agreement draws one non-excluded acceptability judgment per candidate from a stream derived from
/// `seed` and the candidate id, so the draw does not depend on input order.
TrainingSet build_training_set(std::span<const TaskInstance> instances,
                               std::span<const ExplanationCandidate> candidates,
                               std::span<const AggregatedLabel> labels, std::span<const Judgment> judgments,
                               LabelScheme scheme, FilterMode mode, std::uint64_t seed);

/// Throws InvariantError if an instance's examples appear in more than one split.
void check_split_integrity(const TrainingSet& set);

void to_json(nlohmann::json& j, const FilterInput& v);
void from_json(const nlohmann::json& j, FilterInput& v);
void to_json(nlohmann::json& j, const TrainingExample& v);
void from_json(const nlohmann::json& j, TrainingExample& v);

inline constexpr std::string_view kTrainingSetEntity = "training_set";

/// One example per line, preceded by a header carrying the scheme, mode and skip counts.
void save_training_set(const std::filesystem::path& path, const TrainingSet& set);
TrainingSet load_training_set(const std::filesystem::path& path);

}  // namespace overgen::filter
