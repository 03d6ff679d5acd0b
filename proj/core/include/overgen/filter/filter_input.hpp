#pragma once

#include <string>

#include "overgen/types.hpp"

namespace overgen::filter {

enum class FilterMode { full, explanation_only };

std::string_view to_string(FilterMode mode);
FilterMode parse_filter_mode(std::string_view text);

struct FilterInput {
    /// Question, or premise and hypothesis.
    std::string instance_context;
    std::string gold_label;
    std::string explanation;
    FilterMode mode = FilterMode::full;

    bool operator==(const FilterInput&) const = default;
};

/// Throws PreconditionError: explanation must be non-empty; full mode also needs context and label.
void validate(const FilterInput& input);

/// The classifier's input string, verbatim:
///   explanation only: "explanation: {expl}. Is this explanation good or bad?"
///   full:             "{question} answer: {gold_label}. explanation: {expl}. Is this explanation good or bad?"
/// An explanation already ending in a period keeps it, so "x." becomes "x.." as in the original format.
std::string format_filter_input(const FilterInput& input);

/// The question for multiple-choice; "premise hypothesis" for NLI.
std::string instance_context(const TaskInstance& instance);

FilterInput make_filter_input(const TaskInstance& instance, const std::string& explanation, FilterMode mode);

}  // namespace overgen::filter
