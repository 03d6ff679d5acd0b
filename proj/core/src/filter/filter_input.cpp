#include "overgen/filter/filter_input.hpp"

#include <algorithm>
#include <cctype>

#include "overgen/error.hpp"

namespace overgen::filter {

std::string_view to_string(FilterMode mode) { return mode == FilterMode::full ? "full" : "explanation-only"; }

FilterMode parse_filter_mode(std::string_view text) {
    if (text == "full") return FilterMode::full;
    if (text == "explanation-only" || text == "explanation_only") return FilterMode::explanation_only;
    throw PreconditionError("unknown filter mode '" + std::string(text) + "'");
}

namespace {

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void validate(const FilterInput& input) {
    if (blank(input.explanation)) throw PreconditionError("filter input has an empty explanation");
    if (input.mode == FilterMode::full && (blank(input.instance_context) || blank(input.gold_label)))
        throw PreconditionError("full-mode filter input needs context and gold label");
}

std::string format_filter_input(const FilterInput& input) {
    validate(input);
    std::string out;
    if (input.mode == FilterMode::full) {
        out.reserve(input.instance_context.size() + input.gold_label.size() + input.explanation.size() + 64);
        out += input.instance_context;
        out += " answer: ";
        out += input.gold_label;
        out += ". ";
    }
    out += "explanation: ";
    out += input.explanation;
    out += ". Is this explanation good or bad?";
    return out;
}

std::string instance_context(const TaskInstance& instance) {
    return instance.task == Task::mcqa ? instance.question : instance.premise + " " + instance.hypothesis;
}

FilterInput make_filter_input(const TaskInstance& instance, const std::string& explanation, FilterMode mode) {
    return FilterInput{instance_context(instance), instance.gold_label, explanation, mode};
}

}  // namespace overgen::filter
