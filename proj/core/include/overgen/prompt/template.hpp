#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "overgen/types.hpp"

namespace overgen::prompt {

enum class TemplateId { nli_qa_style, mcqa_style };

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view text);

/// Joins choices in the given order as "a, b, or c" (the serial comma is kept for two choices too).
std::string format_choices(std::span<const std::string> choices, std::span<const std::size_t> order);

/// A versioned prompt template. Files consist of `[section]` headers followed by verbatim
/// lines; lines starting with `%` are directives. Placeholders are `{premise}`, `{hypothesis}`,
/// `{question}`, `{choices}`, `{label}` and `{explanation}`.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string_view text, const std::string& source = "<template>");
    static PromptTemplate load(const std::filesystem::path& path);
    static const PromptTemplate& builtin(TemplateId id);

    const std::string& name() const noexcept { return name_; }
    int version() const noexcept { return version_; }
    const std::string& header() const noexcept { return header_; }
    const std::string& separator() const noexcept { return separator_; }
    const std::vector<std::string>& stop_sequences() const noexcept { return stops_; }

    /// Label as written in the prompt (e.g. entailment -> "true"). Identity when no mapping exists.
    std::string label_word(const std::string& gold_label) const;
    /// Inverse of label_word over the given label set.
    const std::map<std::string, std::string>& label_words() const noexcept { return label_words_; }

    std::string render_example(const PromptExample& example, std::span<const std::size_t> choice_order) const;
    std::string render_target(const TaskInstance& target, std::span<const std::size_t> choice_order) const;
    /// Label-prediction variants: no "why?" line and no explanation; the target stops at the label slot.
    std::string render_label_example(const TaskInstance& example, std::span<const std::size_t> choice_order) const;
    std::string render_label_target(const TaskInstance& target, std::span<const std::size_t> choice_order) const;

    /// Header, then blocks separated by the separator line.
    std::string join(std::span<const std::string> blocks) const;

private:
    std::string fill(const std::string& body, const TaskInstance& instance, std::span<const std::size_t> order,
                     const std::string* explanation) const;

    std::string name_;
    int version_ = 0;
    std::string header_;
    std::string example_;
    std::string target_;
    std::string label_example_;
    std::string label_target_;
    std::string separator_;
    std::map<std::string, std::string> label_words_;  // gold label -> prompt word
    std::vector<std::string> stops_;
};

std::vector<std::size_t> identity_order(std::size_t n);

/// Table-style NLI rendering with the built-in template.
std::string render_nli_example(const PromptExample& example);
std::string render_nli_target(const TaskInstance& target);

/// Multiple-choice rendering with the built-in template; `choice_order` permutes `choices`.
std::string render_mcqa_example(const PromptExample& example, std::span<const std::size_t> choice_order);
std::string render_mcqa_target(const TaskInstance& target, std::span<const std::size_t> choice_order);

}  // namespace overgen::prompt
