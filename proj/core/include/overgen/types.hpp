#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace overgen {

enum class Task { mcqa, nli };
enum class Split { train, dev, test, test2 };

std::string_view to_string(Task task);
std::string_view to_string(Split split);
Task parse_task(std::string_view text);
Split parse_split(std::string_view text);

inline constexpr std::array<std::string_view, 3> kNliLabels{"entailment", "contradiction", "neutral"};

/// One classification problem: a multiple-choice question or a premise/hypothesis pair.
struct TaskInstance {
    std::string id;
    Task task = Task::mcqa;
    std::string question;    // MCQA
    std::string premise;     // NLI
    std::string hypothesis;  // NLI
    std::vector<std::string> choices;  // MCQA, in dataset order
    std::string gold_label;
    Split split = Split::train;

    bool operator==(const TaskInstance&) const = default;
};

/// Throws InvariantError naming the instance id.
void validate(const TaskInstance& instance);

/// A pool example with its human-written explanation.
struct PromptExample {
    TaskInstance instance;
    std::string explanation;

    bool operator==(const PromptExample&) const = default;
};

void validate(const PromptExample& example);

/// How a candidate was decoded. Rank 0 is greedy, rank i >= 1 is the i-th sample.
class Decode {
public:
    static Decode greedy() { return Decode{0}; }
    static Decode sampled(int index);

    bool is_greedy() const noexcept { return rank_ == 0; }
    int sample_index() const noexcept { return rank_; }
    int rank() const noexcept { return rank_; }

    std::string to_string() const;
    static Decode parse(std::string_view text);

    bool operator==(const Decode&) const = default;
    auto operator<=>(const Decode&) const = default;

private:
    explicit Decode(int rank) : rank_(rank) {}
    int rank_ = 0;
};

struct ExplanationCandidate {
    std::string candidate_id;
    std::string instance_id;
    std::string text;
    Decode decode = Decode::greedy();
    std::vector<double> token_logprobs;
    double total_logprob = 0.0;
    std::string prompt_fingerprint;
    /// Empty or whitespace-only completion kept for the record.
    bool degenerate = false;

    bool operator==(const ExplanationCandidate&) const = default;
};

void validate(const ExplanationCandidate& candidate);

enum class JudgmentKind { acceptability, head_to_head, absolute };

std::string_view to_string(JudgmentKind kind);
JudgmentKind parse_judgment_kind(std::string_view text);

struct AcceptabilityPayload {
    bool accept = false;
    bool operator==(const AcceptabilityPayload&) const = default;
};

enum class HeadToHeadChoice { left, right, tie };

struct HeadToHeadPayload {
    HeadToHeadChoice choice = HeadToHeadChoice::tie;
    std::string left_source;
    std::string right_source;
    bool operator==(const HeadToHeadPayload&) const = default;
};

enum class Factuality { generally_false, sometimes_true, generally_true, need_more_info };
enum class AmountInfo { not_enough, enough, too_much };

std::string_view to_string(HeadToHeadChoice choice);
std::string_view to_string(Factuality value);
std::string_view to_string(AmountInfo value);
HeadToHeadChoice parse_head_to_head_choice(std::string_view text);
Factuality parse_factuality(std::string_view text);
AmountInfo parse_amount_info(std::string_view text);

/// Two-part attribute questionnaire. Conditional answers are optional.
struct AbsolutePayload {
    Factuality factuality = Factuality::need_more_info;
    bool grammar = false;
    bool new_info = false;
    std::optional<bool> supports_label;
    std::optional<AmountInfo> amount_info;
    bool acceptable = false;

    /// Generality is not stored: a statement is general unless the rater needed more information.
    bool is_general() const noexcept { return factuality != Factuality::need_more_info; }

    bool operator==(const AbsolutePayload&) const = default;
};

using JudgmentPayload = std::variant<AcceptabilityPayload, HeadToHeadPayload, AbsolutePayload>;

JudgmentKind kind_of(const JudgmentPayload& payload);

/// One rater response.
struct Judgment {
    std::string judgment_id;
    std::string study_id;
    std::string annotator_id;
    std::string subject_id;
    JudgmentKind kind = JudgmentKind::acceptability;
    JudgmentPayload payload = AcceptabilityPayload{};
    std::int64_t elapsed_ms = 0;
    std::int64_t created_at_ms = 0;  // unix epoch
    /// Set by quality control; excluded judgments are kept on disk but never aggregated.
    bool excluded = false;

    bool operator==(const Judgment&) const = default;
};

void validate(const Judgment& judgment);

/// Consensus over the raters of one candidate.
struct AggregatedLabel {
    std::string candidate_id;
    int n_raters = 0;
    int n_accept = 0;
    bool label_3of3 = false;
    bool label_2of3 = false;

    static AggregatedLabel from_counts(std::string candidate_id, int n_raters, int n_accept);

    bool operator==(const AggregatedLabel&) const = default;
};

void validate(const AggregatedLabel& label);

enum class Threshold { at_3of3, at_2of3 };

std::string_view to_string(Threshold threshold);
Threshold parse_threshold(std::string_view text);

inline bool is_positive(const AggregatedLabel& label, Threshold threshold) {
    return threshold == Threshold::at_3of3 ? label.label_3of3 : label.label_2of3;
}

}  // namespace overgen
