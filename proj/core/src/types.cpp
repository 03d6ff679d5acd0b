#include "overgen/types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include "overgen/error.hpp"

namespace overgen {
namespace {

template <class Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
    for (const auto& [name, value] : table) {
        if (name == text) return value;
    }
    throw PreconditionError("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

constexpr std::array<std::pair<std::string_view, Task>, 2> kTasks{{{"mcqa", Task::mcqa}, {"nli", Task::nli}}};
constexpr std::array<std::pair<std::string_view, Split>, 4> kSplits{
    {{"train", Split::train}, {"dev", Split::dev}, {"test", Split::test}, {"test2", Split::test2}}};
constexpr std::array<std::pair<std::string_view, JudgmentKind>, 3> kKinds{{{"acceptability", JudgmentKind::acceptability},
                                                                           {"head_to_head", JudgmentKind::head_to_head},
                                                                           {"absolute", JudgmentKind::absolute}}};
constexpr std::array<std::pair<std::string_view, HeadToHeadChoice>, 3> kChoices{
    {{"left", HeadToHeadChoice::left}, {"right", HeadToHeadChoice::right}, {"tie", HeadToHeadChoice::tie}}};
constexpr std::array<std::pair<std::string_view, Factuality>, 4> kFactuality{
    {{"generally_false", Factuality::generally_false},
     {"sometimes_true", Factuality::sometimes_true},
     {"generally_true", Factuality::generally_true},
     {"need_more_info", Factuality::need_more_info}}};
constexpr std::array<std::pair<std::string_view, AmountInfo>, 3> kAmount{
    {{"not_enough", AmountInfo::not_enough}, {"enough", AmountInfo::enough}, {"too_much", AmountInfo::too_much}}};
constexpr std::array<std::pair<std::string_view, Threshold>, 2> kThresholds{
    {{"3of3", Threshold::at_3of3}, {"2of3", Threshold::at_2of3}}};

template <class Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) {
    for (const auto& [name, v] : table) {
        if (v == value) return name;
    }
    return "?";
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

std::string_view to_string(Task task) { return name_of(task, kTasks); }
std::string_view to_string(Split split) { return name_of(split, kSplits); }
std::string_view to_string(JudgmentKind kind) { return name_of(kind, kKinds); }
std::string_view to_string(HeadToHeadChoice choice) { return name_of(choice, kChoices); }
std::string_view to_string(Factuality value) { return name_of(value, kFactuality); }
std::string_view to_string(AmountInfo value) { return name_of(value, kAmount); }
std::string_view to_string(Threshold threshold) { return name_of(threshold, kThresholds); }

Task parse_task(std::string_view text) { return parse_enum(text, kTasks, "task"); }
Split parse_split(std::string_view text) { return parse_enum(text, kSplits, "split"); }
JudgmentKind parse_judgment_kind(std::string_view text) { return parse_enum(text, kKinds, "judgment kind"); }
HeadToHeadChoice parse_head_to_head_choice(std::string_view text) { return parse_enum(text, kChoices, "choice"); }
Factuality parse_factuality(std::string_view text) { return parse_enum(text, kFactuality, "factuality"); }
AmountInfo parse_amount_info(std::string_view text) { return parse_enum(text, kAmount, "amount_info"); }
Threshold parse_threshold(std::string_view text) { return parse_enum(text, kThresholds, "threshold"); }

void validate(const TaskInstance& instance) {
    if (instance.id.empty()) throw InvariantError("<empty>", "instance id is empty");
    if (blank(instance.gold_label)) throw InvariantError(instance.id, "gold label is empty");
    switch (instance.task) {
    case Task::mcqa:
        if (blank(instance.question)) throw InvariantError(instance.id, "MCQA instance has no question");
        if (instance.choices.size() < 2) throw InvariantError(instance.id, "MCQA instance needs at least 2 choices");
        if (std::count(instance.choices.begin(), instance.choices.end(), instance.gold_label) != 1)
            throw InvariantError(instance.id, "gold label '" + instance.gold_label + "' is not exactly one of the choices");
        break;
    case Task::nli:
        if (blank(instance.premise) || blank(instance.hypothesis))
            throw InvariantError(instance.id, "NLI instance needs premise and hypothesis");
        if (std::find(kNliLabels.begin(), kNliLabels.end(), instance.gold_label) == kNliLabels.end())
            throw InvariantError(instance.id, "NLI gold label '" + instance.gold_label + "' is not one of entailment/contradiction/neutral");
        if (!instance.choices.empty()) throw InvariantError(instance.id, "NLI instance carries answer choices");
        break;
    }
}

void validate(const PromptExample& example) {
    validate(example.instance);
    if (blank(example.explanation)) throw InvariantError(example.instance.id, "prompt example has an empty explanation");
}

Decode Decode::sampled(int index) {
    if (index < 1) throw PreconditionError("sample index must be >= 1");
    return Decode{index};
}

std::string Decode::to_string() const {
    return is_greedy() ? std::string("greedy") : "sampled:" + std::to_string(rank_);
}

Decode Decode::parse(std::string_view text) {
    if (text == "greedy") return greedy();
    constexpr std::string_view prefix = "sampled:";
    if (text.starts_with(prefix)) {
        int index = 0;
        auto digits = text.substr(prefix.size());
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
        if (ec == std::errc{} && ptr == digits.data() + digits.size()) return sampled(index);
    }
    throw PreconditionError("bad decode tag '" + std::string(text) + "'");
}

void validate(const ExplanationCandidate& candidate) {
    const auto& id = candidate.candidate_id;
    if (id.empty()) throw InvariantError("<empty>", "candidate id is empty");
    if (candidate.instance_id.empty()) throw InvariantError(id, "candidate has no instance id");
    if (!candidate.degenerate && blank(candidate.text)) throw InvariantError(id, "candidate text is empty but not flagged degenerate");
    for (double lp : candidate.token_logprobs) {
        if (!(lp <= 0.0)) throw InvariantError(id, "token logprob > 0 or NaN");
    }
    if (!(candidate.total_logprob <= 0.0)) throw InvariantError(id, "total logprob > 0 or NaN");
    double sum = std::accumulate(candidate.token_logprobs.begin(), candidate.token_logprobs.end(), 0.0);
    if (std::abs(sum - candidate.total_logprob) > 1e-9)
        throw InvariantError(id, "total logprob differs from the sum of token logprobs");
}

JudgmentKind kind_of(const JudgmentPayload& payload) {
    return static_cast<JudgmentKind>(payload.index());
}

void validate(const Judgment& judgment) {
    if (judgment.annotator_id.empty()) throw InvariantError(judgment.judgment_id, "judgment has no annotator");
    if (judgment.subject_id.empty()) throw InvariantError(judgment.judgment_id, "judgment has no subject");
    if (judgment.elapsed_ms < 0) throw InvariantError(judgment.judgment_id, "negative elapsed time");
    if (kind_of(judgment.payload) != judgment.kind) throw InvariantError(judgment.judgment_id, "payload does not match judgment kind");
}

AggregatedLabel AggregatedLabel::from_counts(std::string candidate_id, int n_raters, int n_accept) {
    AggregatedLabel label;
    label.candidate_id = std::move(candidate_id);
    label.n_raters = n_raters;
    label.n_accept = n_accept;
    label.label_3of3 = n_accept >= 3;
    label.label_2of3 = n_accept >= 2;
    validate(label);
    return label;
}

void validate(const AggregatedLabel& label) {
    if (label.n_raters < 1) throw InvariantError(label.candidate_id, "label has no raters");
    if (label.n_accept < 0 || label.n_accept > label.n_raters) throw InvariantError(label.candidate_id, "n_accept out of range");
    if (label.label_3of3 != (label.n_accept >= 3) || label.label_2of3 != (label.n_accept >= 2))
        throw InvariantError(label.candidate_id, "threshold labels disagree with counts");
}

}  // namespace overgen
