#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/filter/filter_input.hpp"
#include "overgen/filter/linear_model.hpp"
#include "overgen/types.hpp"

namespace overgen::filter {

enum class ScoreKind {
    probability,     // P(acceptable) in [0, 1]
    log_likelihood,  // generator log-probability; higher means more likely, not calibrated
};

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);

struct CandidateScore {
    std::string candidate_id;
    std::optional<double> value;
    /// Set when value is empty.
    std::string error;

    bool operator==(const CandidateScore&) const = default;
};

struct FilterScoreSet {
    std::string backend_id;
    ScoreKind kind = ScoreKind::probability;
    std::vector<CandidateScore> scores;

    std::unordered_map<std::string, double> by_candidate() const;
    std::size_t n_errors() const;
};

/// What a scorer sees for one candidate. `input` is empty for degenerate candidates.
struct ScoringItem {
    ExplanationCandidate candidate;
    std::optional<FilterInput> input;
};

/// Pairs each candidate with its instance. Throws InvariantError for an unknown instance.
std::vector<ScoringItem> make_scoring_items(std::span<const ExplanationCandidate> candidates,
                                            std::span<const TaskInstance> instances, FilterMode mode);

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual std::string backend_id() = 0;
    virtual ScoreKind kind() const { return ScoreKind::probability; }
    /// Output order matches input order. Degenerate items get an error entry, never a value.
    virtual FilterScoreSet score(std::span<const ScoringItem> items) = 0;
};

class MissingLogprobsError : public Error {
public:
    using Error::Error;
};

/// Sum of token log-probabilities, or their mean with `length_normalized`. Degenerate candidates are
/// reported as per-item errors; a non-degenerate candidate without token logprobs raises
/// MissingLogprobsError.
FilterScoreSet score_nll(std::span<const ExplanationCandidate> candidates, bool length_normalized = false);

class NllScorer final : public Scorer {
public:
    explicit NllScorer(bool length_normalized = false) : length_normalized_(length_normalized) {}
    std::string backend_id() override { return length_normalized_ ? "nll-mean" : "nll"; }
    ScoreKind kind() const override { return ScoreKind::log_likelihood; }
    FilterScoreSet score(std::span<const ScoringItem> items) override;

private:
    bool length_normalized_;
};

class BuiltinScorer final : public Scorer {
public:
    explicit BuiltinScorer(LinearModel model) : model_(std::move(model)) {}
    /// "builtin:" plus the first 12 hex digits of the artifact digest.
    std::string backend_id() override;
    FilterScoreSet score(std::span<const ScoringItem> items) override;
    const LinearModel& model() const noexcept { return model_; }

private:
    LinearModel model_;
    std::string id_;
};

/// A text-to-probability rule evaluated in process; the reference scorer server wraps one.
struct KeywordRule {
    std::vector<std::pair<std::string, double>> keywords;
    double bias = 0.0;
    /// Subtracted per 100 bytes of input.
    double length_penalty = 0.0;
    std::string version = "keyword-rule/1";

    /// sigmoid(bias + sum(weight * occurrences) - length_penalty * size / 100), matched case-insensitively.
    double operator()(std::string_view text) const;
};

/// Applies a rule to the formatted inputs.
class RuleScorer final : public Scorer {
public:
    explicit RuleScorer(KeywordRule rule) : rule_(std::move(rule)) {}
    std::string backend_id() override { return "rule:" + rule_.version; }
    FilterScoreSet score(std::span<const ScoringItem> items) override;

private:
    KeywordRule rule_;
};

/// Index of the chosen candidate in `candidates` (one instance's set): the highest score, ties going to
/// the lowest decode rank (greedy, then sample 1, 2, ...). Unscored candidates are chosen only if no
/// candidate has a score. Throws PreconditionError for an empty set.
std::size_t select_one(std::span<const ExplanationCandidate> candidates,
                       const std::unordered_map<std::string, double>& scores);

struct Selection {
    std::string instance_id;
    std::string candidate_id;
    std::optional<double> score;

    bool operator==(const Selection&) const = default;
};

/// One selection per instance, in first-appearance order of instance ids in `candidates`.
std::vector<Selection> select_all(std::span<const ExplanationCandidate> candidates, const FilterScoreSet& scores);

/// Share of instances where some sampled candidate has a higher total log-probability than the greedy one.
/// Instances without a greedy candidate are skipped. Returns nullopt when no instance qualifies.
std::optional<double> nll_dominance_fraction(std::span<const ExplanationCandidate> candidates);

/// Appends one {candidate_id, backend, input} line per scorable item.
void write_audit_log(const std::filesystem::path& path, std::string_view backend_id,
                     std::span<const ScoringItem> items);

inline constexpr std::string_view kAuditEntity = "filter_audit";
inline constexpr std::string_view kSelectionsEntity = "selections";

void to_json(nlohmann::json& j, const CandidateScore& v);
void from_json(const nlohmann::json& j, CandidateScore& v);
void to_json(nlohmann::json& j, const Selection& v);
void from_json(const nlohmann::json& j, Selection& v);

/// scores.jsonl: a summary record {backend_id, kind} followed by one record per candidate.
void save_score_set(const std::filesystem::path& path, const FilterScoreSet& set);
FilterScoreSet load_score_set(const std::filesystem::path& path);

}  // namespace overgen::filter
