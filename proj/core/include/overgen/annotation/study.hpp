#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/error.hpp"
#include "overgen/types.hpp"

namespace overgen::annotation {

class UnqualifiedError : public Error {
public:
    using Error::Error;
};

class DuplicateJudgmentError : public Error {
public:
    using Error::Error;
};

/// An absolute payload breaks the conditional question flow.
class FlowViolationError : public Error {
public:
    using Error::Error;
};

/// The annotator holds no open assignment covering the subject.
class AssignmentError : public Error {
public:
    using Error::Error;
};

class UnknownStudyError : public Error {
public:
    using Error::Error;
};

using Clock = std::chrono::system_clock;

enum class StudyKind { acceptability, head_to_head, absolute, qualification };

std::string_view to_string(StudyKind kind);
StudyKind parse_study_kind(std::string_view text);

/// Judgment kind recorded for a study. Qualification exams use the absolute questionnaire.
JudgmentKind judgment_kind_for(StudyKind kind);

/// One explanation shown to raters. `source` never leaves the server.
struct ShownExplanation {
    std::string text;
    std::string source;
};

struct StudyItem {
    std::string subject_id;
    Task task = Task::mcqa;
    /// Question for multiple-choice; premise and hypothesis for NLI. Distractor answers are never stored.
    std::string question;
    std::string premise;
    std::string hypothesis;
    std::string gold_label;
    /// One explanation, or two for head-to-head items.
    std::vector<ShownExplanation> explanations;
    /// Expected answers for qualification items.
    std::optional<AbsolutePayload> answer_key;
};

void to_json(nlohmann::json& j, const StudyItem& item);
void from_json(const nlohmann::json& j, StudyItem& item);

struct StudySpec {
    std::string study_id;
    StudyKind kind = StudyKind::acceptability;
    std::vector<StudyItem> items;
    int raters_per_item = 3;
    /// Items per page; 5 for acceptability HITs.
    int batch_size = 5;
    /// Absolute flow rules differ for NLI, where the label-support question is always asked.
    Task task = Task::mcqa;
    /// Qualification an annotator must have passed before recording judgments.
    std::optional<std::string> required_qualification;
    /// Minimum exam score (matching answers) for qualification studies.
    int pass_score = 0;
    std::chrono::seconds lease{std::chrono::minutes(30)};
};

void to_json(nlohmann::json& j, const StudySpec& spec);
void from_json(const nlohmann::json& j, StudySpec& spec);

/// Throws FlowViolationError when the conditional answers do not match what was asked.
void validate_flow(const AbsolutePayload& payload, Task task);

/// Number of answers in `answers` that match `key`, over the questions `key` asks.
int exam_score(const AbsolutePayload& key, const AbsolutePayload& answers);

/// Passed-exam scores shared between studies.
class QualificationRegistry {
public:
    void record(const std::string& qualification, const std::string& annotator, int score, bool passed);
    bool passed(const std::string& qualification, const std::string& annotator) const;
    std::optional<int> score(const std::string& qualification, const std::string& annotator) const;
    /// Grants a qualification directly (manual award).
    void grant(const std::string& qualification, const std::string& annotator) { record(qualification, annotator, 0, true); }

private:
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, std::pair<int, bool>> entries_;
};

/// A page claimed by an annotator. Items are in page order.
struct PageAssignment {
    std::string study_id;
    std::size_t page_index = 0;
    std::string annotator_id;
    std::vector<std::string> subject_ids;
    Clock::time_point expires_at;
};

struct StudyProgress {
    std::size_t pages = 0;
    std::size_t assignments = 0;
    std::size_t committed = 0;
    std::size_t leased = 0;
    std::size_t pending = 0;
};

struct CloseOutReport {
    /// Pages still short of raters_per_item committed raters.
    std::vector<std::size_t> underfilled_pages;
    std::size_t missing_assignments = 0;

    bool complete() const noexcept { return underfilled_pages.empty(); }
};

/// A study with its page queue. Every member function is safe to call from concurrent request
/// handlers; claims are atomic so a pending slot is never leased to two raters.
class Study {
public:
    explicit Study(StudySpec spec, std::shared_ptr<QualificationRegistry> registry = nullptr);

    const StudySpec& spec() const noexcept { return spec_; }
    const std::string& id() const noexcept { return spec_.study_id; }
    std::size_t page_count() const noexcept { return pages_.size(); }
    const StudyItem& item(const std::string& subject_id) const;

    /// Leases the next page for `annotator`, or re-serves the page they already hold. Returns
    /// nullopt when no page is open to them.
    std::optional<PageAssignment> claim(const std::string& annotator, Clock::time_point now = Clock::now());

    /// Validates and stores one response. For head-to-head items the hidden left/right sources are
    /// filled in by the study from the order shown to this annotator.
    Judgment record(const std::string& annotator, const std::string& subject_id, JudgmentPayload payload,
                    std::int64_t elapsed_ms, Clock::time_point now = Clock::now());

    /// Reinstates a previously stored judgment without a lease (service restart).
    void restore(const Judgment& judgment);

    /// Whether `annotator` sees the two head-to-head explanations in swapped order.
    static bool swapped_for(const std::string& annotator, const std::string& subject_id);

    /// Rater-facing view of a claimed page: no provenance, no distractor choices.
    nlohmann::json page_payload(const PageAssignment& assignment) const;

    StudyProgress progress(Clock::time_point now = Clock::now()) const;
    CloseOutReport close_out() const;

    /// All stored judgments including excluded ones, in submission order.
    std::vector<Judgment> judgments() const;
    std::vector<Judgment> active_judgments() const;

    /// Marks every judgment by the given annotators as excluded, reopens their slots and blocks them
    /// from claiming again. Returns the subject ids that need re-annotation.
    std::vector<std::string> exclude_annotators(const std::set<std::string>& annotators);

private:
    struct Page {
        std::vector<std::string> subject_ids;
        std::set<std::string> committed;  // annotators who finished the page
        std::set<std::string> excluded;   // annotators whose work was removed
        std::map<std::string, Clock::time_point> leases;
    };

    std::size_t open_slots(const Page& page, Clock::time_point now) const;
    void maybe_commit(const std::string& annotator, std::size_t page_index);
    void maybe_grade_exam(const std::string& annotator);

    StudySpec spec_;
    std::shared_ptr<QualificationRegistry> registry_;
    std::vector<Page> pages_;
    std::map<std::string, std::size_t> page_of_;   // subject -> page
    std::map<std::string, std::size_t> item_of_;   // subject -> item index
    std::set<std::string> blocked_;

    mutable std::mutex mutex_;
    std::vector<Judgment> judgments_;
    std::set<std::tuple<std::string, std::string, JudgmentKind>> seen_;
    std::set<std::pair<std::string, std::string>> done_;  // active (annotator, subject)
};

}  // namespace overgen::annotation
