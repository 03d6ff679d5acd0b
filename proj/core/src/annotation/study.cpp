#include "overgen/annotation/study.hpp"

#include <algorithm>

#include "overgen/hashing.hpp"
#include "overgen/serialization.hpp"

namespace overgen::annotation {

using nlohmann::json;

std::string_view to_string(StudyKind kind) {
    switch (kind) {
    case StudyKind::acceptability: return "acceptability";
    case StudyKind::head_to_head: return "head_to_head";
    case StudyKind::absolute: return "absolute";
    case StudyKind::qualification: return "qualification";
    }
    return "?";
}

StudyKind parse_study_kind(std::string_view text) {
    if (text == "acceptability") return StudyKind::acceptability;
    if (text == "head_to_head") return StudyKind::head_to_head;
    if (text == "absolute") return StudyKind::absolute;
    if (text == "qualification") return StudyKind::qualification;
    throw PreconditionError("unknown study kind '" + std::string(text) + "'");
}

JudgmentKind judgment_kind_for(StudyKind kind) {
    switch (kind) {
    case StudyKind::acceptability: return JudgmentKind::acceptability;
    case StudyKind::head_to_head: return JudgmentKind::head_to_head;
    case StudyKind::absolute:
    case StudyKind::qualification: return JudgmentKind::absolute;
    }
    return JudgmentKind::acceptability;
}

void to_json(json& j, const StudyItem& item) {
    j = json{{"subject_id", item.subject_id}, {"task", to_string(item.task)}, {"gold_label", item.gold_label}};
    if (item.task == Task::mcqa) {
        j["question"] = item.question;
    } else {
        j["premise"] = item.premise;
        j["hypothesis"] = item.hypothesis;
    }
    json expl = json::array();
    for (const auto& e : item.explanations) expl.push_back(json{{"text", e.text}, {"source", e.source}});
    j["explanations"] = std::move(expl);
    if (item.answer_key) j["answer_key"] = *item.answer_key;
}

void from_json(const json& j, StudyItem& item) {
    item = StudyItem{};
    j.at("subject_id").get_to(item.subject_id);
    item.task = parse_task(j.value("task", std::string("mcqa")));
    item.gold_label = j.value("gold_label", std::string());
    item.question = j.value("question", std::string());
    item.premise = j.value("premise", std::string());
    item.hypothesis = j.value("hypothesis", std::string());
    for (const auto& e : j.value("explanations", json::array()))
        item.explanations.push_back({e.at("text").get<std::string>(), e.value("source", std::string())});
    if (auto it = j.find("answer_key"); it != j.end() && !it->is_null()) item.answer_key = it->get<AbsolutePayload>();
}

void to_json(json& j, const StudySpec& spec) {
    j = json{{"study_id", spec.study_id},
             {"kind", to_string(spec.kind)},
             {"items", spec.items},
             {"raters_per_item", spec.raters_per_item},
             {"batch_size", spec.batch_size},
             {"task", to_string(spec.task)},
             {"pass_score", spec.pass_score},
             {"lease_seconds", spec.lease.count()}};
    if (spec.required_qualification) j["required_qualification"] = *spec.required_qualification;
}

void from_json(const json& j, StudySpec& spec) {
    spec = StudySpec{};
    j.at("study_id").get_to(spec.study_id);
    spec.kind = parse_study_kind(j.at("kind").get<std::string>());
    j.at("items").get_to(spec.items);
    spec.raters_per_item = j.value("raters_per_item", 3);
    spec.batch_size = j.value("batch_size", spec.kind == StudyKind::acceptability ? 5 : 1);
    spec.task = parse_task(j.value("task", std::string("mcqa")));
    spec.pass_score = j.value("pass_score", 0);
    spec.lease = std::chrono::seconds(j.value("lease_seconds", std::int64_t{1800}));
    if (auto it = j.find("required_qualification"); it != j.end() && !it->is_null())
        spec.required_qualification = it->get<std::string>();
}

void validate_flow(const AbsolutePayload& p, Task task) {
    if (task == Task::nli) {
        if (!p.supports_label) throw FlowViolationError("NLI flow always asks whether the explanation supports the label");
    } else if (p.new_info != p.supports_label.has_value()) {
        throw FlowViolationError(p.new_info ? "supports_label must be answered when new_info is yes"
                                            : "supports_label must not be answered when new_info is no");
    }
    bool asked_amount = p.supports_label.value_or(false);
    if (asked_amount != p.amount_info.has_value()) {
        throw FlowViolationError(asked_amount ? "amount_info must be answered when supports_label is yes"
                                              : "amount_info is only asked when supports_label is yes");
    }
}

int exam_score(const AbsolutePayload& key, const AbsolutePayload& answers) {
    int score = 0;
    score += key.factuality == answers.factuality;
    score += key.grammar == answers.grammar;
    score += key.new_info == answers.new_info;
    if (key.supports_label) score += answers.supports_label == key.supports_label;
    if (key.amount_info) score += answers.amount_info == key.amount_info;
    score += key.acceptable == answers.acceptable;
    return score;
}

void QualificationRegistry::record(const std::string& qualification, const std::string& annotator, int score,
                                   bool passed) {
    std::lock_guard lock(mutex_);
    entries_[{qualification, annotator}] = {score, passed};
}

bool QualificationRegistry::passed(const std::string& qualification, const std::string& annotator) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find({qualification, annotator});
    return it != entries_.end() && it->second.second;
}

std::optional<int> QualificationRegistry::score(const std::string& qualification, const std::string& annotator) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find({qualification, annotator});
    if (it == entries_.end()) return std::nullopt;
    return it->second.first;
}

Study::Study(StudySpec spec, std::shared_ptr<QualificationRegistry> registry)
    : spec_(std::move(spec)), registry_(std::move(registry)) {
    if (spec_.study_id.empty()) throw PreconditionError("study id is empty");
    if (spec_.raters_per_item < 1) throw PreconditionError("raters_per_item must be >= 1");
    if (spec_.batch_size < 1) throw PreconditionError("batch_size must be >= 1");
    if (spec_.required_qualification && !registry_) throw PreconditionError("qualification gating needs a registry");
    if (spec_.kind == StudyKind::qualification && !registry_) throw PreconditionError("qualification studies need a registry");

    for (std::size_t i = 0; i < spec_.items.size(); ++i) {
        const auto& item = spec_.items[i];
        if (!item_of_.emplace(item.subject_id, i).second) throw DuplicateIdError(item.subject_id);
        std::size_t expected = spec_.kind == StudyKind::head_to_head ? 2 : 1;
        if (item.explanations.size() != expected)
            throw PreconditionError("item " + item.subject_id + " needs " + std::to_string(expected) + " explanation(s)");
        if (spec_.kind == StudyKind::qualification && !item.answer_key)
            throw PreconditionError("qualification item " + item.subject_id + " has no answer key");
    }
    const auto batch = static_cast<std::size_t>(spec_.batch_size);
    for (std::size_t start = 0; start < spec_.items.size(); start += batch) {
        Page page;
        for (std::size_t i = start; i < std::min(start + batch, spec_.items.size()); ++i) {
            page.subject_ids.push_back(spec_.items[i].subject_id);
            page_of_[spec_.items[i].subject_id] = pages_.size();
        }
        pages_.push_back(std::move(page));
    }
}

const StudyItem& Study::item(const std::string& subject_id) const {
    auto it = item_of_.find(subject_id);
    if (it == item_of_.end()) throw AssignmentError("subject " + subject_id + " is not part of study " + spec_.study_id);
    return spec_.items[it->second];
}

std::size_t Study::open_slots(const Page& page, Clock::time_point now) const {
    std::size_t leased = std::count_if(page.leases.begin(), page.leases.end(), [&](const auto& l) { return l.second > now; });
    std::size_t taken = page.committed.size() + leased;
    auto raters = static_cast<std::size_t>(spec_.raters_per_item);
    return taken >= raters ? 0 : raters - taken;
}

std::optional<PageAssignment> Study::claim(const std::string& annotator, Clock::time_point now) {
    std::lock_guard lock(mutex_);
    if (blocked_.count(annotator)) return std::nullopt;
    auto make = [&](std::size_t index) {
        const auto& page = pages_[index];
        return PageAssignment{spec_.study_id, index, annotator, page.subject_ids, page.leases.at(annotator)};
    };
    for (std::size_t i = 0; i < pages_.size(); ++i) {
        auto it = pages_[i].leases.find(annotator);
        if (it != pages_[i].leases.end() && it->second > now) return make(i);
    }
    for (std::size_t i = 0; i < pages_.size(); ++i) {
        auto& page = pages_[i];
        if (page.committed.count(annotator) || page.excluded.count(annotator)) continue;
        // An expired lease of this annotator does not count as worked.
        page.leases.erase(annotator);
        if (open_slots(page, now) == 0) continue;
        page.leases[annotator] = now + spec_.lease;
        return make(i);
    }
    return std::nullopt;
}

bool Study::swapped_for(const std::string& annotator, const std::string& subject_id) {
    return (stable_hash64(annotator + '\x1f' + subject_id) & 1U) != 0;
}

Judgment Study::record(const std::string& annotator, const std::string& subject_id, JudgmentPayload payload,
                       std::int64_t elapsed_ms, Clock::time_point now) {
    const auto kind = judgment_kind_for(spec_.kind);
    if (spec_.required_qualification && !registry_->passed(*spec_.required_qualification, annotator))
        throw UnqualifiedError("annotator " + annotator + " has not passed " + *spec_.required_qualification);
    if (kind_of(payload) != kind)
        throw PreconditionError("study " + spec_.study_id + " expects " + std::string(to_string(kind)) + " payloads");
    if (elapsed_ms < 0) throw PreconditionError("elapsed_ms must be >= 0");
    const auto& it = item(subject_id);
    if (auto* absolute = std::get_if<AbsolutePayload>(&payload)) validate_flow(*absolute, spec_.task);
    if (auto* h2h = std::get_if<HeadToHeadPayload>(&payload)) {
        bool swap = swapped_for(annotator, subject_id);
        h2h->left_source = it.explanations[swap ? 1 : 0].source;
        h2h->right_source = it.explanations[swap ? 0 : 1].source;
    }

    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(annotator, subject_id, kind);
    if (seen_.count(key))
        throw DuplicateJudgmentError("annotator " + annotator + " already judged " + subject_id);
    std::size_t page_index = page_of_.at(subject_id);
    auto& page = pages_[page_index];
    auto lease = page.leases.find(annotator);
    if (lease == page.leases.end() || lease->second <= now)
        throw AssignmentError("annotator " + annotator + " holds no open assignment for " + subject_id);

    Judgment j;
    j.study_id = spec_.study_id;
    j.annotator_id = annotator;
    j.subject_id = subject_id;
    j.kind = kind;
    j.payload = std::move(payload);
    j.elapsed_ms = elapsed_ms;
    j.created_at_ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    j.judgment_id = content_id("j-", spec_.study_id + '\x1f' + annotator + '\x1f' + subject_id + '\x1f' +
                                         std::string(to_string(kind)));
    seen_.insert(key);
    done_.insert({annotator, subject_id});
    judgments_.push_back(j);
    maybe_commit(annotator, page_index);
    return j;
}

void Study::restore(const Judgment& judgment) {
    std::lock_guard lock(mutex_);
    const auto kind = judgment_kind_for(spec_.kind);
    if (judgment.kind != kind) throw PreconditionError("judgment kind does not match study");
    if (!page_of_.count(judgment.subject_id)) throw AssignmentError("unknown subject " + judgment.subject_id);
    auto key = std::make_tuple(judgment.annotator_id, judgment.subject_id, kind);
    if (seen_.count(key)) throw DuplicateJudgmentError("annotator " + judgment.annotator_id + " already judged " + judgment.subject_id);
    if (auto* absolute = std::get_if<AbsolutePayload>(&judgment.payload)) validate_flow(*absolute, spec_.task);
    seen_.insert(key);
    judgments_.push_back(judgment);
    auto page_index = page_of_.at(judgment.subject_id);
    if (judgment.excluded) {
        pages_[page_index].excluded.insert(judgment.annotator_id);
        blocked_.insert(judgment.annotator_id);
    } else {
        done_.insert({judgment.annotator_id, judgment.subject_id});
        maybe_commit(judgment.annotator_id, page_index);
    }
}

void Study::maybe_commit(const std::string& annotator, std::size_t page_index) {
    auto& page = pages_[page_index];
    for (const auto& subject : page.subject_ids) {
        if (!done_.count({annotator, subject})) return;
    }
    page.committed.insert(annotator);
    page.leases.erase(annotator);
    if (spec_.kind == StudyKind::qualification) maybe_grade_exam(annotator);
}

void Study::maybe_grade_exam(const std::string& annotator) {
    bool finished = std::all_of(pages_.begin(), pages_.end(), [&](const Page& p) { return p.committed.count(annotator) != 0; });
    if (!finished) return;
    int score = 0;
    for (const auto& j : judgments_) {
        if (j.annotator_id != annotator || j.excluded) continue;
        score += exam_score(*item(j.subject_id).answer_key, std::get<AbsolutePayload>(j.payload));
    }
    registry_->record(spec_.study_id, annotator, score, score >= spec_.pass_score);
}

json Study::page_payload(const PageAssignment& assignment) const {
    json items = json::array();
    for (const auto& subject : assignment.subject_ids) {
        const auto& it = item(subject);
        json view{{"subject_id", it.subject_id}, {"task", to_string(it.task)}, {"gold_label", it.gold_label}};
        if (it.task == Task::mcqa) {
            view["question"] = it.question;
        } else {
            view["premise"] = it.premise;
            view["hypothesis"] = it.hypothesis;
        }
        if (spec_.kind == StudyKind::head_to_head) {
            bool swap = swapped_for(assignment.annotator_id, subject);
            view["left"] = it.explanations[swap ? 1 : 0].text;
            view["right"] = it.explanations[swap ? 0 : 1].text;
        } else {
            view["explanation"] = it.explanations.front().text;
        }
        items.push_back(std::move(view));
    }
    return json{{"study_id", spec_.study_id},
                {"page_id", spec_.study_id + ":" + std::to_string(assignment.page_index)},
                {"kind", to_string(spec_.kind)},
                {"task", to_string(spec_.task)},
                {"expires_at_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                      assignment.expires_at.time_since_epoch()).count()},
                {"items", std::move(items)}};
}

StudyProgress Study::progress(Clock::time_point now) const {
    std::lock_guard lock(mutex_);
    StudyProgress p;
    p.pages = pages_.size();
    p.assignments = pages_.size() * static_cast<std::size_t>(spec_.raters_per_item);
    for (const auto& page : pages_) {
        p.committed += std::min(page.committed.size(), static_cast<std::size_t>(spec_.raters_per_item));
        p.leased += std::count_if(page.leases.begin(), page.leases.end(), [&](const auto& l) { return l.second > now; });
    }
    p.pending = p.assignments - p.committed;
    return p;
}

CloseOutReport Study::close_out() const {
    std::lock_guard lock(mutex_);
    CloseOutReport report;
    auto raters = static_cast<std::size_t>(spec_.raters_per_item);
    for (std::size_t i = 0; i < pages_.size(); ++i) {
        if (pages_[i].committed.size() < raters) {
            report.underfilled_pages.push_back(i);
            report.missing_assignments += raters - pages_[i].committed.size();
        }
    }
    return report;
}

std::vector<Judgment> Study::judgments() const {
    std::lock_guard lock(mutex_);
    return judgments_;
}

std::vector<Judgment> Study::active_judgments() const {
    std::lock_guard lock(mutex_);
    std::vector<Judgment> out;
    std::copy_if(judgments_.begin(), judgments_.end(), std::back_inserter(out), [](const Judgment& j) { return !j.excluded; });
    return out;
}

std::vector<std::string> Study::exclude_annotators(const std::set<std::string>& annotators) {
    std::lock_guard lock(mutex_);
    std::set<std::string> subjects;
    for (auto& j : judgments_) {
        if (!annotators.count(j.annotator_id) || j.excluded) continue;
        j.excluded = true;
        done_.erase({j.annotator_id, j.subject_id});
        subjects.insert(j.subject_id);
    }
    for (auto& page : pages_) {
        for (const auto& a : annotators) {
            if (page.committed.erase(a) || std::any_of(page.subject_ids.begin(), page.subject_ids.end(),
                                                       [&](const auto& s) { return subjects.count(s) != 0; })) {
                page.excluded.insert(a);
            }
            page.leases.erase(a);
        }
    }
    blocked_.insert(annotators.begin(), annotators.end());
    return {subjects.begin(), subjects.end()};
}

}  // namespace overgen::annotation
