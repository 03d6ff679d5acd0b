#include "overgen/annotation/aggregation.hpp"

#include <algorithm>
#include <unordered_map>

namespace overgen::annotation {

namespace {

struct Tally {
    int raters = 0;
    int accepts = 0;
};

std::unordered_map<std::string, Tally> tally(std::span<const Judgment> judgments) {
    std::unordered_map<std::string, Tally> out;
    for (const auto& j : judgments) {
        if (j.excluded || j.kind != JudgmentKind::acceptability) continue;
        auto& t = out[j.subject_id];
        ++t.raters;
        t.accepts += std::get<AcceptabilityPayload>(j.payload).accept ? 1 : 0;
    }
    return out;
}

}  // namespace

AggregatedLabel aggregate_acceptability(const std::string& candidate_id, std::span<const Judgment> judgments,
                                        int n_raters) {
    Tally t;
    for (const auto& j : judgments) {
        if (j.excluded || j.kind != JudgmentKind::acceptability || j.subject_id != candidate_id) continue;
        ++t.raters;
        t.accepts += std::get<AcceptabilityPayload>(j.payload).accept ? 1 : 0;
    }
    if (t.raters != n_raters)
        throw IncompleteItemError("candidate " + candidate_id + " has " + std::to_string(t.raters) + " of " +
                                  std::to_string(n_raters) + " judgments");
    return AggregatedLabel::from_counts(candidate_id, n_raters, t.accepts);
}

AggregationResult aggregate_all(std::span<const std::string> candidate_ids, std::span<const Judgment> judgments,
                                int n_raters) {
    auto tallies = tally(judgments);
    AggregationResult result;
    for (const auto& id : candidate_ids) {
        auto it = tallies.find(id);
        if (it == tallies.end() || it->second.raters != n_raters) {
            result.incomplete.push_back(id);
            continue;
        }
        result.labels.push_back(AggregatedLabel::from_counts(id, n_raters, it->second.accepts));
    }
    return result;
}

std::vector<std::size_t> agreement_buckets(std::span<const AggregatedLabel> labels, int n_raters) {
    std::vector<std::size_t> buckets(static_cast<std::size_t>(n_raters) + 1, 0);
    for (const auto& l : labels) {
        if (l.n_accept >= 0 && l.n_accept <= n_raters) ++buckets[static_cast<std::size_t>(l.n_accept)];
    }
    return buckets;
}

std::size_t count_positive(std::span<const AggregatedLabel> labels, Threshold threshold) {
    return static_cast<std::size_t>(
        std::count_if(labels.begin(), labels.end(), [&](const auto& l) { return is_positive(l, threshold); }));
}

}  // namespace overgen::annotation
