#include "overgen/metrics/head_to_head.hpp"

#include <array>
#include <map>

#include <spdlog/spdlog.h>

#include "overgen/error.hpp"

namespace overgen::metrics {

namespace {

enum Option { kA = 0, kTie = 1, kB = 2 };

PreferenceShares shares(const std::array<std::size_t, 3>& counts) {
    PreferenceShares s;
    s.n = counts[kA] + counts[kTie] + counts[kB];
    if (s.n == 0) return s;
    const double n = static_cast<double>(s.n);
    s.a = 100.0 * static_cast<double>(counts[kA]) / n;
    s.tie = 100.0 * static_cast<double>(counts[kTie]) / n;
    s.b = 100.0 * static_cast<double>(counts[kB]) / n;
    return s;
}

}  // namespace

HeadToHeadTally head_to_head_tally(std::span<const Judgment> judgments, const std::string& source_a,
                                   const std::string& source_b, int raters_per_item) {
    if (raters_per_item < 1) throw PreconditionError("raters_per_item must be positive");
    std::map<std::string, std::array<std::size_t, 3>> per_item;
    for (const auto& j : judgments) {
        if (j.excluded || j.kind != JudgmentKind::head_to_head) continue;
        const auto& p = std::get<HeadToHeadPayload>(j.payload);
        const bool a_left = p.left_source == source_a && p.right_source == source_b;
        const bool a_right = p.left_source == source_b && p.right_source == source_a;
        if (!a_left && !a_right)
            throw PreconditionError("judgment " + j.judgment_id + " compares " + p.left_source + " and " +
                                    p.right_source);
        Option o = kTie;
        if (p.choice == HeadToHeadChoice::left) o = a_left ? kA : kB;
        if (p.choice == HeadToHeadChoice::right) o = a_left ? kB : kA;
        ++per_item[j.subject_id][o];
    }

    HeadToHeadTally t;
    t.source_a = source_a;
    t.source_b = source_b;
    std::array<std::size_t, 3> responses{}, items{};
    for (const auto& [subject, c] : per_item) {
        if (c[kA] + c[kTie] + c[kB] != static_cast<std::size_t>(raters_per_item)) {
            ++t.n_incomplete;
            continue;
        }
        for (int o = 0; o < 3; ++o) responses[o] += c[o];
        const auto majority = static_cast<std::size_t>(raters_per_item / 2 + 1);
        if (c[kA] >= majority)
            ++items[kA];
        else if (c[kB] >= majority)
            ++items[kB];
        else
            ++items[kTie];
    }
    if (t.n_incomplete > 0) spdlog::warn("head-to-head: {} incomplete item(s) excluded", t.n_incomplete);
    t.per_annotation = shares(responses);
    t.per_item = shares(items);
    return t;
}

}  // namespace overgen::metrics
