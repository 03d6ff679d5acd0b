#include "overgen/annotation/quality.hpp"

#include <algorithm>
#include <map>

#include "overgen/error.hpp"

namespace overgen::annotation {

namespace {

std::optional<double> alpha_of(std::span<const Judgment> judgments, Scale scale) {
    try {
        return krippendorff_alpha(rating_matrix(judgments), scale).alpha;
    } catch (const PreconditionError&) {
        return std::nullopt;
    }
}

double median(std::vector<std::int64_t> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    std::size_t mid = xs.size() / 2;
    if (xs.size() % 2) return static_cast<double>(xs[mid]);
    return (static_cast<double>(xs[mid - 1]) + static_cast<double>(xs[mid])) / 2.0;
}

}  // namespace

std::vector<AnnotatorQc> annotator_qc(std::span<const Judgment> judgments, const QcConfig& config) {
    std::vector<Judgment> active;
    std::copy_if(judgments.begin(), judgments.end(), std::back_inserter(active), [](const Judgment& j) { return !j.excluded; });

    std::map<std::string, std::vector<std::int64_t>> times;
    for (const auto& j : active) times[j.annotator_id].push_back(j.elapsed_ms);

    const auto overall = alpha_of(active, config.scale);
    std::vector<AnnotatorQc> out;
    for (auto& [annotator, elapsed] : times) {
        AnnotatorQc qc;
        qc.annotator_id = annotator;
        qc.judgments = elapsed.size();
        qc.median_ms = median(elapsed);
        qc.time_flag = qc.median_ms < static_cast<double>(config.min_median_ms);

        std::vector<Judgment> without;
        std::copy_if(active.begin(), active.end(), std::back_inserter(without),
                     [&](const Judgment& j) { return j.annotator_id != annotator; });
        if (auto reduced = alpha_of(without, config.scale); reduced && overall) {
            qc.leave_one_out_alpha_delta = *reduced - *overall;
            qc.alpha_flag = *qc.leave_one_out_alpha_delta > config.max_alpha_gain;
        }
        out.push_back(std::move(qc));
    }
    return out;
}

std::string_view to_string(Attribute attribute) {
    switch (attribute) {
    case Attribute::generality: return "generality";
    case Attribute::factuality: return "factuality";
    case Attribute::grammar: return "grammar";
    case Attribute::new_info: return "new_info";
    case Attribute::supports_label: return "supports_label";
    case Attribute::amount_info: return "amount_info";
    case Attribute::acceptable: return "acceptable";
    }
    return "?";
}

std::vector<AttributeCodes> encode_absolute_scores(std::span<const AbsolutePayload> payloads) {
    auto binary = [](bool b) { return b ? 1.0 : -1.0; };
    std::vector<AttributeCodes> out;
    out.reserve(payloads.size());
    for (const auto& p : payloads) {
        AttributeCodes c;
        auto set = [&](Attribute a, std::optional<double> v) { c.values[static_cast<std::size_t>(a)] = v; };
        set(Attribute::generality, binary(p.is_general()));
        switch (p.factuality) {
        case Factuality::generally_false: set(Attribute::factuality, -1.0); break;
        case Factuality::sometimes_true: set(Attribute::factuality, 0.0); break;
        case Factuality::generally_true: set(Attribute::factuality, 1.0); break;
        case Factuality::need_more_info: break;
        }
        set(Attribute::grammar, binary(p.grammar));
        set(Attribute::new_info, binary(p.new_info));
        if (p.supports_label) set(Attribute::supports_label, binary(*p.supports_label));
        if (p.amount_info) {
            switch (*p.amount_info) {
            case AmountInfo::not_enough: set(Attribute::amount_info, -1.0); break;
            case AmountInfo::enough: set(Attribute::amount_info, 0.0); break;
            case AmountInfo::too_much: set(Attribute::amount_info, 1.0); break;
            }
        }
        set(Attribute::acceptable, binary(p.acceptable));
        out.push_back(c);
    }
    return out;
}

std::vector<double> attribute_column(std::span<const AttributeCodes> codes, Attribute attribute) {
    std::vector<double> out;
    for (const auto& c : codes) {
        if (auto v = c.get(attribute)) out.push_back(*v);
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> paired_columns(std::span<const AttributeCodes> codes, Attribute a,
                                                                   Attribute b) {
    std::pair<std::vector<double>, std::vector<double>> out;
    for (const auto& c : codes) {
        auto x = c.get(a);
        auto y = c.get(b);
        if (x && y) {
            out.first.push_back(*x);
            out.second.push_back(*y);
        }
    }
    return out;
}

}  // namespace overgen::annotation
