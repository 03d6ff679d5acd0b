#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overgen/annotation/agreement.hpp"
#include "overgen/types.hpp"

namespace overgen::annotation {

struct QcConfig {
    /// Median time per page below this flags the annotator.
    std::int64_t min_median_ms = 5000;
    /// Flag when removing the annotator raises alpha by more than this.
    double max_alpha_gain = 0.05;
    Scale scale = Scale::nominal;
};

struct AnnotatorQc {
    std::string annotator_id;
    std::size_t judgments = 0;
    double median_ms = 0.0;
    /// alpha without this annotator minus alpha with everyone; nullopt when either is undefined.
    std::optional<double> leave_one_out_alpha_delta;
    bool time_flag = false;
    bool alpha_flag = false;

    bool flagged() const noexcept { return time_flag || alpha_flag; }
};

/// Per-annotator timing and leave-one-out agreement, ordered by annotator id. Excluded judgments
/// are ignored.
std::vector<AnnotatorQc> annotator_qc(std::span<const Judgment> judgments, const QcConfig& config = {});

/// Attributes of the absolute questionnaire, coded on [-1, 1].
enum class Attribute { generality, factuality, grammar, new_info, supports_label, amount_info, acceptable };

inline constexpr std::array<Attribute, 7> kAttributes{Attribute::generality,     Attribute::factuality,
                                                      Attribute::grammar,        Attribute::new_info,
                                                      Attribute::supports_label, Attribute::amount_info,
                                                      Attribute::acceptable};

std::string_view to_string(Attribute attribute);

/// Coded answers of one questionnaire; nullopt where the question was not asked or has no code.
struct AttributeCodes {
    std::array<std::optional<double>, kAttributes.size()> values{};

    std::optional<double> get(Attribute a) const { return values[static_cast<std::size_t>(a)]; }
};

/// Binary answers -> {-1, +1}; factuality -> {-1, 0, +1} (generally false / sometimes / generally
/// true, uncoded for need-more-info); amount -> {-1, 0, +1} (not enough / enough / too much);
/// generality -> -1 iff the rater needed more information.
std::vector<AttributeCodes> encode_absolute_scores(std::span<const AbsolutePayload> payloads);

/// Answered values of one attribute, in input order.
std::vector<double> attribute_column(std::span<const AttributeCodes> codes, Attribute attribute);

/// Paired values of two attributes over questionnaires where both were answered.
std::pair<std::vector<double>, std::vector<double>> paired_columns(std::span<const AttributeCodes> codes, Attribute a,
                                                                   Attribute b);

}  // namespace overgen::annotation
