#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overgen/types.hpp"

namespace overgen::annotation {

enum class Scale { nominal, interval };

std::string_view to_string(Scale scale);

/// Items x raters; nullopt marks a missing rating.
using RatingMatrix = std::vector<std::vector<std::optional<double>>>;

struct AgreementReport {
    /// nullopt when expected disagreement is zero (every pairable value identical).
    std::optional<double> alpha;
    std::size_t n_items = 0;   // items with at least two ratings
    std::size_t n_raters = 0;  // raters contributing at least one pairable value
    std::size_t n_pairable = 0;
    Scale scale = Scale::nominal;
    double observed_disagreement = 0.0;
    double expected_disagreement = 0.0;
};

/// Krippendorff's alpha = 1 - D_o / D_e over the coincidence matrix. Items with fewer than two
/// ratings are not pairable and are ignored. Throws PreconditionError when fewer than two items
/// have two or more ratings.
AgreementReport krippendorff_alpha(const RatingMatrix& ratings, Scale scale);

/// Numeric value of a judgment for agreement purposes: acceptability and absolute "acceptable" map
/// to 1/0; head-to-head maps to +1 when the lexicographically first source wins, -1 for the
/// other, 0 for a tie.
double judgment_value(const Judgment& judgment);

/// Builds the items x raters matrix from non-excluded judgments. Row order follows first
/// appearance of each subject; column order follows first appearance of each annotator.
RatingMatrix rating_matrix(std::span<const Judgment> judgments);

}  // namespace overgen::annotation
