#include "overgen/annotation/agreement.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "overgen/error.hpp"

namespace overgen::annotation {

std::string_view to_string(Scale scale) { return scale == Scale::nominal ? "nominal" : "interval"; }

AgreementReport krippendorff_alpha(const RatingMatrix& ratings, Scale scale) {
    // Distinct values observed in pairable units.
    std::vector<double> values;
    std::size_t pairable_units = 0;
    std::vector<bool> rater_seen;
    for (const auto& unit : ratings) {
        auto m = std::count_if(unit.begin(), unit.end(), [](const auto& v) { return v.has_value(); });
        if (m < 2) continue;
        ++pairable_units;
        if (rater_seen.size() < unit.size()) rater_seen.resize(unit.size(), false);
        for (std::size_t r = 0; r < unit.size(); ++r) {
            if (!unit[r]) continue;
            values.push_back(*unit[r]);
            rater_seen[r] = true;
        }
    }
    if (pairable_units < 2) throw PreconditionError("agreement needs at least two items with two or more ratings");
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    const std::size_t v = values.size();
    auto index_of = [&](double x) {
        return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), x) - values.begin());
    };

    std::vector<double> coincidence(v * v, 0.0);
    std::vector<double> counts(v, 0.0);
    for (const auto& unit : ratings) {
        std::fill(counts.begin(), counts.end(), 0.0);
        double m = 0.0;
        for (const auto& r : unit) {
            if (!r) continue;
            counts[index_of(*r)] += 1.0;
            m += 1.0;
        }
        if (m < 2.0) continue;
        for (std::size_t c = 0; c < v; ++c) {
            if (counts[c] == 0.0) continue;
            for (std::size_t k = 0; k < v; ++k) {
                double pairs = counts[c] * (counts[k] - (c == k ? 1.0 : 0.0));
                coincidence[c * v + k] += pairs / (m - 1.0);
            }
        }
    }

    auto delta = [&](std::size_t c, std::size_t k) {
        if (scale == Scale::nominal) return c == k ? 0.0 : 1.0;
        double d = values[c] - values[k];
        return d * d;
    };

    std::vector<double> marginals(v, 0.0);
    double n = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
        for (std::size_t k = 0; k < v; ++k) marginals[c] += coincidence[c * v + k];
        n += marginals[c];
    }
    double observed = 0.0;
    double expected = 0.0;
    for (std::size_t c = 0; c < v; ++c) {
        for (std::size_t k = 0; k < v; ++k) {
            double d = delta(c, k);
            observed += coincidence[c * v + k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    observed /= n;
    expected /= n * (n - 1.0);

    AgreementReport report;
    report.scale = scale;
    report.n_items = pairable_units;
    report.n_raters = static_cast<std::size_t>(std::count(rater_seen.begin(), rater_seen.end(), true));
    report.n_pairable = static_cast<std::size_t>(n + 0.5);
    report.observed_disagreement = observed;
    report.expected_disagreement = expected;
    if (expected > 0.0) report.alpha = 1.0 - observed / expected;
    return report;
}

double judgment_value(const Judgment& judgment) {
    if (auto* a = std::get_if<AcceptabilityPayload>(&judgment.payload)) return a->accept ? 1.0 : 0.0;
    if (auto* a = std::get_if<AbsolutePayload>(&judgment.payload)) return a->acceptable ? 1.0 : 0.0;
    const auto& h = std::get<HeadToHeadPayload>(judgment.payload);
    if (h.choice == HeadToHeadChoice::tie) return 0.0;
    const auto& winner = h.choice == HeadToHeadChoice::left ? h.left_source : h.right_source;
    const auto& loser = h.choice == HeadToHeadChoice::left ? h.right_source : h.left_source;
    return winner < loser ? 1.0 : -1.0;
}

RatingMatrix rating_matrix(std::span<const Judgment> judgments) {
    std::unordered_map<std::string, std::size_t> rows;
    std::unordered_map<std::string, std::size_t> cols;
    std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
    for (const auto& j : judgments) {
        if (j.excluded) continue;
        auto row = rows.emplace(j.subject_id, rows.size()).first->second;
        auto col = cols.emplace(j.annotator_id, cols.size()).first->second;
        cells.emplace_back(row, col, judgment_value(j));
    }
    RatingMatrix matrix(rows.size(), std::vector<std::optional<double>>(cols.size()));
    for (const auto& [row, col, value] : cells) matrix[row][col] = value;
    return matrix;
}

}  // namespace overgen::annotation
