#pragma once

// Brute-force reference computations. Deliberately slow and written without reference to the
// library implementations they check.

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace overgen::oracle {

/// Mean over positives of (positives scoring >= s_i) / (items scoring >= s_i), as a percent.
inline std::optional<double> average_precision(const std::vector<double>& scores, const std::vector<bool>& labels) {
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++positives;
        std::size_t above = 0, pos_above = 0;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (scores[j] >= scores[i]) {
                ++above;
                if (labels[j]) ++pos_above;
            }
        }
        sum += static_cast<double>(pos_above) / static_cast<double>(above);
    }
    if (positives == 0) return std::nullopt;
    return 100.0 * sum / static_cast<double>(positives);
}

/// Krippendorff's alpha from explicit pair enumeration. D_o averages delta over ordered pairs of
/// values within each unit, weighted 1/(m_u - 1); D_e averages delta over every ordered pair of
/// distinct pairable values in the whole matrix.
inline std::optional<double> krippendorff_alpha(const std::vector<std::vector<std::optional<double>>>& m,
                                                bool interval) {
    auto delta = [&](double a, double b) { return interval ? (a - b) * (a - b) : (a == b ? 0.0 : 1.0); };
    std::vector<double> pooled;
    double observed = 0.0;
    for (const auto& unit : m) {
        std::vector<double> vals;
        for (const auto& v : unit)
            if (v) vals.push_back(*v);
        if (vals.size() < 2) continue;
        for (std::size_t i = 0; i < vals.size(); ++i)
            for (std::size_t j = 0; j < vals.size(); ++j)
                if (i != j) observed += delta(vals[i], vals[j]) / static_cast<double>(vals.size() - 1);
        pooled.insert(pooled.end(), vals.begin(), vals.end());
    }
    const double n = static_cast<double>(pooled.size());
    double expected = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i)
        for (std::size_t j = 0; j < pooled.size(); ++j)
            if (i != j) expected += delta(pooled[i], pooled[j]);
    observed /= n;
    expected /= n * (n - 1.0);
    if (expected == 0.0) return std::nullopt;
    return 1.0 - observed / expected;
}

/// Midrank by counting: 1 + (number strictly smaller) + (ties other than itself) / 2.
inline std::vector<double> midranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double less = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (x[j] < x[i]) less += 1.0;
            if (x[j] == x[i] && j != i) equal += 1.0;
        }
        r[i] = 1.0 + less + equal / 2.0;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(midranks(x), midranks(y));
}

/// One-sided (a > b) Wilcoxon p-value by enumerating every sign assignment of the non-zero
/// differences: P(W+ >= observed W+) under the symmetric null.
inline double wilcoxon_exact(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    std::vector<double> mag(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::fabs(d[i]);
    const auto ranks = midranks(mag);
    double observed = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) observed += ranks[i];
    const std::size_t n = d.size();
    std::size_t hits = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) w += ranks[i];
        if (w >= observed - 1e-9) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(std::size_t{1} << n);
}

/// Percent of instances whose selected candidate is positive.
inline double select1(const std::vector<std::vector<bool>>& labels, const std::vector<std::size_t>& chosen) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i][chosen[i]]) ++hit;
    return 100.0 * static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Expected select-1 accuracy of a uniform random selector: mean of per-instance positive shares.
inline double random_select1_expectation(const std::vector<std::vector<bool>>& labels) {
    double sum = 0.0;
    for (const auto& inst : labels) {
        double pos = 0.0;
        for (bool l : inst) pos += l ? 1.0 : 0.0;
        sum += pos / static_cast<double>(inst.size());
    }
    return 100.0 * sum / static_cast<double>(labels.size());
}

/// Percent of instances with any positive candidate.
inline double oracle_select1(const std::vector<std::vector<bool>>& labels) {
    std::size_t any = 0;
    for (const auto& inst : labels) {
        for (bool l : inst)
            if (l) {
                ++any;
                break;
            }
    }
    return 100.0 * static_cast<double>(any) / static_cast<double>(labels.size());
}

}  // namespace overgen::oracle
