#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace overgen::metrics {

/// Ranks starting at 1; tied values share the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> x);

struct SpearmanResult {
    /// nullopt when either input has zero variance.
    std::optional<double> rho;
    /// Two-sided permutation p-value, (hits + 1) / (permutations + 1).
    std::optional<double> p_two_sided;
    std::size_t n = 0;
    int permutations = 0;
};

/// Pearson correlation of midranks. Throws PreconditionError on unequal lengths or n < 3.
SpearmanResult spearman_rho(std::span<const double> x, std::span<const double> y, int permutations = 10000,
                            std::uint64_t seed = 0);

struct WilcoxonResult {
    /// P(W+ >= observed) under the null; alternative "a > b".
    double p = 1.0;
    /// Sum of midranks of the positive differences.
    double w_plus = 0.0;
    std::size_t n_nonzero = 0;
    bool exact = false;
    /// Normal-approximation statistic (tie-corrected, no continuity correction); only when !exact.
    std::optional<double> z;
};

inline constexpr std::size_t kWilcoxonExactMax = 25;
inline constexpr std::size_t kWilcoxonMinPairs = 5;

/// One-sided signed-rank test. Zero differences are dropped; |d| ties get midranks. Exact null
/// distribution for up to 25 non-zero differences, normal approximation above. Throws PreconditionError
/// on unequal lengths or fewer than 5 non-zero differences.
WilcoxonResult wilcoxon_signed_rank_one_sided(std::span<const double> a, std::span<const double> b);

}  // namespace overgen::metrics
