#include "overgen/metrics/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "overgen/error.hpp"
#include "overgen/random.hpp"

namespace overgen::metrics {

std::vector<double> midranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = rank;
        i = j + 1;
    }
    return r;
}

namespace {

/// Rank deviations from the mean rank. The mean of 1..n midranks is exactly (n + 1) / 2.
std::vector<double> centered_ranks(std::span<const double> x) {
    auto r = midranks(x);
    const double mean = (static_cast<double>(x.size()) + 1.0) / 2.0;
    for (auto& v : r) v -= mean;
    return r;
}

double sum_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double cross(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

SpearmanResult spearman_rho(std::span<const double> x, std::span<const double> y, int permutations,
                            std::uint64_t seed) {
    if (x.size() != y.size()) throw PreconditionError("spearman: inputs differ in length");
    if (x.size() < 3) throw PreconditionError("spearman: need at least three pairs");
    if (permutations < 0) throw PreconditionError("spearman: negative permutation count");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isnan(x[i]) || std::isnan(y[i])) throw PreconditionError("spearman: NaN input");

    SpearmanResult res;
    res.n = x.size();
    res.permutations = permutations;
    const auto rx = centered_ranks(x);
    auto ry = centered_ranks(y);
    const double sxx = sum_sq(rx), syy = sum_sq(ry);
    if (sxx == 0.0 || syy == 0.0) return res;
    const double denom = std::sqrt(sxx * syy);
    const double rho = cross(rx, ry) / denom;
    res.rho = rho;
    if (permutations == 0) return res;

    // Shuffling y's ranks leaves the denominator unchanged.
    const double observed = std::fabs(cross(rx, ry));
    const double tol = 1e-12 * denom;
    Rng rng(derive_seed(seed, "spearman-permutation"));
    int hits = 0;
    for (int p = 0; p < permutations; ++p) {
        rng.shuffle(std::span<double>(ry));
        if (std::fabs(cross(rx, ry)) >= observed - tol) ++hits;
    }
    res.p_two_sided = static_cast<double>(hits + 1) / static_cast<double>(permutations + 1);
    return res;
}

WilcoxonResult wilcoxon_signed_rank_one_sided(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw PreconditionError("wilcoxon: inputs differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) || std::isnan(b[i])) throw PreconditionError("wilcoxon: NaN input");
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    }
    if (d.size() < kWilcoxonMinPairs)
        throw PreconditionError("wilcoxon: " + std::to_string(d.size()) + " non-zero differences, need at least " +
                                std::to_string(kWilcoxonMinPairs));
    std::vector<double> mag(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::fabs(d[i]);
    const auto ranks = midranks(mag);

    WilcoxonResult res;
    res.n_nonzero = d.size();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) res.w_plus += ranks[i];

    const std::size_t n = d.size();
    if (n <= kWilcoxonExactMax) {
        // Midranks are multiples of 1/2, so doubled ranks are integers.
        std::vector<std::size_t> r2(n);
        std::size_t total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
            total += r2[i];
        }
        std::vector<std::uint64_t> ways(total + 1, 0);
        ways[0] = 1;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = total; s >= r2[i]; --s) {
                ways[s] += ways[s - r2[i]];
                if (s == r2[i]) break;
            }
        const auto observed = static_cast<std::size_t>(std::llround(2.0 * res.w_plus));
        std::uint64_t at_least = 0;
        for (std::size_t s = observed; s <= total; ++s) at_least += ways[s];
        res.p = static_cast<double>(at_least) / std::ldexp(1.0, static_cast<int>(n));
        res.exact = true;
        return res;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    auto sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i);
        var -= (t * t * t - t) / 48.0;
        i = j;
    }
    const double z = var > 0.0 ? (res.w_plus - mean) / std::sqrt(var) : 0.0;
    res.z = z;
    res.p = 0.5 * std::erfc(z / std::sqrt(2.0));
    return res;
}

}  // namespace overgen::metrics
