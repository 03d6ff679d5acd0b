#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace overgen::filter {

/// Bumped whenever featurize() output changes for the same config. Stored in model artifacts.
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureConfig {
    std::uint32_t dim_log2 = 18;
    std::uint32_t word_ngram_max = 2;
    std::uint32_t char_ngram_min = 3;
    std::uint32_t char_ngram_max = 5;
    bool lowercase = true;

    std::uint32_t dim() const noexcept { return 1u << dim_log2; }
    bool operator==(const FeatureConfig&) const = default;
};

struct SparseFeature {
    std::uint32_t index;
    double value;
};

/// Sorted by index, no duplicates, unit L2 norm (or empty).
using SparseVector = std::vector<SparseFeature>;

/// Signed feature hashing of word n-grams and boundary-marked character n-grams of each word.
/// Words are maximal runs of ASCII letters and digits plus any non-ASCII byte; other ASCII characters
/// become single-character tokens.
SparseVector featurize(std::string_view text, const FeatureConfig& config);

double dot(const SparseVector& x, const std::vector<double>& weights);

}  // namespace overgen::filter
