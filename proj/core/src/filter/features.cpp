#include "overgen/filter/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "overgen/error.hpp"
#include "overgen/hashing.hpp"

namespace overgen::filter {

namespace {

bool word_char(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && word_char(static_cast<unsigned char>(text[j]))) ++j;
            tokens.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            tokens.emplace_back(1, static_cast<char>(c));
            ++i;
        }
    }
    if (lowercase)
        for (auto& t : tokens)
            for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return tokens;
}

struct Accumulator {
    std::uint32_t mask;
    std::vector<SparseFeature> raw;

    void add(std::string_view feature) {
        const std::uint64_t h = stable_hash64(feature);
        raw.push_back({static_cast<std::uint32_t>(h) & mask, (h >> 63) ? -1.0 : 1.0});
    }
};

}  // namespace

SparseVector featurize(std::string_view text, const FeatureConfig& config) {
    if (config.dim_log2 == 0 || config.dim_log2 > 30 || config.word_ngram_max == 0 ||
        config.char_ngram_min == 0 || config.char_ngram_min > config.char_ngram_max)
        throw PreconditionError("invalid feature configuration");

    const auto tokens = tokenize(text, config.lowercase);
    Accumulator acc{config.dim() - 1, {}};
    std::string buf;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        buf = "w:";
        for (std::uint32_t n = 1; n <= config.word_ngram_max && i + n <= tokens.size(); ++n) {
            if (n > 1) buf += ' ';
            buf += tokens[i + n - 1];
            acc.add(buf);
        }
        if (!word_char(static_cast<unsigned char>(tokens[i][0]))) continue;
        const std::string marked = "<" + tokens[i] + ">";
        for (std::uint32_t n = config.char_ngram_min; n <= config.char_ngram_max; ++n) {
            if (n > marked.size()) break;
            for (std::size_t s = 0; s + n <= marked.size(); ++s) {
                buf = "c:";
                buf.append(marked, s, n);
                acc.add(buf);
            }
        }
    }

    auto& raw = acc.raw;
    std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    SparseVector out;
    for (const auto& f : raw) {
        if (!out.empty() && out.back().index == f.index)
            out.back().value += f.value;
        else
            out.push_back(f);
    }
    std::erase_if(out, [](const auto& f) { return f.value == 0.0; });
    double norm = 0.0;
    for (const auto& f : out) norm += f.value * f.value;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& f : out) f.value /= norm;
    }
    return out;
}

double dot(const SparseVector& x, const std::vector<double>& weights) {
    double s = 0.0;
    for (const auto& f : x) s += f.value * weights[f.index];
    return s;
}

}  // namespace overgen::filter
