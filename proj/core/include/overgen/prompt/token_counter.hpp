#pragma once

#include <cstddef>
#include <memory>
#include <string_view>

namespace overgen::prompt {

/// Counts tokens in a prompt. Implementations must be monotone: appending text never lowers the count.
class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    virtual std::size_t count(std::string_view text) const = 0;
};

/// ceil(bytes / 4); no vocabulary needed.
class HeuristicTokenCounter final : public TokenCounter {
public:
    std::size_t count(std::string_view text) const override { return (text.size() + 3) / 4; }
};

/// Process-wide default, replaceable by an exact tokenizer. Passing nullptr restores the heuristic.
void set_default_token_counter(std::shared_ptr<const TokenCounter> counter);
std::shared_ptr<const TokenCounter> default_token_counter();

std::size_t estimate_tokens(std::string_view text);
std::size_t estimate_tokens(std::string_view text, const TokenCounter& counter);

}  // namespace overgen::prompt
