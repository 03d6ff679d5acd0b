#include "overgen/prompt/token_counter.hpp"

#include <atomic>
#include <mutex>

namespace overgen::prompt {
namespace {

std::mutex g_counter_mutex;

std::shared_ptr<const TokenCounter>& counter_slot() {
    static std::shared_ptr<const TokenCounter> slot = std::make_shared<HeuristicTokenCounter>();
    return slot;
}

}  // namespace

void set_default_token_counter(std::shared_ptr<const TokenCounter> counter) {
    std::lock_guard lock(g_counter_mutex);
    counter_slot() = counter ? std::move(counter) : std::make_shared<HeuristicTokenCounter>();
}

std::shared_ptr<const TokenCounter> default_token_counter() {
    std::lock_guard lock(g_counter_mutex);
    return counter_slot();
}

std::size_t estimate_tokens(std::string_view text) { return default_token_counter()->count(text); }

std::size_t estimate_tokens(std::string_view text, const TokenCounter& counter) { return counter.count(text); }

}  // namespace overgen::prompt
