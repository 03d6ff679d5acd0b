#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "overgen/error.hpp"
#include "overgen/prompt/template.hpp"
#include "overgen/prompt/token_counter.hpp"
#include "overgen/random.hpp"
#include "overgen/types.hpp"

namespace overgen::prompt {

class PoolExhaustedError : public Error {
public:
    using Error::Error;
};

class BudgetOverflowError : public Error {
public:
    using Error::Error;
};

/// What the prompt asks the model to produce.
enum class PromptStyle { explanation, label_prediction };

struct PromptConfig {
    std::vector<int> k_choices{8, 16, 24};
    int token_budget = 2049;
    /// Tokens kept free for the completion.
    int completion_reserve = 64;
    TemplateId template_id = TemplateId::mcqa_style;
    bool shuffle_choices = true;
    bool label_balance = false;
    std::uint64_t rng_seed = 0;
    /// Extra draws at the same k before stepping down to a smaller k.
    int max_resamples = 5;
    PromptStyle style = PromptStyle::explanation;
    /// Overrides for the built-in template and the default token counter.
    std::shared_ptr<const PromptTemplate> template_override;
    std::shared_ptr<const TokenCounter> counter;

    static PromptConfig mcqa_defaults();
    static PromptConfig nli_defaults();
    /// Pools whose explanations are long (ECQA-style); only {8, 16} fit the budget.
    static PromptConfig long_pool_defaults();
    static PromptConfig defaults_for(Task task);

    const PromptTemplate& prompt_template() const;
    std::shared_ptr<const TokenCounter> token_counter() const;
};

/// Throws PreconditionError when the config cannot work against a pool of `pool_size` examples.
void validate(const PromptConfig& cfg, std::size_t pool_size);

struct AssembledPrompt {
    std::string target_instance_id;
    std::vector<std::string> example_ids;
    std::string rendered_text;
    int estimated_tokens = 0;
    int k_used = 0;
    /// SHA-256 of rendered_text.
    std::string fingerprint;
    /// Number of draws it took to fit the budget (1 when the first draw fit).
    int attempts = 0;

    bool operator==(const AssembledPrompt&) const = default;
};

/// Builds a few-shot prompt for `target`: draws k from cfg.k_choices, samples k examples without
/// replacement (per label when balancing), shuffles their order and, for multiple-choice, each
/// instance's answer order. On budget overflow it redraws up to cfg.max_resamples times, then
/// steps down to the next smaller k, then throws BudgetOverflowError.
AssembledPrompt assemble_prompt(const TaskInstance& target, std::span<const PromptExample> pool, const PromptConfig& cfg,
                                Rng& rng);

/// Same, with the generator derived from cfg.rng_seed and the target id so results do not depend
/// on the order in which instances are processed.
AssembledPrompt assemble_prompt(const TaskInstance& target, std::span<const PromptExample> pool, const PromptConfig& cfg);

}  // namespace overgen::prompt
