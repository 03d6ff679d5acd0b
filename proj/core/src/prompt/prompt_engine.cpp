#include "overgen/prompt/prompt_engine.hpp"

#include <algorithm>
#include <map>

#include "overgen/hashing.hpp"

namespace overgen::prompt {

PromptConfig PromptConfig::mcqa_defaults() {
    PromptConfig cfg;
    cfg.k_choices = {8, 16, 24};
    cfg.template_id = TemplateId::mcqa_style;
    cfg.shuffle_choices = true;
    cfg.label_balance = false;
    return cfg;
}

PromptConfig PromptConfig::nli_defaults() {
    PromptConfig cfg;
    cfg.k_choices = {12, 18, 24};
    cfg.template_id = TemplateId::nli_qa_style;
    cfg.shuffle_choices = false;
    cfg.label_balance = true;
    return cfg;
}

PromptConfig PromptConfig::long_pool_defaults() {
    PromptConfig cfg = mcqa_defaults();
    cfg.k_choices = {8, 16};
    return cfg;
}

PromptConfig PromptConfig::defaults_for(Task task) {
    return task == Task::nli ? nli_defaults() : mcqa_defaults();
}

const PromptTemplate& PromptConfig::prompt_template() const {
    return template_override ? *template_override : PromptTemplate::builtin(template_id);
}

std::shared_ptr<const TokenCounter> PromptConfig::token_counter() const {
    return counter ? counter : default_token_counter();
}

void validate(const PromptConfig& cfg, std::size_t pool_size) {
    if (cfg.k_choices.empty()) throw PreconditionError("k_choices is empty");
    for (int k : cfg.k_choices) {
        if (k < 1) throw PreconditionError("k must be positive");
        if (static_cast<std::size_t>(k) > pool_size)
            throw PoolExhaustedError("k=" + std::to_string(k) + " exceeds the pool size " + std::to_string(pool_size));
        if (cfg.label_balance && k % 3 != 0)
            throw PreconditionError("label-balanced prompts need k divisible by 3, got " + std::to_string(k));
    }
    if (cfg.completion_reserve < 0 || cfg.completion_reserve >= cfg.token_budget)
        throw PreconditionError("completion reserve must be in [0, token_budget)");
    if (cfg.max_resamples < 0) throw PreconditionError("max_resamples must be >= 0");
}

namespace {

/// Pool entries usable for a target: same task, not the target itself.
std::vector<const PromptExample*> eligible_pool(const TaskInstance& target, std::span<const PromptExample> pool) {
    std::vector<const PromptExample*> out;
    out.reserve(pool.size());
    for (const auto& ex : pool) {
        if (ex.instance.id != target.id && ex.instance.task == target.task) out.push_back(&ex);
    }
    return out;
}

/// Draws `count` distinct entries, appending them to `out` (partial Fisher-Yates).
void draw_without_replacement(std::vector<const PromptExample*> items, std::size_t count, Rng& rng,
                              std::vector<const PromptExample*>& out) {
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + rng.uniform_index(items.size() - i);
        std::swap(items[i], items[j]);
        out.push_back(items[i]);
    }
}

std::vector<std::size_t> choice_order(const TaskInstance& instance, bool shuffle, Rng& rng) {
    auto order = identity_order(instance.choices.size());
    if (shuffle && instance.task == Task::mcqa) rng.shuffle(std::span<std::size_t>(order));
    return order;
}

struct Draw {
    std::vector<const PromptExample*> examples;
    std::string text;
    std::size_t tokens = 0;
};

}  // namespace

AssembledPrompt assemble_prompt(const TaskInstance& target, std::span<const PromptExample> pool, const PromptConfig& cfg,
                                Rng& rng) {
    const auto candidates = eligible_pool(target, pool);
    validate(cfg, candidates.size());
    const bool balance = cfg.label_balance && target.task == Task::nli;

    std::map<std::string, std::vector<const PromptExample*>> by_label;
    if (balance) {
        for (auto label : kNliLabels) by_label[std::string(label)];
        for (const auto* ex : candidates) by_label[ex->instance.gold_label].push_back(ex);
        for (int k : cfg.k_choices) {
            for (const auto& [label, group] : by_label) {
                if (group.size() < static_cast<std::size_t>(k / 3))
                    throw PoolExhaustedError("pool has " + std::to_string(group.size()) + " '" + label +
                                             "' examples; k=" + std::to_string(k) + " needs " + std::to_string(k / 3));
            }
        }
    }

    const auto& tmpl = cfg.prompt_template();
    const auto counter = cfg.token_counter();
    const auto limit = static_cast<std::size_t>(cfg.token_budget - cfg.completion_reserve);

    auto draw = [&](int k) {
        Draw d;
        if (balance) {
            for (const auto& [label, group] : by_label) draw_without_replacement(group, k / 3, rng, d.examples);
        } else {
            draw_without_replacement(candidates, k, rng, d.examples);
        }
        rng.shuffle(std::span<const PromptExample*>(d.examples));

        std::vector<std::string> blocks;
        blocks.reserve(d.examples.size() + 1);
        for (const auto* ex : d.examples) {
            auto order = choice_order(ex->instance, cfg.shuffle_choices, rng);
            blocks.push_back(cfg.style == PromptStyle::explanation ? tmpl.render_example(*ex, order)
                                                                   : tmpl.render_label_example(ex->instance, order));
        }
        auto order = choice_order(target, cfg.shuffle_choices, rng);
        blocks.push_back(cfg.style == PromptStyle::explanation ? tmpl.render_target(target, order)
                                                               : tmpl.render_label_target(target, order));
        d.text = tmpl.join(blocks);
        d.tokens = counter->count(d.text);
        return d;
    };

    std::vector<int> ladder = cfg.k_choices;
    std::sort(ladder.begin(), ladder.end());
    ladder.erase(std::unique(ladder.begin(), ladder.end()), ladder.end());
    int k = cfg.k_choices[rng.uniform_index(cfg.k_choices.size())];

    int attempts = 0;
    auto rung = std::find(ladder.begin(), ladder.end(), k);
    for (;;) {
        for (int i = 0; i <= cfg.max_resamples; ++i) {
            ++attempts;
            Draw d = draw(*rung);
            if (d.tokens <= limit) {
                AssembledPrompt out;
                out.target_instance_id = target.id;
                out.k_used = *rung;
                out.estimated_tokens = static_cast<int>(d.tokens);
                for (const auto* ex : d.examples) out.example_ids.push_back(ex->instance.id);
                out.fingerprint = sha256_hex(d.text);
                out.rendered_text = std::move(d.text);
                out.attempts = attempts;
                return out;
            }
        }
        if (rung == ladder.begin()) break;
        --rung;
    }
    throw BudgetOverflowError("prompt for " + target.id + " exceeds " + std::to_string(limit) + " tokens after " +
                              std::to_string(attempts) + " draws down to k=" + std::to_string(ladder.front()));
}

AssembledPrompt assemble_prompt(const TaskInstance& target, std::span<const PromptExample> pool, const PromptConfig& cfg) {
    Rng rng = Rng::derive(cfg.rng_seed, target.id);
    return assemble_prompt(target, pool, cfg, rng);
}

}  // namespace overgen::prompt
