#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "overgen/generation/completion.hpp"
#include "overgen/prompt/prompt_engine.hpp"
#include "overgen/types.hpp"

namespace overgen::gen {

struct GenerationConfig {
    int n_sampled = 4;
    /// Not reported for the original samples; exposed with a documented default.
    double temperature = 0.9;
    int max_tokens = 64;
    std::string run_id = "run";
    /// Concurrent requests in generate_all.
    int parallelism = 4;
    /// Shared request rate cap; <= 0 means unlimited.
    double requests_per_second = 0.0;
};

/// One greedy candidate followed by n_sampled stochastic ones.
struct GenerationRun {
    std::string run_id;
    std::string instance_id;
    int n_sampled = 0;
    std::vector<ExplanationCandidate> candidates;
    prompt::AssembledPrompt prompt;

    std::size_t degenerate_count() const;
};

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string_view cut_at_stop(std::string_view text, std::span<const std::string> stops);

/// Builds a candidate from a raw completion: cut at the first stop sequence, trimmed, with the
/// logprobs of the tokens that survive the cut.
ExplanationCandidate make_candidate(const std::string& instance_id, Decode decode, const CompletionResponse& response,
                                    std::span<const std::string> stops, const std::string& prompt_fingerprint);

GenerationRun generate_candidates(const TaskInstance& instance, std::span<const PromptExample> pool,
                                  const prompt::PromptConfig& prompt_cfg, const GenerationConfig& gen_cfg,
                                  CompletionClient& client);

/// Runs generate_candidates over many instances with bounded parallelism. Output order matches
/// `instances` regardless of completion order. The first failure is rethrown after all workers stop.
std::vector<GenerationRun> generate_all(std::span<const TaskInstance> instances, std::span<const PromptExample> pool,
                                        const prompt::PromptConfig& prompt_cfg, const GenerationConfig& gen_cfg,
                                        CompletionClient& client);

struct LabelPrediction {
    std::string instance_id;
    std::string completion;
    std::optional<std::string> predicted_label;
    bool correct = false;

    bool parsed() const noexcept { return predicted_label.has_value(); }
};

/// Maps a completion onto the instance's label vocabulary: first non-empty line, case-insensitive,
/// longest vocabulary entry the line starts with (on a word boundary). NLI words map back through
/// the template (true -> entailment).
std::optional<std::string> parse_label(std::string_view completion, const TaskInstance& instance,
                                       const prompt::PromptTemplate& tmpl);

/// Few-shot label prediction: example blocks carry labels but no explanations, and the target block
/// ends at the label slot.
LabelPrediction predict_label(const TaskInstance& instance, std::span<const PromptExample> pool,
                              prompt::PromptConfig prompt_cfg, CompletionClient& client, int max_tokens = 8);

/// Percentage of correct predictions; unparseable completions count as wrong.
double label_accuracy(std::span<const LabelPrediction> predictions);

}  // namespace overgen::gen
