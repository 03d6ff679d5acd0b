#include "overgen/generation/generator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

namespace overgen::gen {

std::size_t GenerationRun::degenerate_count() const {
    return static_cast<std::size_t>(
        std::count_if(candidates.begin(), candidates.end(), [](const auto& c) { return c.degenerate; }));
}

std::string_view cut_at_stop(std::string_view text, std::span<const std::string> stops) {
    std::size_t cut = text.size();
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        cut = std::min(cut, text.find(stop));
    }
    return text.substr(0, cut);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string candidate_id(const std::string& instance_id, Decode decode) {
    return instance_id + (decode.is_greedy() ? "#g" : "#s" + std::to_string(decode.sample_index()));
}

}  // namespace

ExplanationCandidate make_candidate(const std::string& instance_id, Decode decode, const CompletionResponse& response,
                                    std::span<const std::string> stops, const std::string& prompt_fingerprint) {
    ExplanationCandidate c;
    c.candidate_id = candidate_id(instance_id, decode);
    c.instance_id = instance_id;
    c.decode = decode;
    c.prompt_fingerprint = prompt_fingerprint;

    auto kept = cut_at_stop(response.text, stops);
    c.text = std::string(trim(kept));
    c.degenerate = c.text.empty();

    // A token survives when it starts before the cut.
    std::size_t offset = 0;
    for (std::size_t i = 0; i < response.token_logprobs.size(); ++i) {
        if (!response.tokens.empty()) {
            if (offset >= kept.size()) break;
            offset += response.tokens[i].size();
        }
        c.token_logprobs.push_back(response.token_logprobs[i]);
    }
    c.total_logprob = std::accumulate(c.token_logprobs.begin(), c.token_logprobs.end(), 0.0);
    return c;
}

GenerationRun generate_candidates(const TaskInstance& instance, std::span<const PromptExample> pool,
                                  const prompt::PromptConfig& prompt_cfg, const GenerationConfig& gen_cfg,
                                  CompletionClient& client) {
    if (gen_cfg.n_sampled < 0) throw PreconditionError("n_sampled must be >= 0");
    prompt::PromptConfig cfg = prompt_cfg;
    cfg.style = prompt::PromptStyle::explanation;

    GenerationRun run;
    run.run_id = gen_cfg.run_id;
    run.instance_id = instance.id;
    run.n_sampled = gen_cfg.n_sampled;
    run.prompt = prompt::assemble_prompt(instance, pool, cfg);

    const auto& stops = cfg.prompt_template().stop_sequences();
    const std::string tag_prefix = gen_cfg.run_id + "/" + instance.id + "/";
    for (int i = 0; i <= gen_cfg.n_sampled; ++i) {
        CompletionRequest request;
        request.prompt_text = run.prompt.rendered_text;
        request.max_tokens = gen_cfg.max_tokens;
        request.temperature = i == 0 ? 0.0 : gen_cfg.temperature;
        request.stop_sequences = stops;
        request.want_logprobs = true;
        request.seed_tag = tag_prefix + (i == 0 ? std::string("greedy") : "sample-" + std::to_string(i));
        if (i > 0 && request.temperature == 0.0) throw PreconditionError("sampled requests need temperature > 0");

        auto decode = i == 0 ? Decode::greedy() : Decode::sampled(i);
        auto candidate = make_candidate(instance.id, decode, client.complete(request), stops, run.prompt.fingerprint);
        if (candidate.degenerate) spdlog::warn("empty completion for {} ({})", instance.id, decode.to_string());
        run.candidates.push_back(std::move(candidate));
    }
    return run;
}

namespace {

/// Decorator that routes every request through a shared limiter.
class LimitedClient final : public CompletionClient {
public:
    LimitedClient(CompletionClient& inner, RateLimiter& limiter) : inner_(inner), limiter_(limiter) {}
    CompletionResponse complete(const CompletionRequest& request) override {
        limiter_.acquire();
        return inner_.complete(request);
    }
    std::string model() const override { return inner_.model(); }

private:
    CompletionClient& inner_;
    RateLimiter& limiter_;
};

}  // namespace

std::vector<GenerationRun> generate_all(std::span<const TaskInstance> instances, std::span<const PromptExample> pool,
                                        const prompt::PromptConfig& prompt_cfg, const GenerationConfig& gen_cfg,
                                        CompletionClient& client) {
    std::vector<GenerationRun> runs(instances.size());
    RateLimiter limiter(gen_cfg.requests_per_second, std::max(1, gen_cfg.parallelism));
    LimitedClient limited(client, limiter);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            if (failed) return;
            std::size_t i = next++;
            if (i >= instances.size()) return;
            try {
                runs[i] = generate_candidates(instances[i], pool, prompt_cfg, gen_cfg, limited);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
                return;
            }
        }
    };

    const auto width = static_cast<std::size_t>(std::max(1, gen_cfg.parallelism));
    std::vector<std::jthread> pool_threads;
    for (std::size_t t = 1; t < std::min(width, instances.size()); ++t) pool_threads.emplace_back(worker);
    worker();
    pool_threads.clear();
    if (first_error) std::rethrow_exception(first_error);
    return runs;
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::optional<std::string> parse_label(std::string_view completion, const TaskInstance& instance,
                                       const prompt::PromptTemplate& tmpl) {
    std::string_view line;
    std::string_view rest = completion;
    while (!rest.empty()) {
        auto nl = rest.find('\n');
        line = trim(rest.substr(0, nl));
        if (!line.empty()) break;
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    }
    if (line.empty()) return std::nullopt;
    const auto text = lower(line);

    // (surface form, label)
    std::vector<std::pair<std::string, std::string>> vocab;
    if (instance.task == Task::nli) {
        for (auto label : kNliLabels) vocab.emplace_back(lower(tmpl.label_word(std::string(label))), std::string(label));
    } else {
        for (const auto& choice : instance.choices) vocab.emplace_back(lower(choice), choice);
    }

    std::optional<std::string> best;
    std::size_t best_len = 0;
    for (const auto& [surface, label] : vocab) {
        if (surface.empty() || !text.starts_with(surface)) continue;
        bool boundary = text.size() == surface.size() || !std::isalnum(static_cast<unsigned char>(text[surface.size()]));
        if (boundary && surface.size() > best_len) {
            best = label;
            best_len = surface.size();
        }
    }
    return best;
}

LabelPrediction predict_label(const TaskInstance& instance, std::span<const PromptExample> pool,
                              prompt::PromptConfig prompt_cfg, CompletionClient& client, int max_tokens) {
    prompt_cfg.style = prompt::PromptStyle::label_prediction;
    auto assembled = prompt::assemble_prompt(instance, pool, prompt_cfg);

    CompletionRequest request;
    request.prompt_text = assembled.rendered_text;
    request.max_tokens = max_tokens;
    request.temperature = 0.0;
    request.stop_sequences = {prompt_cfg.prompt_template().separator()};
    request.want_logprobs = false;
    request.seed_tag = "label/" + instance.id;

    LabelPrediction out;
    out.instance_id = instance.id;
    out.completion = client.complete(request).text;
    out.predicted_label = parse_label(out.completion, instance, prompt_cfg.prompt_template());
    out.correct = out.predicted_label && *out.predicted_label == instance.gold_label;
    return out;
}

double label_accuracy(std::span<const LabelPrediction> predictions) {
    if (predictions.empty()) throw PreconditionError("no predictions");
    auto correct = std::count_if(predictions.begin(), predictions.end(), [](const auto& p) { return p.correct; });
    return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace overgen::gen
