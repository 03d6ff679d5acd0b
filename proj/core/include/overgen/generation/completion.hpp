#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/error.hpp"

namespace overgen::gen {

struct CompletionRequest {
    std::string prompt_text;
    int max_tokens = 64;
    /// 0 selects greedy decoding.
    double temperature = 0.0;
    std::vector<std::string> stop_sequences;
    bool want_logprobs = true;
    /// Sent as the `user` field; distinct per sample so seed-honoring endpoints stay reproducible.
    std::string seed_tag;

    bool is_greedy() const noexcept { return temperature == 0.0; }
};

struct CompletionResponse {
    std::string text;
    /// Token strings concatenate to `text` when the endpoint reports them.
    std::vector<std::string> tokens;
    std::vector<double> token_logprobs;
};

nlohmann::json to_json(const CompletionResponse& response);
CompletionResponse response_from_json(const nlohmann::json& j);

/// OpenAI-compatible request body.
nlohmann::json request_body(const CompletionRequest& request, const std::string& model);

class EndpointError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public EndpointError {
public:
    using EndpointError::EndpointError;
};

class HttpError : public EndpointError {
public:
    HttpError(int status, const std::string& what) : EndpointError(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class MalformedResponseError : public EndpointError {
public:
    using EndpointError::EndpointError;
};

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    /// Identifies the model behind the client; part of every cache key.
    virtual std::string model() const = 0;
};

/// Connection settings for an OpenAI-compatible completions endpoint.
struct EndpointConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/completions";
    std::string model = "text-davinci-002";
    std::string api_key;
    std::chrono::milliseconds timeout{30000};

    /// Reads OVERGEN_ENDPOINT_URL, OVERGEN_MODEL and OVERGEN_API_KEY (falling back to OPENAI_API_KEY).
    static EndpointConfig from_env(EndpointConfig defaults);
    static EndpointConfig from_env();
};

class HttpCompletionClient final : public CompletionClient {
public:
    explicit HttpCompletionClient(EndpointConfig config);
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string model() const override { return config_.model; }

private:
    EndpointConfig config_;
};

/// Splits text into GPT-style tokens: each token is optional leading whitespace plus a run of
/// non-space characters. Concatenating the tokens gives back the input.
std::vector<std::string> whitespace_tokenize(std::string_view text);

/// Deterministic in-process endpoint for tests and offline runs.
class MockCompletionClient final : public CompletionClient {
public:
    using Responder = std::function<std::string(const CompletionRequest&)>;

    /// Returns the scripted texts in order; throws EndpointError once the script is exhausted.
    explicit MockCompletionClient(std::vector<std::string> script);
    /// Computes each completion from the request.
    explicit MockCompletionClient(Responder responder);

    CompletionResponse complete(const CompletionRequest& request) override;
    std::string model() const override { return "mock"; }

    /// The next `n` calls throw TimeoutError before producing anything.
    void fail_next(int n) { pending_failures_ = n; }

    /// Completed or failed calls, i.e. what a network endpoint would have seen.
    int calls() const noexcept { return calls_; }

    /// Log-probability the mock assigns to `token` at `position`. Greedy requests get values closer
    /// to zero so the greedy candidate is usually, not always, the most likely one.
    static double token_logprob(const CompletionRequest& request, std::size_t position, std::string_view token);

private:
    std::mutex mutex_;
    std::vector<std::string> script_;
    std::size_t next_ = 0;
    Responder responder_;
    std::atomic<int> calls_{0};
    std::atomic<int> pending_failures_{0};
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{250};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};
    /// Called before each retry with the attempt number that failed and the error.
    std::function<void(int attempt, const EndpointError& error)> on_retry;
    /// Replaceable so tests do not sleep.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Retries timeouts, 429 and 5xx responses with bounded exponential backoff.
class RetryingClient final : public CompletionClient {
public:
    RetryingClient(std::shared_ptr<CompletionClient> inner, RetryPolicy policy = {});
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string model() const override { return inner_->model(); }

private:
    std::shared_ptr<CompletionClient> inner_;
    RetryPolicy policy_;
};

/// Content-addressed on-disk cache: one JSON file per request hash. Safe for concurrent use.
class CachingClient final : public CompletionClient {
public:
    CachingClient(std::shared_ptr<CompletionClient> inner, std::filesystem::path cache_dir);
    CompletionResponse complete(const CompletionRequest& request) override;
    std::string model() const override { return inner_->model(); }

    std::string cache_key(const CompletionRequest& request) const;
    int hits() const noexcept { return hits_; }
    int misses() const noexcept { return misses_; }

private:
    std::shared_ptr<CompletionClient> inner_;
    std::filesystem::path dir_;
    std::atomic<int> hits_{0};
    std::atomic<int> misses_{0};
};

/// Token bucket shared by concurrent requesters.
class RateLimiter {
public:
    /// `per_second` <= 0 disables limiting.
    explicit RateLimiter(double per_second, double burst = 1.0);
    void acquire();

private:
    std::mutex mutex_;
    double rate_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

}  // namespace overgen::gen
