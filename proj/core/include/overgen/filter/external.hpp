#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "overgen/error.hpp"
#include "overgen/filter/scoring.hpp"

namespace overgen::filter {

/// The scorer answered, but not per the protocol (bad JSON, wrong length, value outside [0, 1]).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// The scorer could not be reached or timed out.
class ScorerUnavailableError : public Error {
public:
    using Error::Error;
};

struct ExternalScorerConfig {
    /// Scheme, host and port, e.g. "http://127.0.0.1:8600".
    std::string base_url;
    std::size_t batch_size = 64;
    std::chrono::milliseconds timeout{30000};
};

/// Client side of the scoring protocol:
///   GET  /health    -> {"status": "ok", "version": "<string>"}
///   POST /v1/score  {"inputs": [text, ...]} -> {"probs": [p, ...]}, same length and order
class ExternalScorerClient {
public:
    explicit ExternalScorerClient(ExternalScorerConfig config);

    /// The scorer's version string.
    std::string health();

    /// One request. A length mismatch is retried once before raising ProtocolError.
    std::vector<double> score_batch(const std::vector<std::string>& inputs);

    const ExternalScorerConfig& config() const noexcept { return config_; }

private:
    std::vector<double> request_once(const std::vector<std::string>& inputs);
    ExternalScorerConfig config_;
};

/// backend_id is "external:<version>". A failed batch marks its items with the error and scoring
/// continues with the next batch.
class ExternalScorer final : public Scorer {
public:
    explicit ExternalScorer(ExternalScorerConfig config) : client_(std::move(config)) {}
    std::string backend_id() override;
    FilterScoreSet score(std::span<const ScoringItem> items) override;

private:
    ExternalScorerClient client_;
    std::string version_;
};

/// In-repo scorer speaking the protocol, backed by an arbitrary text rule.
class ReferenceScorerServer {
public:
    using Rule = std::function<double(std::string_view)>;

    ReferenceScorerServer(Rule rule, std::string version);
    explicit ReferenceScorerServer(KeywordRule rule);
    ~ReferenceScorerServer();
    ReferenceScorerServer(const ReferenceScorerServer&) = delete;
    ReferenceScorerServer& operator=(const ReferenceScorerServer&) = delete;

    /// Serves on a background thread. Port 0 picks a free port; returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

    /// The next `n` score responses drop their last probability.
    void truncate_next(int n);
    int score_requests() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace overgen::filter
