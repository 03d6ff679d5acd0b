#include "overgen/filter/external.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace overgen::filter {

using nlohmann::json;

namespace {

httplib::Client make_client(const ExternalScorerConfig& config) {
    httplib::Client client(config.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    return client;
}

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("scorer returned invalid JSON: ") + e.what());
    }
}

class LengthMismatch : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

}  // namespace

ExternalScorerClient::ExternalScorerClient(ExternalScorerConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw PreconditionError("external scorer needs a base URL");
    if (config_.batch_size == 0) throw PreconditionError("external scorer batch size must be positive");
}

std::string ExternalScorerClient::health() {
    auto client = make_client(config_);
    auto res = client.Get("/health");
    if (!res) throw ScorerUnavailableError("scorer health check failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ProtocolError("scorer health returned HTTP " + std::to_string(res->status));
    auto body = parse_body(res->body);
    if (!body.contains("version") || !body["version"].is_string())
        throw ProtocolError("scorer health response lacks a version string");
    return body["version"].get<std::string>();
}

std::vector<double> ExternalScorerClient::request_once(const std::vector<std::string>& inputs) {
    auto client = make_client(config_);
    auto res = client.Post("/v1/score", json{{"inputs", inputs}}.dump(), "application/json");
    if (!res) throw ScorerUnavailableError("score request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ProtocolError("score request returned HTTP " + std::to_string(res->status));
    auto body = parse_body(res->body);
    if (!body.contains("probs") || !body["probs"].is_array()) throw ProtocolError("response lacks a probs array");
    const auto& probs = body["probs"];
    if (probs.size() != inputs.size())
        throw LengthMismatch("scorer returned " + std::to_string(probs.size()) + " probs for " +
                             std::to_string(inputs.size()) + " inputs");
    std::vector<double> out;
    out.reserve(probs.size());
    for (const auto& p : probs) {
        if (!p.is_number()) throw ProtocolError("non-numeric probability in response");
        const double v = p.get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw ProtocolError("probability outside [0, 1]: " + p.dump());
        out.push_back(v);
    }
    return out;
}

std::vector<double> ExternalScorerClient::score_batch(const std::vector<std::string>& inputs) {
    try {
        return request_once(inputs);
    } catch (const LengthMismatch& e) {
        spdlog::warn("external scorer: {}; retrying batch once", e.what());
    }
    try {
        return request_once(inputs);
    } catch (const LengthMismatch& e) {
        throw ProtocolError(e.what());
    }
}

std::string ExternalScorer::backend_id() {
    if (version_.empty()) version_ = client_.health();
    return "external:" + version_;
}

FilterScoreSet ExternalScorer::score(std::span<const ScoringItem> items) {
    FilterScoreSet out;
    out.backend_id = backend_id();
    out.scores.resize(items.size());
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.scores[i].candidate_id = items[i].candidate.candidate_id;
        if (items[i].input)
            live.push_back(i);
        else
            out.scores[i].error = "degenerate candidate";
    }
    const std::size_t batch = client_.config().batch_size;
    for (std::size_t start = 0; start < live.size(); start += batch) {
        const std::size_t end = std::min(live.size(), start + batch);
        std::vector<std::string> inputs;
        for (std::size_t k = start; k < end; ++k) inputs.push_back(format_filter_input(*items[live[k]].input));
        try {
            auto probs = client_.score_batch(inputs);
            for (std::size_t k = start; k < end; ++k) out.scores[live[k]].value = probs[k - start];
        } catch (const Error& e) {
            spdlog::error("external scorer batch {}-{} failed: {}", start, end, e.what());
            for (std::size_t k = start; k < end; ++k) out.scores[live[k]].error = e.what();
        }
    }
    return out;
}

struct ReferenceScorerServer::Impl {
    Rule rule;
    std::string version;
    httplib::Server server;
    std::jthread thread;
    std::atomic<int> truncate{0};
    std::atomic<int> requests{0};

    void install() {
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"status", "ok"}, {"version", version}}.dump(), "application/json");
        });
        server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error&) {
                res.status = 400;
                res.set_content(json{{"error", "invalid JSON"}}.dump(), "application/json");
                return;
            }
            if (!body.contains("inputs") || !body["inputs"].is_array()) {
                res.status = 400;
                res.set_content(json{{"error", "expected {\"inputs\": [...]}"}}.dump(), "application/json");
                return;
            }
            std::vector<double> probs;
            for (const auto& input : body["inputs"]) probs.push_back(rule(input.get<std::string>()));
            int pending = truncate.load();
            while (pending > 0 && !truncate.compare_exchange_weak(pending, pending - 1)) {
            }
            if (pending > 0 && !probs.empty()) probs.pop_back();
            res.set_content(json{{"probs", probs}, {"version", version}}.dump(), "application/json");
        });
    }
};

ReferenceScorerServer::ReferenceScorerServer(Rule rule, std::string version) : impl_(std::make_unique<Impl>()) {
    impl_->rule = std::move(rule);
    impl_->version = std::move(version);
    impl_->install();
}

ReferenceScorerServer::ReferenceScorerServer(KeywordRule rule)
    : ReferenceScorerServer([r = rule](std::string_view text) { return r(text); }, rule.version) {}

ReferenceScorerServer::~ReferenceScorerServer() { stop(); }

int ReferenceScorerServer::start(const std::string& host, int port) {
    const int bound =
        port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind scorer on " + host + ":" + std::to_string(port));
    impl_->thread = std::jthread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ReferenceScorerServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void ReferenceScorerServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void ReferenceScorerServer::truncate_next(int n) { impl_->truncate = n; }

int ReferenceScorerServer::score_requests() const { return impl_->requests; }

}  // namespace overgen::filter
