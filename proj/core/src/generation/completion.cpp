#include "overgen/generation/completion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "overgen/hashing.hpp"

namespace overgen::gen {

using nlohmann::json;

json to_json(const CompletionResponse& response) {
    return json{{"text", response.text}, {"tokens", response.tokens}, {"token_logprobs", response.token_logprobs}};
}

CompletionResponse response_from_json(const json& j) {
    CompletionResponse r;
    j.at("text").get_to(r.text);
    r.tokens = j.value("tokens", std::vector<std::string>{});
    r.token_logprobs = j.value("token_logprobs", std::vector<double>{});
    return r;
}

json request_body(const CompletionRequest& request, const std::string& model) {
    json body{{"model", model},
              {"prompt", request.prompt_text},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature},
              {"user", request.seed_tag}};
    if (request.want_logprobs) body["logprobs"] = 0;
    if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
    return body;
}

EndpointConfig EndpointConfig::from_env() { return from_env(EndpointConfig{}); }

EndpointConfig EndpointConfig::from_env(EndpointConfig defaults) {
    if (const char* url = std::getenv("OVERGEN_ENDPOINT_URL"); url && *url) defaults.base_url = url;
    if (const char* model = std::getenv("OVERGEN_MODEL"); model && *model) defaults.model = model;
    if (const char* key = std::getenv("OVERGEN_API_KEY"); key && *key) {
        defaults.api_key = key;
    } else if (const char* openai = std::getenv("OPENAI_API_KEY"); openai && *openai) {
        defaults.api_key = openai;
    }
    return defaults;
}

HttpCompletionClient::HttpCompletionClient(EndpointConfig config) : config_(std::move(config)) {}

CompletionResponse HttpCompletionClient::complete(const CompletionRequest& request) {
    httplib::Client client(config_.base_url);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto result = client.Post(config_.path, headers, request_body(request, config_.model).dump(), "application/json");
    if (!result) {
        auto err = result.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
            throw TimeoutError("completion endpoint timed out: " + httplib::to_string(err));
        throw EndpointError("completion endpoint unreachable: " + httplib::to_string(err));
    }
    if (result->status != 200)
        throw HttpError(result->status, "completion endpoint returned HTTP " + std::to_string(result->status));

    try {
        auto body = json::parse(result->body);
        const auto& choice = body.at("choices").at(0);
        CompletionResponse out;
        choice.at("text").get_to(out.text);
        if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
            out.tokens = lp->value("tokens", std::vector<std::string>{});
            for (const auto& v : lp->value("token_logprobs", json::array())) {
                // Some endpoints report null for the first token; treat it as certain.
                out.token_logprobs.push_back(v.is_number() ? std::min(0.0, v.get<double>()) : 0.0);
            }
            if (out.tokens.size() != out.token_logprobs.size())
                throw MalformedResponseError("tokens and token_logprobs differ in length");
        }
        return out;
    } catch (const json::exception& e) {
        throw MalformedResponseError(std::string("malformed completion body: ") + e.what());
    }
}

std::vector<std::string> whitespace_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = i;
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

MockCompletionClient::MockCompletionClient(std::vector<std::string> script) : script_(std::move(script)) {}

MockCompletionClient::MockCompletionClient(Responder responder) : responder_(std::move(responder)) {}

double MockCompletionClient::token_logprob(const CompletionRequest& request, std::size_t position, std::string_view token) {
    std::string key = request.seed_tag + "|" + std::to_string(position) + "|";
    key.append(token);
    double u = static_cast<double>(stable_hash64(key) >> 11) * 0x1.0p-53;
    double scale = request.is_greedy() ? 0.6 : 2.0;
    return -(0.01 + scale * u);
}

CompletionResponse MockCompletionClient::complete(const CompletionRequest& request) {
    ++calls_;
    int pending = pending_failures_.load();
    while (pending > 0) {
        if (pending_failures_.compare_exchange_weak(pending, pending - 1))
            throw TimeoutError("mock endpoint: injected timeout");
    }
    CompletionResponse out;
    if (responder_) {
        out.text = responder_(request);
    } else {
        std::lock_guard lock(mutex_);
        if (next_ >= script_.size()) throw EndpointError("mock endpoint: script exhausted");
        out.text = script_[next_++];
    }
    if (request.want_logprobs) {
        out.tokens = whitespace_tokenize(out.text);
        out.token_logprobs.reserve(out.tokens.size());
        for (std::size_t i = 0; i < out.tokens.size(); ++i) out.token_logprobs.push_back(token_logprob(request, i, out.tokens[i]));
    }
    return out;
}

RetryingClient::RetryingClient(std::shared_ptr<CompletionClient> inner, RetryPolicy policy)
    : inner_(std::move(inner)), policy_(std::move(policy)) {
    if (policy_.max_attempts < 1) policy_.max_attempts = 1;
    if (!policy_.sleep) policy_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (!policy_.on_retry) {
        policy_.on_retry = [](int attempt, const EndpointError& e) {
            spdlog::warn("completion attempt {} failed ({}); retrying", attempt, e.what());
        };
    }
}

namespace {

bool retryable(const EndpointError& e) {
    if (dynamic_cast<const TimeoutError*>(&e)) return true;
    if (auto http = dynamic_cast<const HttpError*>(&e)) return http->status() == 429 || http->status() >= 500;
    return false;
}

}  // namespace

CompletionResponse RetryingClient::complete(const CompletionRequest& request) {
    auto backoff = policy_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return inner_->complete(request);
        } catch (const EndpointError& e) {
            if (attempt >= policy_.max_attempts || !retryable(e)) throw;
            policy_.on_retry(attempt, e);
            policy_.sleep(backoff);
            auto next = std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy_.multiplier));
            backoff = std::min(next, policy_.max_backoff);
        }
    }
}

CachingClient::CachingClient(std::shared_ptr<CompletionClient> inner, std::filesystem::path cache_dir)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(dir_);
}

std::string CachingClient::cache_key(const CompletionRequest& request) const {
    return sha256_hex(request_body(request, inner_->model()).dump());
}

CompletionResponse CachingClient::complete(const CompletionRequest& request) {
    const auto key = cache_key(request);
    const auto path = dir_ / key.substr(0, 2) / (key + ".json");
    if (std::ifstream in(path, std::ios::binary); in) {
        try {
            auto cached = response_from_json(json::parse(in));
            ++hits_;
            return cached;
        } catch (const json::exception&) {
            spdlog::warn("ignoring corrupt cache entry {}", path.string());
        }
    }
    ++misses_;
    auto response = inner_->complete(request);
    std::filesystem::create_directories(path.parent_path());
    std::ostringstream tmp_name;
    tmp_name << key << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
    auto tmp = path.parent_path() / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << to_json(response).dump();
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) std::filesystem::remove(tmp, ec);
    return response;
}

RateLimiter::RateLimiter(double per_second, double burst)
    : rate_(per_second), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)), last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mutex_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

}  // namespace overgen::gen
