#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "overgen/generation/completion.hpp"

namespace overgen::pipeline {

struct DemoResponderConfig {
    /// Word that the synthetic raters treat as the sign of an acceptable explanation.
    std::string marker = "because";
    double greedy_marker_rate = 0.45;
    double sample_marker_rate = 0.3;
    std::uint64_t seed = 0;
};

/// Completion function for the mock endpoint. Explanation prompts (ending in "why?") get a short
/// sentence built from the target question, containing the marker at the configured rates; label
/// prompts get one of the listed answer choices. Deterministic in the request.
gen::MockCompletionClient::Responder demo_responder(DemoResponderConfig config);

struct DemoProjectOptions {
    std::size_t n_instances = 300;
    std::size_t pool_size = 48;
    std::uint64_t seed = 7;
    std::string experiment = "demo";
};

/// Writes a synthetic multiple-choice project: data/instances.jsonl, data/pool.jsonl and config.toml
/// (mock endpoint, builtin filter). Returns the config path.
std::filesystem::path write_demo_project(const std::filesystem::path& dir, const DemoProjectOptions& options = {});

}  // namespace overgen::pipeline
