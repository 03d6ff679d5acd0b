#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/corpus.hpp"
#include "overgen/error.hpp"
#include "overgen/filter/linear_model.hpp"
#include "overgen/filter/training_set.hpp"
#include "overgen/generation/generator.hpp"
#include "overgen/prompt/prompt_engine.hpp"

namespace overgen::pipeline {

/// Bad or inconsistent configuration. Exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class BackendKind { nll, builtin, external };

struct BackendSpec {
    BackendKind kind = BackendKind::builtin;
    /// Scorer base URL for external backends.
    std::string url;

    /// "nll", "builtin" or "external:<url>".
    static BackendSpec parse(std::string_view text);
    std::string to_string() const;
};

struct DataConfig {
    Task task = Task::mcqa;
    std::filesystem::path corpus;
    CorpusFormat corpus_format = CorpusFormat::jsonl;
    std::filesystem::path prompt_pool;
    CorpusFormat pool_format = CorpusFormat::jsonl;
};

struct EndpointConfig {
    /// "mock" runs the in-process deterministic endpoint; "http" an OpenAI-compatible server.
    std::string kind = "mock";
    std::string base_url = "https://api.openai.com";
    std::string model = "text-davinci-002";
    /// Environment variable holding the API key; the key itself never appears in config files.
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_ms = 30000;
    bool cache = true;
};

struct AnnotationConfig {
    int raters_per_item = 3;
    int batch_size = 5;
    std::string host = "127.0.0.1";
    int port = 8600;
    std::filesystem::path ui_dir;
    std::string admin_token_env = "OVERGEN_ADMIN_TOKEN";
    /// Rater bearer token -> annotator id.
    std::map<std::string, std::string> annotator_tokens;
    /// Synthetic raters accept a candidate iff its text contains this marker (case-insensitive).
    std::string planted_marker = "because";
    int synthetic_annotators = 5;
    double synthetic_error_rate = 0.1;
};

struct FilterConfig {
    BackendSpec backend;
    filter::FilterMode mode = filter::FilterMode::full;
    filter::LabelScheme scheme = filter::LabelScheme::with_agreement;
    filter::TrainConfig train;
    bool nll_mean = false;
    bool audit = true;
    std::size_t external_batch = 64;
    int external_timeout_ms = 30000;
};

struct EvalConfig {
    Threshold threshold = Threshold::at_3of3;
    int n_random_trials = 5;
    int permutations = 10000;
    /// Empty: every non-train split present.
    std::vector<Split> splits;
};

struct RunConfig {
    std::string experiment_name = "experiment";
    std::uint64_t seed = 0;
    /// Relative paths in the file resolve against this directory.
    std::filesystem::path base_dir = ".";
    DataConfig data;
    prompt::PromptConfig prompt;
    std::string prompt_template;  // builtin template id or a path, as written
    gen::GenerationConfig generation;
    EndpointConfig endpoint;
    AnnotationConfig annotation;
    FilterConfig filter;
    EvalConfig eval;

    /// Throws ConfigError with the offending key or the parser's position.
    static RunConfig parse(std::string_view toml, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);

    /// Overrides every derived seed.
    void set_seed(std::uint64_t seed);

    /// Checks referenced paths exist. Throws ConfigError.
    void validate() const;

    /// Canonical JSON of the settings a stage depends on; hashed into the manifest.
    nlohmann::json stage_settings(std::string_view stage) const;
    nlohmann::json to_json() const;
};

}  // namespace overgen::pipeline
