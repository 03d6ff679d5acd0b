#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "overgen/annotation/study.hpp"
#include "overgen/generation/completion.hpp"
#include "overgen/pipeline/config.hpp"
#include "overgen/pipeline/manifest.hpp"

namespace overgen::pipeline {

/// Files written into the run directory.
namespace artifact {
inline constexpr const char* instances = "instances.jsonl";
inline constexpr const char* prompt_pool = "prompt_pool.jsonl";
inline constexpr const char* prompts = "prompts.jsonl";
inline constexpr const char* candidates = "candidates.jsonl";
inline constexpr const char* label_predictions = "label_predictions.jsonl";
inline constexpr const char* judgments = "judgments.jsonl";
inline constexpr const char* labels = "labels.jsonl";
inline constexpr const char* annotation_qc = "annotation_qc.json";
inline constexpr const char* training_set = "training_set.jsonl";
inline constexpr const char* model = "filter_model.bin";
inline constexpr const char* train_report = "train_report.json";
inline constexpr const char* scores = "scores.jsonl";
inline constexpr const char* audit = "filter_audit.jsonl";
inline constexpr const char* selections = "selections.jsonl";
inline constexpr const char* metrics = "metrics.json";
inline constexpr const char* diagnostics = "metrics.csv";
inline constexpr const char* report = "report.txt";
}  // namespace artifact

struct StageResult {
    std::string stage;
    bool skipped = false;
    std::string summary;
};

/// The acceptability study over a run's non-degenerate candidates, one item per candidate.
annotation::StudySpec acceptability_study(const RunConfig& config, std::span<const TaskInstance> instances,
                                          std::span<const ExplanationCandidate> candidates);

/// Stage runner over one run directory. Each stage checks its inputs, skips itself when the manifest
/// shows identical settings and inputs (unless forced), and records its outputs.
class Pipeline {
public:
    Pipeline(RunConfig config, std::filesystem::path run_dir);

    /// Replaces the configured completion endpoint.
    void set_client(std::shared_ptr<gen::CompletionClient> client) { client_ = std::move(client); }
    void set_force(bool force) { force_ = force; }

    const RunConfig& config() const noexcept { return config_; }
    const std::filesystem::path& run_dir() const noexcept { return dir_; }

    /// Runs one named stage. Throws UpstreamMissingError, ConfigError, gen::EndpointError.
    StageResult run(std::string_view stage);

    /// validate through report, with synthetic annotation standing in for human raters.
    std::vector<StageResult> run_all();

    /// Serves the acceptability study over HTTP until interrupted.
    void serve();

    /// Stage names accepted by run(), in pipeline order.
    static const std::vector<std::string>& stages();

private:
    using Inputs = std::vector<std::pair<std::string, std::string>>;  // artifact, producing stage
    StageResult execute(const std::string& stage, const Inputs& inputs, const FileHashes& external_inputs,
                        const std::vector<std::string>& outputs, const std::function<std::string()>& body);
    std::shared_ptr<gen::CompletionClient> client();

    StageResult validate();
    StageResult prompts();
    StageResult generate();
    StageResult predict_labels();
    StageResult annotate();
    StageResult aggregate();
    StageResult build_labels();
    StageResult train_filter();
    StageResult score();
    StageResult select();
    StageResult evaluate();
    StageResult report();

    RunConfig config_;
    std::filesystem::path dir_;
    Manifest manifest_;
    std::shared_ptr<gen::CompletionClient> client_;
    bool force_ = false;
};

}  // namespace overgen::pipeline
