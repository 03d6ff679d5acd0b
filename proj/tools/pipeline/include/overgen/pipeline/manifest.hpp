#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/error.hpp"

namespace overgen::pipeline {

/// A stage's input is absent. Exit code 3.
class UpstreamMissingError : public Error {
public:
    UpstreamMissingError(std::string artifact, std::string producer)
        : Error("missing " + artifact + "; run the '" + producer + "' stage first"),
          artifact_(std::move(artifact)),
          producer_(std::move(producer)) {}

    const std::string& artifact() const noexcept { return artifact_; }
    const std::string& producer() const noexcept { return producer_; }

private:
    std::string artifact_;
    std::string producer_;
};

using FileHashes = std::map<std::string, std::string>;

struct StageRecord {
    std::string stage;
    std::string config_hash;
    FileHashes inputs;
    FileHashes outputs;
    std::string timestamp;  // UTC, ISO 8601
};

/// run_dir/manifest.json: the last successful execution of each stage.
class Manifest {
public:
    explicit Manifest(std::filesystem::path run_dir);

    std::optional<StageRecord> get(const std::string& stage) const;

    /// True when the stage last ran with the same config hash and inputs and its outputs are
    /// unchanged on disk.
    bool up_to_date(const std::string& stage, const std::string& config_hash, const FileHashes& inputs) const;

    /// Stores the record and rewrites manifest.json.
    void record(StageRecord record);

    const std::filesystem::path& run_dir() const noexcept { return dir_; }

private:
    void save() const;
    std::filesystem::path dir_;
    std::map<std::string, StageRecord> stages_;
};

/// SHA-256 of each named file under `dir`; absent files are left out.
FileHashes hash_files(const std::filesystem::path& dir, const std::vector<std::string>& names);

}  // namespace overgen::pipeline
