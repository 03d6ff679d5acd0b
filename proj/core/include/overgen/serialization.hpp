#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/types.hpp"

namespace overgen {

inline constexpr int kSchemaVersion = 1;

/// Entity names written into file headers.
namespace entity {
inline constexpr std::string_view instances = "instances";
inline constexpr std::string_view prompt_pool = "prompt_pool";
inline constexpr std::string_view candidates = "candidates";
inline constexpr std::string_view judgments = "judgments";
inline constexpr std::string_view labels = "labels";
inline constexpr std::string_view scores = "scores";
}  // namespace entity

void to_json(nlohmann::json& j, const TaskInstance& v);
void from_json(const nlohmann::json& j, TaskInstance& v);
void to_json(nlohmann::json& j, const PromptExample& v);
void from_json(const nlohmann::json& j, PromptExample& v);
void to_json(nlohmann::json& j, const ExplanationCandidate& v);
void from_json(const nlohmann::json& j, ExplanationCandidate& v);
void to_json(nlohmann::json& j, const AbsolutePayload& v);
void from_json(const nlohmann::json& j, AbsolutePayload& v);
void to_json(nlohmann::json& j, const HeadToHeadPayload& v);
void from_json(const nlohmann::json& j, HeadToHeadPayload& v);
void to_json(nlohmann::json& j, const Judgment& v);
void from_json(const nlohmann::json& j, Judgment& v);
void to_json(nlohmann::json& j, const AggregatedLabel& v);
void from_json(const nlohmann::json& j, AggregatedLabel& v);

nlohmann::json payload_to_json(const JudgmentPayload& payload);
JudgmentPayload payload_from_json(JudgmentKind kind, const nlohmann::json& j);

namespace jsonl {

nlohmann::json header(std::string_view entity);

/// Writes header plus one record per line, replacing the file. Write goes through a
/// temporary file and a rename so readers never see a half-written file.
void write(const std::filesystem::path& path, std::string_view entity, std::span<const nlohmann::json> rows);

/// Reads and checks the header, returning the records. ParseError carries the line number;
/// SchemaVersionError is raised for an unknown version or mismatched entity.
std::vector<nlohmann::json> read(const std::filesystem::path& path, std::string_view entity);

template <class T>
void write_records(const std::filesystem::path& path, std::string_view entity, std::span<const T> records) {
    std::vector<nlohmann::json> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.emplace_back(r);
    write(path, entity, rows);
}

template <class T>
void write_records(const std::filesystem::path& path, std::string_view entity, const std::vector<T>& records) {
    write_records(path, entity, std::span<const T>(records));
}

template <class T>
std::vector<T> read_records(const std::filesystem::path& path, std::string_view entity);

/// Append-only single-writer file; creates the header when the file is new.
class Appender {
public:
    Appender(const std::filesystem::path& path, std::string_view entity);
    void append(const nlohmann::json& row);

private:
    std::mutex mutex_;
    std::ofstream out_;
};

}  // namespace jsonl
}  // namespace overgen

#include "overgen/detail/serialization_impl.hpp"
