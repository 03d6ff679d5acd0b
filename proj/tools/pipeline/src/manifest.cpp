#include "overgen/pipeline/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "overgen/hashing.hpp"

namespace overgen::pipeline {

using nlohmann::json;

namespace {

constexpr const char* kFile = "manifest.json";

}  // namespace

Manifest::Manifest(std::filesystem::path run_dir) : dir_(std::move(run_dir)) {
    const auto path = dir_ / kFile;
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    for (const auto& [name, s] : j.at("stages").items()) {
        StageRecord r;
        r.stage = name;
        r.config_hash = s.at("config_hash").get<std::string>();
        r.inputs = s.at("inputs").get<FileHashes>();
        r.outputs = s.at("outputs").get<FileHashes>();
        r.timestamp = s.at("timestamp").get<std::string>();
        stages_[name] = std::move(r);
    }
}

std::optional<StageRecord> Manifest::get(const std::string& stage) const {
    auto it = stages_.find(stage);
    if (it == stages_.end()) return std::nullopt;
    return it->second;
}

bool Manifest::up_to_date(const std::string& stage, const std::string& config_hash, const FileHashes& inputs) const {
    auto it = stages_.find(stage);
    if (it == stages_.end()) return false;
    const auto& r = it->second;
    if (r.config_hash != config_hash || r.inputs != inputs) return false;
    for (const auto& [name, hash] : r.outputs) {
        const auto p = dir_ / name;
        if (!std::filesystem::exists(p) || sha256_file(p) != hash) return false;
    }
    return true;
}

void Manifest::record(StageRecord record) {
    if (record.timestamp.empty()) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm utc{};
        gmtime_r(&now, &utc);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
        record.timestamp = buf;
    }
    stages_[record.stage] = std::move(record);
    save();
}

void Manifest::save() const {
    json j;
    j["schema_version"] = 1;
    j["stages"] = json::object();
    for (const auto& [name, r] : stages_)
        j["stages"][name] = {
            {"config_hash", r.config_hash}, {"inputs", r.inputs}, {"outputs", r.outputs}, {"timestamp", r.timestamp}};
    std::filesystem::create_directories(dir_);
    const auto path = dir_ / kFile;
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

FileHashes hash_files(const std::filesystem::path& dir, const std::vector<std::string>& names) {
    FileHashes out;
    for (const auto& n : names) {
        const auto p = dir / n;
        if (std::filesystem::exists(p)) out[n] = sha256_file(p);
    }
    return out;
}

}  // namespace overgen::pipeline
