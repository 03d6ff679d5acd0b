#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace overgen {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Lower-case hex SHA-256 of a file's bytes. Throws IoError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

/// 64-bit FNV-1a followed by a splitmix64 finalizer. Stable across platforms and runs.
std::uint64_t stable_hash64(std::string_view data, std::uint64_t seed = 0) noexcept;

/// Mixes a seed with a string tag into a new seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) noexcept {
    return stable_hash64(tag, seed);
}

/// Content-derived id: `prefix` followed by the first 16 hex digits of the SHA-256 of `content`.
std::string content_id(std::string_view prefix, std::string_view content);

}  // namespace overgen
