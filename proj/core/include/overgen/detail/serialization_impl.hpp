#pragma once

#include "overgen/error.hpp"

namespace overgen::jsonl {

template <class T>
std::vector<T> read_records(const std::filesystem::path& path, std::string_view entity) {
    auto rows = read(path, entity);
    std::vector<T> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            out.push_back(rows[i].template get<T>());
        } catch (const nlohmann::json::exception& e) {
            // +2: one for the header line, one for 1-based numbering
            throw ParseError(path.string(), i + 2, e.what());
        } catch (const PreconditionError& e) {
            throw ParseError(path.string(), i + 2, e.what());
        }
    }
    return out;
}

}  // namespace overgen::jsonl
