#include "overgen/corpus.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "overgen/error.hpp"
#include "overgen/serialization.hpp"

namespace overgen {

using nlohmann::json;

CorpusFormat parse_corpus_format(std::string_view text) {
    if (text == "jsonl" || text == "json") return CorpusFormat::jsonl;
    if (text == "csv") return CorpusFormat::csv;
    throw PreconditionError("unknown corpus format '" + std::string(text) + "'");
}

std::vector<CsvRow> read_csv(std::istream& in, const std::string& source_name) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string cell;
    bool quoted = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t quote_line = 0;
    row.line = 1;

    auto end_cell = [&] {
        row.cells.push_back(std::move(cell));
        cell.clear();
    };
    auto end_row = [&] {
        end_cell();
        if (row_has_content || row.cells.size() > 1 || !row.cells.front().empty()) rows.push_back(std::move(row));
        row = CsvRow{};
        row_has_content = false;
    };

    char c = 0;
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    cell.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            quote_line = line;
            row_has_content = true;
            break;
        case ',': end_cell(); row_has_content = true; break;
        case '\r': break;
        case '\n':
            end_row();
            ++line;
            row.line = line;
            break;
        default: cell.push_back(c); row_has_content = true;
        }
    }
    if (quoted) throw ParseError(source_name, quote_line, "unterminated quoted field");
    if (row_has_content || !cell.empty()) end_row();
    return rows;
}

namespace {

void check_unique(std::unordered_set<std::string>& seen, const std::string& id) {
    if (!seen.insert(id).second) throw DuplicateIdError(id);
}

/// JSON Lines with an optional schema header line.
std::vector<std::pair<std::size_t, json>> read_native(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::pair<std::size_t, json>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
        if (line_no == 1 && record.is_object() && record.contains("schema_version")) {
            if (record["schema_version"] != kSchemaVersion)
                throw SchemaVersionError(path.string() + ": unsupported schema_version " + record["schema_version"].dump());
            continue;
        }
        out.emplace_back(line_no, std::move(record));
    }
    return out;
}

class CsvTable {
public:
    CsvTable(const std::filesystem::path& path) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open '" + path_ + "'");
        rows_ = read_csv(in, path_);
        if (rows_.empty()) throw ParseError(path_, 1, "missing CSV header row");
        for (std::size_t i = 0; i < rows_.front().cells.size(); ++i) index_[rows_.front().cells[i]] = i;
    }

    std::size_t size() const { return rows_.size() - 1; }
    std::size_t line(std::size_t r) const { return rows_[r + 1].line; }
    bool has(const std::string& column) const { return index_.count(column) != 0; }

    const std::string& get(std::size_t r, const std::string& column) const {
        auto it = index_.find(column);
        if (it == index_.end()) throw ParseError(path_, 1, "missing column '" + column + "'");
        const auto& cells = rows_[r + 1].cells;
        if (it->second >= cells.size()) throw ParseError(path_, line(r), "row is missing column '" + column + "'");
        return cells[it->second];
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::vector<CsvRow> rows_;
    std::map<std::string, std::size_t> index_;
};

std::vector<std::string> split_choices(const std::string& cell, char separator) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(cell);
    while (std::getline(in, item, separator)) out.push_back(item);
    return out;
}

TaskInstance instance_from_csv(const CsvTable& table, std::size_t r, const CsvColumns& cols) {
    TaskInstance inst;
    try {
        inst.id = table.get(r, cols.id);
        inst.task = cols.task ? parse_task(table.get(r, *cols.task)) : cols.default_task;
        inst.split = cols.split ? parse_split(table.get(r, *cols.split)) : cols.default_split;
    } catch (const PreconditionError& e) {
        throw ParseError(table.path(), table.line(r), e.what());
    }
    inst.gold_label = table.get(r, cols.gold_label);
    if (inst.task == Task::mcqa) {
        inst.question = table.get(r, cols.question);
        inst.choices = split_choices(table.get(r, cols.choices), cols.choice_separator);
    } else {
        inst.premise = table.get(r, cols.premise);
        inst.hypothesis = table.get(r, cols.hypothesis);
    }
    return inst;
}

template <class T, class FromJson, class FromCsv>
std::vector<T> ingest(const std::filesystem::path& path, CorpusFormat format, FromJson from_json_record,
                      FromCsv from_csv_row) {
    std::vector<T> out;
    std::unordered_set<std::string> seen;
    if (format == CorpusFormat::jsonl) {
        for (auto& [line_no, record] : read_native(path)) {
            try {
                out.push_back(from_json_record(record));
            } catch (const json::exception& e) {
                throw ParseError(path.string(), line_no, e.what());
            } catch (const PreconditionError& e) {
                throw ParseError(path.string(), line_no, e.what());
            }
        }
    } else {
        CsvTable table(path);
        for (std::size_t r = 0; r < table.size(); ++r) out.push_back(from_csv_row(table, r));
    }
    for (const auto& item : out) {
        validate(item);
        if constexpr (std::is_same_v<T, TaskInstance>) {
            check_unique(seen, item.id);
        } else {
            check_unique(seen, item.instance.id);
        }
    }
    return out;
}

}  // namespace

std::vector<TaskInstance> ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                                        const CsvColumns& columns) {
    return ingest<TaskInstance>(
        path, format, [](const json& j) { return j.get<TaskInstance>(); },
        [&](const CsvTable& t, std::size_t r) { return instance_from_csv(t, r, columns); });
}

std::vector<PromptExample> ingest_prompt_pool(const std::filesystem::path& path, CorpusFormat format,
                                              const CsvColumns& columns) {
    return ingest<PromptExample>(
        path, format, [](const json& j) { return j.get<PromptExample>(); },
        [&](const CsvTable& t, std::size_t r) {
            return PromptExample{instance_from_csv(t, r, columns), t.get(r, columns.explanation)};
        });
}

IntegrityReport validate_run_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    IntegrityReport report;
    std::unordered_set<std::string> instance_ids;
    std::unordered_set<std::string> candidate_ids;

    auto load = [&](const char* file, std::string_view entity) -> std::vector<json> {
        auto path = dir / file;
        if (!fs::exists(path)) return {};
        return jsonl::read(path, entity);
    };

    for (const auto& row : load("instances.jsonl", entity::instances)) {
        auto inst = row.get<TaskInstance>();
        validate(inst);
        if (!instance_ids.insert(inst.id).second) report.problems.push_back("duplicate instance id " + inst.id);
        ++report.instances;
    }
    for (const auto& row : load("candidates.jsonl", entity::candidates)) {
        auto cand = row.get<ExplanationCandidate>();
        validate(cand);
        if (!instance_ids.empty() && !instance_ids.count(cand.instance_id))
            report.problems.push_back("candidate " + cand.candidate_id + " references unknown instance " + cand.instance_id);
        if (!candidate_ids.insert(cand.candidate_id).second)
            report.problems.push_back("duplicate candidate id " + cand.candidate_id);
        ++report.candidates;
    }
    for (const auto& row : load("judgments.jsonl", entity::judgments)) {
        auto judgment = row.get<Judgment>();
        if (!candidate_ids.count(judgment.subject_id) && !instance_ids.count(judgment.subject_id))
            report.problems.push_back("judgment " + judgment.judgment_id + " references unknown subject " + judgment.subject_id);
        ++report.judgments;
    }
    for (const auto& row : load("labels.jsonl", entity::labels)) {
        auto label = row.get<AggregatedLabel>();
        if (!candidate_ids.count(label.candidate_id))
            report.problems.push_back("label references unknown candidate " + label.candidate_id);
        ++report.labels;
    }
    for (const auto& row : load("scores.jsonl", entity::scores)) {
        if (!row.contains("candidate_id")) continue;  // summary record
        auto id = row.at("candidate_id").get<std::string>();
        if (!candidate_ids.count(id)) report.problems.push_back("score references unknown candidate " + id);
        ++report.scores;
    }
    return report;
}

}  // namespace overgen
