#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "overgen/types.hpp"

namespace overgen {

enum class CorpusFormat { jsonl, csv };

CorpusFormat parse_corpus_format(std::string_view text);

/// Column names for CSV ingestion. Unset optional columns fall back to the defaults below.
struct CsvColumns {
    std::string id = "id";
    std::optional<std::string> task;  // column holding "mcqa"/"nli"; otherwise default_task
    Task default_task = Task::mcqa;
    std::string question = "question";
    std::string premise = "premise";
    std::string hypothesis = "hypothesis";
    std::string choices = "choices";  // one cell, choices separated by choice_separator
    char choice_separator = '|';
    std::string gold_label = "gold_label";
    std::optional<std::string> split;  // otherwise default_split
    Split default_split = Split::train;
    std::string explanation = "explanation";  // prompt pools only
};

/// One parsed CSV row with the physical line it started on.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> cells;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines. The first row is returned
/// like any other.
std::vector<CsvRow> read_csv(std::istream& in, const std::string& source_name = "<csv>");

/// Loads task instances, preserving file order. Every record is validated; duplicate ids are rejected.
std::vector<TaskInstance> ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                                        const CsvColumns& columns = {});

/// Loads a prompt pool (instances with human explanations).
std::vector<PromptExample> ingest_prompt_pool(const std::filesystem::path& path, CorpusFormat format,
                                              const CsvColumns& columns = {});

/// Result of a referential-integrity pass over a run directory.
struct IntegrityReport {
    std::size_t instances = 0;
    std::size_t candidates = 0;
    std::size_t judgments = 0;
    std::size_t labels = 0;
    std::size_t scores = 0;
    std::vector<std::string> problems;

    bool ok() const noexcept { return problems.empty(); }
};

/// Checks that every candidate's instance_id, every judgment's subject_id, and every label and score
/// candidate_id resolve. Files that are absent are skipped.
IntegrityReport validate_run_dir(const std::filesystem::path& dir);

}  // namespace overgen
