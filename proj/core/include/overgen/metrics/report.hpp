#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "overgen/filter/scoring.hpp"
#include "overgen/metrics/ranking.hpp"
#include "overgen/types.hpp"

namespace overgen::metrics {

struct MetricCell {
    std::optional<double> value;
    std::optional<double> stderr_;
};

struct TieDiagnostics {
    std::optional<double> pessimistic;
    std::optional<double> optimistic;
    std::size_t n_mixed_ties = 0;
};

struct ReportRow {
    std::string name;
    /// Backend id behind the row; empty for baselines.
    std::string backend_id;
    std::map<Split, MetricCell> select1;
    std::map<Split, MetricCell> ap;
    std::map<Split, TieDiagnostics> ties;
};

struct AttributeCorrelation {
    std::string attribute;
    std::optional<double> rho;
    std::optional<double> p_two_sided;
    std::size_t n = 0;
};

struct ItemDiagnostic {
    std::string instance_id;
    Split split = Split::test;
    std::size_t n_candidates = 0;
    std::size_t n_positive = 0;
    /// Row name -> (selected candidate, selected candidate positive).
    std::map<std::string, std::pair<std::string, bool>> selected;
};

struct MetricsReport {
    std::string experiment;
    Threshold threshold = Threshold::at_3of3;
    std::vector<Split> splits;
    std::vector<ReportRow> rows;
    std::vector<AttributeCorrelation> correlations;
    std::optional<double> agreement_alpha;
    std::optional<double> nll_dominance;
    std::size_t n_unlabeled = 0;
    /// backend ids, dataset hashes, seeds.
    nlohmann::json provenance = nlohmann::json::object();
    std::vector<ItemDiagnostic> diagnostics;

    const ReportRow* row(std::string_view name) const;

    nlohmann::json to_json() const;
    /// Inverse of to_json, diagnostics aside.
    static MetricsReport from_json(const nlohmann::json& j);
    /// Aligned text table: one row per system, select-1 columns then AP columns per split.
    std::string render_table() const;
    /// One line per instance with each row's selection.
    std::string diagnostics_csv() const;
};

struct NamedScores {
    std::string name;
    filter::FilterScoreSet scores;
};

struct ReportInputs {
    std::string experiment;
    std::span<const TaskInstance> instances;
    std::span<const ExplanationCandidate> candidates;
    std::span<const AggregatedLabel> labels;
    /// Acceptability and absolute judgments; used for agreement and attribute correlations.
    std::span<const Judgment> judgments;
    /// Filter systems, one row each, after the baselines.
    std::vector<NamedScores> systems;
    Threshold threshold = Threshold::at_3of3;
    /// Splits to report; empty means every split present among the candidates' instances, train excluded.
    std::vector<Split> splits;
    int n_random_trials = 5;
    int permutations = 10000;
    std::uint64_t seed = 0;
};

/// Random, Constant, NLL (when every candidate carries logprobs), Greedy, each system, then Oracle U.B.
MetricsReport build_report(const ReportInputs& in);

/// Spearman correlation of each coded attribute with acceptability over absolute judgments.
std::vector<AttributeCorrelation> attribute_correlations(std::span<const Judgment> judgments, int permutations,
                                                         std::uint64_t seed);

}  // namespace overgen::metrics
