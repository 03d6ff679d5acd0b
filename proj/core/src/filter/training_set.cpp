#include "overgen/filter/training_set.hpp"

#include <algorithm>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "overgen/error.hpp"
#include "overgen/random.hpp"
#include "overgen/serialization.hpp"

namespace overgen::filter {

std::string_view to_string(LabelScheme scheme) {
    return scheme == LabelScheme::with_agreement ? "with-agreement" : "without-agreement";
}

LabelScheme parse_label_scheme(std::string_view text) {
    if (text == "with-agreement" || text == "with_agreement") return LabelScheme::with_agreement;
    if (text == "without-agreement" || text == "without_agreement") return LabelScheme::without_agreement;
    throw PreconditionError("unknown label scheme '" + std::string(text) + "'");
}

std::size_t TrainingSet::count(Split split) const {
    return static_cast<std::size_t>(
        std::count_if(examples.begin(), examples.end(), [&](const auto& e) { return e.split == split; }));
}

std::size_t TrainingSet::positives(Split split) const {
    return static_cast<std::size_t>(std::count_if(
        examples.begin(), examples.end(), [&](const auto& e) { return e.split == split && e.label; }));
}

TrainingSet build_training_set(std::span<const TaskInstance> instances,
                               std::span<const ExplanationCandidate> candidates,
                               std::span<const AggregatedLabel> labels, std::span<const Judgment> judgments,
                               LabelScheme scheme, FilterMode mode, std::uint64_t seed) {
    std::unordered_map<std::string_view, const TaskInstance*> by_instance;
    for (const auto& inst : instances) by_instance.emplace(inst.id, &inst);
    std::unordered_map<std::string_view, const AggregatedLabel*> by_label;
    for (const auto& l : labels) by_label.emplace(l.candidate_id, &l);

    std::unordered_map<std::string_view, std::vector<const Judgment*>> votes;
    if (scheme == LabelScheme::without_agreement) {
        for (const auto& j : judgments) {
            if (j.excluded || j.kind != JudgmentKind::acceptability) continue;
            votes[j.subject_id].push_back(&j);
        }
        for (auto& [id, list] : votes)
            std::sort(list.begin(), list.end(),
                      [](const Judgment* a, const Judgment* b) { return a->judgment_id < b->judgment_id; });
    }

    TrainingSet set;
    set.scheme = scheme;
    set.mode = mode;
    for (const auto& cand : candidates) {
        auto inst = by_instance.find(cand.instance_id);
        if (inst == by_instance.end())
            throw InvariantError(cand.candidate_id, "unknown instance '" + cand.instance_id + "'");
        if (cand.degenerate) {
            ++set.n_degenerate;
            continue;
        }
        auto label = by_label.find(cand.candidate_id);
        if (label == by_label.end()) {
            ++set.n_incomplete;
            continue;
        }
        bool positive = label->second->label_2of3;
        if (scheme == LabelScheme::without_agreement) {
            auto v = votes.find(cand.candidate_id);
            if (v == votes.end() || v->second.empty()) {
                ++set.n_incomplete;
                continue;
            }
            Rng rng = Rng::derive(seed, cand.candidate_id);
            const Judgment* drawn = v->second[rng.uniform_index(v->second.size())];
            positive = std::get<AcceptabilityPayload>(drawn->payload).accept;
        }
        set.examples.push_back(TrainingExample{cand.candidate_id, cand.instance_id, inst->second->split,
                                               make_filter_input(*inst->second, cand.text, mode), positive});
    }
    if (set.n_incomplete > 0)
        spdlog::warn("training set: {} candidate(s) without complete annotation excluded", set.n_incomplete);
    check_split_integrity(set);
    return set;
}

void check_split_integrity(const TrainingSet& set) {
    std::unordered_map<std::string_view, Split> seen;
    for (const auto& e : set.examples) {
        auto [it, fresh] = seen.emplace(e.instance_id, e.split);
        if (!fresh && it->second != e.split)
            throw InvariantError(e.instance_id, "candidates fall in both " + std::string(to_string(it->second)) +
                                                    " and " + std::string(to_string(e.split)));
    }
}

void to_json(nlohmann::json& j, const FilterInput& v) {
    j = {{"instance_context", v.instance_context},
         {"gold_label", v.gold_label},
         {"explanation", v.explanation},
         {"mode", to_string(v.mode)}};
}

void from_json(const nlohmann::json& j, FilterInput& v) {
    v.instance_context = j.at("instance_context").get<std::string>();
    v.gold_label = j.at("gold_label").get<std::string>();
    v.explanation = j.at("explanation").get<std::string>();
    v.mode = parse_filter_mode(j.at("mode").get<std::string>());
}

void to_json(nlohmann::json& j, const TrainingExample& v) {
    j = {{"candidate_id", v.candidate_id},
         {"instance_id", v.instance_id},
         {"split", to_string(v.split)},
         {"input", v.input},
         {"label", v.label}};
}

void from_json(const nlohmann::json& j, TrainingExample& v) {
    v.candidate_id = j.at("candidate_id").get<std::string>();
    v.instance_id = j.at("instance_id").get<std::string>();
    v.split = parse_split(j.at("split").get<std::string>());
    v.input = j.at("input").get<FilterInput>();
    v.label = j.at("label").get<bool>();
}

void save_training_set(const std::filesystem::path& path, const TrainingSet& set) {
    std::vector<nlohmann::json> rows;
    rows.reserve(set.examples.size() + 1);
    rows.push_back({{"scheme", to_string(set.scheme)},
                    {"mode", to_string(set.mode)},
                    {"n_incomplete", set.n_incomplete},
                    {"n_degenerate", set.n_degenerate}});
    for (const auto& e : set.examples) rows.emplace_back(e);
    jsonl::write(path, kTrainingSetEntity, rows);
}

TrainingSet load_training_set(const std::filesystem::path& path) {
    auto rows = jsonl::read(path, kTrainingSetEntity);
    if (rows.empty()) throw ParseError(path.string(), 2, "missing training-set summary record");
    TrainingSet set;
    set.scheme = parse_label_scheme(rows[0].at("scheme").get<std::string>());
    set.mode = parse_filter_mode(rows[0].at("mode").get<std::string>());
    set.n_incomplete = rows[0].at("n_incomplete").get<std::size_t>();
    set.n_degenerate = rows[0].at("n_degenerate").get<std::size_t>();
    set.examples.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) set.examples.push_back(rows[i].get<TrainingExample>());
    check_split_integrity(set);
    return set;
}

}  // namespace overgen::filter
