#include "overgen/filter/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include "overgen/error.hpp"
#include "overgen/serialization.hpp"

namespace overgen::filter {

std::string_view to_string(ScoreKind kind) {
    return kind == ScoreKind::probability ? "probability" : "log-likelihood";
}

ScoreKind parse_score_kind(std::string_view text) {
    if (text == "probability") return ScoreKind::probability;
    if (text == "log-likelihood") return ScoreKind::log_likelihood;
    throw PreconditionError("unknown score kind '" + std::string(text) + "'");
}

std::unordered_map<std::string, double> FilterScoreSet::by_candidate() const {
    std::unordered_map<std::string, double> out;
    out.reserve(scores.size());
    for (const auto& s : scores)
        if (s.value) out.emplace(s.candidate_id, *s.value);
    return out;
}

std::size_t FilterScoreSet::n_errors() const {
    return static_cast<std::size_t>(
        std::count_if(scores.begin(), scores.end(), [](const auto& s) { return !s.value.has_value(); }));
}

std::vector<ScoringItem> make_scoring_items(std::span<const ExplanationCandidate> candidates,
                                            std::span<const TaskInstance> instances, FilterMode mode) {
    std::unordered_map<std::string_view, const TaskInstance*> by_id;
    for (const auto& inst : instances) by_id.emplace(inst.id, &inst);
    std::vector<ScoringItem> items;
    items.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto it = by_id.find(c.instance_id);
        if (it == by_id.end()) throw InvariantError(c.candidate_id, "unknown instance '" + c.instance_id + "'");
        ScoringItem item{c, std::nullopt};
        if (!c.degenerate) item.input = make_filter_input(*it->second, c.text, mode);
        items.push_back(std::move(item));
    }
    return items;
}

namespace {

CandidateScore degenerate_entry(const ExplanationCandidate& c) {
    return {c.candidate_id, std::nullopt, "degenerate candidate"};
}

}  // namespace

FilterScoreSet score_nll(std::span<const ExplanationCandidate> candidates, bool length_normalized) {
    FilterScoreSet out;
    out.backend_id = length_normalized ? "nll-mean" : "nll";
    out.kind = ScoreKind::log_likelihood;
    out.scores.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.degenerate) {
            out.scores.push_back(degenerate_entry(c));
            continue;
        }
        if (c.token_logprobs.empty())
            throw MissingLogprobsError("candidate '" + c.candidate_id + "' has no token logprobs");
        double sum = 0.0;
        for (double lp : c.token_logprobs) sum += lp;
        if (length_normalized) sum /= static_cast<double>(c.token_logprobs.size());
        out.scores.push_back({c.candidate_id, sum, {}});
    }
    return out;
}

FilterScoreSet NllScorer::score(std::span<const ScoringItem> items) {
    std::vector<ExplanationCandidate> cands;
    cands.reserve(items.size());
    for (const auto& i : items) cands.push_back(i.candidate);
    return score_nll(cands, length_normalized_);
}

std::string BuiltinScorer::backend_id() {
    if (id_.empty()) id_ = "builtin:" + model_.digest().substr(0, 12);
    return id_;
}

FilterScoreSet BuiltinScorer::score(std::span<const ScoringItem> items) {
    FilterScoreSet out;
    out.backend_id = backend_id();
    out.scores.reserve(items.size());
    for (const auto& i : items) {
        if (!i.input) {
            out.scores.push_back(degenerate_entry(i.candidate));
            continue;
        }
        out.scores.push_back({i.candidate.candidate_id, model_.score(*i.input), {}});
    }
    return out;
}

double KeywordRule::operator()(std::string_view text) const {
    std::string lower(text);
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    double z = bias - length_penalty * static_cast<double>(text.size()) / 100.0;
    for (const auto& [word, weight] : keywords) {
        if (word.empty()) continue;
        std::string key(word);
        for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        for (auto pos = lower.find(key); pos != std::string::npos; pos = lower.find(key, pos + key.size()))
            z += weight;
    }
    return 1.0 / (1.0 + std::exp(-z));
}

FilterScoreSet RuleScorer::score(std::span<const ScoringItem> items) {
    FilterScoreSet out;
    out.backend_id = backend_id();
    for (const auto& i : items) {
        if (!i.input) {
            out.scores.push_back(degenerate_entry(i.candidate));
            continue;
        }
        out.scores.push_back({i.candidate.candidate_id, rule_(format_filter_input(*i.input)), {}});
    }
    return out;
}

std::size_t select_one(std::span<const ExplanationCandidate> candidates,
                       const std::unordered_map<std::string, double>& scores) {
    if (candidates.empty()) throw PreconditionError("select_one needs at least one candidate");
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto it = scores.find(candidates[i].candidate_id);
        if (it == scores.end() || std::isnan(it->second)) continue;
        const double s = it->second;
        if (!best || s > best_score ||
            (s == best_score && candidates[i].decode.rank() < candidates[*best].decode.rank())) {
            best = i;
            best_score = s;
        }
    }
    if (best) return *best;
    std::size_t fallback = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].decode.rank() < candidates[fallback].decode.rank()) fallback = i;
    return fallback;
}

std::vector<Selection> select_all(std::span<const ExplanationCandidate> candidates, const FilterScoreSet& scores) {
    const auto by_id = scores.by_candidate();
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<ExplanationCandidate>> groups;
    for (const auto& c : candidates) {
        auto [it, fresh] = groups.try_emplace(c.instance_id);
        if (fresh) order.push_back(c.instance_id);
        it->second.push_back(c);
    }
    std::vector<Selection> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        const auto& group = groups.at(id);
        const auto& chosen = group[select_one(group, by_id)];
        auto s = by_id.find(chosen.candidate_id);
        out.push_back({id, chosen.candidate_id, s == by_id.end() ? std::nullopt : std::optional<double>(s->second)});
    }
    return out;
}

std::optional<double> nll_dominance_fraction(std::span<const ExplanationCandidate> candidates) {
    struct Tally {
        std::optional<double> greedy;
        std::optional<double> best_sample;
    };
    std::unordered_map<std::string_view, Tally> per;
    for (const auto& c : candidates) {
        if (c.degenerate) continue;
        auto& t = per[c.instance_id];
        if (c.decode.is_greedy())
            t.greedy = c.total_logprob;
        else if (!t.best_sample || c.total_logprob > *t.best_sample)
            t.best_sample = c.total_logprob;
    }
    std::size_t n = 0, dominated = 0;
    for (const auto& [id, t] : per) {
        if (!t.greedy) continue;
        ++n;
        if (t.best_sample && *t.best_sample > *t.greedy) ++dominated;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(dominated) / static_cast<double>(n);
}

void write_audit_log(const std::filesystem::path& path, std::string_view backend_id,
                     std::span<const ScoringItem> items) {
    jsonl::Appender out(path, kAuditEntity);
    for (const auto& i : items) {
        if (!i.input) continue;
        out.append({{"candidate_id", i.candidate.candidate_id},
                    {"backend", backend_id},
                    {"input", format_filter_input(*i.input)}});
    }
}

void to_json(nlohmann::json& j, const CandidateScore& v) {
    j = {{"candidate_id", v.candidate_id}};
    j["score"] = v.value ? nlohmann::json(*v.value) : nlohmann::json(nullptr);
    if (!v.error.empty()) j["error"] = v.error;
}

void from_json(const nlohmann::json& j, CandidateScore& v) {
    v.candidate_id = j.at("candidate_id").get<std::string>();
    const auto& s = j.at("score");
    v.value = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
    v.error = j.value("error", std::string{});
}

void to_json(nlohmann::json& j, const Selection& v) {
    j = {{"instance_id", v.instance_id}, {"candidate_id", v.candidate_id}};
    j["score"] = v.score ? nlohmann::json(*v.score) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Selection& v) {
    v.instance_id = j.at("instance_id").get<std::string>();
    v.candidate_id = j.at("candidate_id").get<std::string>();
    const auto& s = j.at("score");
    v.score = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
}

void save_score_set(const std::filesystem::path& path, const FilterScoreSet& set) {
    std::vector<nlohmann::json> rows;
    rows.reserve(set.scores.size() + 1);
    rows.push_back({{"backend_id", set.backend_id}, {"kind", to_string(set.kind)}});
    for (const auto& s : set.scores) rows.emplace_back(s);
    jsonl::write(path, entity::scores, rows);
}

FilterScoreSet load_score_set(const std::filesystem::path& path) {
    auto rows = jsonl::read(path, entity::scores);
    if (rows.empty()) throw ParseError(path.string(), 2, "missing score-set summary record");
    FilterScoreSet set;
    set.backend_id = rows[0].at("backend_id").get<std::string>();
    set.kind = parse_score_kind(rows[0].at("kind").get<std::string>());
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        auto s = rows[i].get<CandidateScore>();
        if (!seen.insert(s.candidate_id).second) throw DuplicateIdError(s.candidate_id);
        set.scores.push_back(std::move(s));
    }
    return set;
}

}  // namespace overgen::filter
