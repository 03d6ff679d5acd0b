#include "overgen/metrics/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "overgen/error.hpp"
#include "overgen/random.hpp"

namespace overgen::metrics {

namespace {

struct Group {
    std::size_t size = 0;
    std::size_t positives = 0;
};

/// Score groups in descending score order.
std::vector<Group> groups_of(std::span<const ScoredLabel> items) {
    for (const auto& it : items)
        if (std::isnan(it.score)) throw PreconditionError("average precision: NaN score");
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return items[a].score > items[b].score; });
    std::vector<Group> groups;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& it = items[order[k]];
        if (k == 0 || it.score != items[order[k - 1]].score) groups.emplace_back();
        ++groups.back().size;
        if (it.positive) ++groups.back().positives;
    }
    return groups;
}

double ap_from_groups(const std::vector<Group>& groups, std::size_t total_positive) {
    const double P = static_cast<double>(total_positive);
    double sum = 0.0;
    std::size_t seen = 0, tp = 0;
    for (const auto& g : groups) {
        seen += g.size;
        tp += g.positives;
        if (g.positives == 0) continue;
        sum += (static_cast<double>(g.positives) / P) * (static_cast<double>(tp) / static_cast<double>(seen));
    }
    return 100.0 * sum;
}

/// Precision at each positive with tied positives placed first (optimistic) or last.
double ap_ordered_ties(const std::vector<Group>& groups, std::size_t total_positive, bool positives_first) {
    double sum = 0.0;
    std::size_t seen = 0, tp = 0;
    for (const auto& g : groups) {
        const std::size_t offset = positives_first ? 0 : g.size - g.positives;
        for (std::size_t k = 1; k <= g.positives; ++k) {
            sum += static_cast<double>(tp + k) / static_cast<double>(seen + offset + k);
        }
        seen += g.size;
        tp += g.positives;
    }
    return 100.0 * (sum / static_cast<double>(total_positive));
}

}  // namespace

ApDetail average_precision_detail(std::span<const ScoredLabel> items) {
    ApDetail d;
    d.n = items.size();
    const auto groups = groups_of(items);
    for (const auto& g : groups) {
        d.n_positive += g.positives;
        if (g.positives > 0 && g.positives < g.size) d.n_mixed_ties += g.size;
    }
    if (d.n_positive == 0) return d;
    d.ap = ap_from_groups(groups, d.n_positive);
    d.pessimistic = ap_ordered_ties(groups, d.n_positive, false);
    d.optimistic = ap_ordered_ties(groups, d.n_positive, true);
    return d;
}

std::optional<double> average_precision(std::span<const ScoredLabel> items) {
    const auto groups = groups_of(items);
    std::size_t positives = 0;
    for (const auto& g : groups) positives += g.positives;
    if (positives == 0) return std::nullopt;
    return ap_from_groups(groups, positives);
}

std::optional<double> constant_baseline(std::size_t n_positive, std::size_t n) {
    if (n_positive == 0 || n == 0) return std::nullopt;
    // Same operations as the single-group path of ap_from_groups.
    return 100.0 * ((static_cast<double>(n_positive) / static_cast<double>(n_positive)) *
                    (static_cast<double>(n_positive) / static_cast<double>(n)));
}

std::optional<double> constant_baseline(std::span<const bool> labels) {
    return constant_baseline(static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)),
                             labels.size());
}

std::size_t EvalSet::n_candidates() const {
    std::size_t n = 0;
    for (const auto& i : instances) n += i.candidates.size();
    return n;
}

std::size_t EvalSet::n_positive() const {
    std::size_t n = 0;
    for (const auto& i : instances)
        for (const auto& c : i.candidates) n += c.positive ? 1 : 0;
    return n;
}

EvalSet build_eval_set(std::span<const ExplanationCandidate> candidates, std::span<const AggregatedLabel> labels,
                       Threshold threshold) {
    std::unordered_map<std::string_view, const AggregatedLabel*> by_id;
    for (const auto& l : labels) by_id.emplace(l.candidate_id, &l);
    EvalSet set;
    set.threshold = threshold;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& c : candidates) {
        auto [it, fresh] = index.try_emplace(c.instance_id, set.instances.size());
        if (fresh) set.instances.push_back({c.instance_id, {}});
        auto l = by_id.find(c.candidate_id);
        bool positive = false;
        if (l == by_id.end())
            ++set.n_unlabeled;
        else
            positive = is_positive(*l->second, threshold);
        set.instances[it->second].candidates.push_back({c.candidate_id, c.decode.rank(), positive});
    }
    if (set.n_unlabeled > 0)
        spdlog::warn("evaluation: {} candidate(s) without a label counted as not acceptable", set.n_unlabeled);
    return set;
}

double select1_accuracy(const EvalSet& set, const SelectionMap& selected) {
    if (set.instances.empty()) throw PreconditionError("select-1 accuracy over an empty set");
    std::size_t hits = 0;
    for (const auto& inst : set.instances) {
        auto s = selected.find(inst.instance_id);
        if (s == selected.end()) throw PreconditionError("missing selection for instance '" + inst.instance_id + "'");
        auto c = std::find_if(inst.candidates.begin(), inst.candidates.end(),
                              [&](const auto& x) { return x.candidate_id == s->second; });
        if (c == inst.candidates.end())
            throw PreconditionError("selection '" + s->second + "' is not a candidate of '" + inst.instance_id + "'");
        hits += c->positive ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(set.instances.size());
}

namespace {

std::vector<ScoredLabel> scored(const EvalSet& set, const std::unordered_map<std::string, double>& scores) {
    std::vector<ScoredLabel> items;
    items.reserve(set.n_candidates());
    for (const auto& inst : set.instances)
        for (const auto& c : inst.candidates) {
            auto s = scores.find(c.candidate_id);
            items.push_back({s == scores.end() ? -HUGE_VAL : s->second, c.positive});
        }
    return items;
}

}  // namespace

std::optional<double> explanation_ap(const EvalSet& set, const std::unordered_map<std::string, double>& scores) {
    return average_precision(scored(set, scores));
}

ApDetail explanation_ap_detail(const EvalSet& set, const std::unordered_map<std::string, double>& scores) {
    return average_precision_detail(scored(set, scores));
}

double oracle_select1(const EvalSet& set) {
    if (set.instances.empty()) throw PreconditionError("oracle over an empty set");
    std::size_t any = 0;
    for (const auto& inst : set.instances)
        any += std::any_of(inst.candidates.begin(), inst.candidates.end(), [](const auto& c) { return c.positive; })
                   ? 1
                   : 0;
    return 100.0 * static_cast<double>(any) / static_cast<double>(set.instances.size());
}

double greedy_select1(const EvalSet& set) {
    SelectionMap sel;
    for (const auto& inst : set.instances) {
        auto best = std::min_element(inst.candidates.begin(), inst.candidates.end(),
                                     [](const auto& a, const auto& b) { return a.rank < b.rank; });
        if (best != inst.candidates.end()) sel.emplace(inst.instance_id, best->candidate_id);
    }
    return select1_accuracy(set, sel);
}

double random_select1_expectation(const EvalSet& set) {
    if (set.instances.empty()) throw PreconditionError("random baseline over an empty set");
    double sum = 0.0;
    for (const auto& inst : set.instances) {
        double pos = 0.0;
        for (const auto& c : inst.candidates) pos += c.positive ? 1.0 : 0.0;
        sum += pos / static_cast<double>(inst.candidates.size());
    }
    return 100.0 * sum / static_cast<double>(set.instances.size());
}

namespace {

Estimate estimate(const std::vector<double>& xs) {
    Estimate e;
    e.n_trials = static_cast<int>(xs.size());
    e.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - e.mean) * (x - e.mean);
    e.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
    return e;
}

}  // namespace

RandomBaseline random_baseline(const EvalSet& set, int n_trials, std::uint64_t seed) {
    if (n_trials < 2) throw PreconditionError("random baseline needs at least two trials");
    if (set.instances.empty()) throw PreconditionError("random baseline over an empty set");
    std::vector<double> sel(n_trials), ap(n_trials, 0.0);
    const bool has_positive = set.n_positive() > 0;

    auto trial = [&](int t) {
        Rng rng = Rng::derive(seed, "random-trial/" + std::to_string(t));
        std::size_t hits = 0;
        for (const auto& inst : set.instances) hits += inst.candidates[rng.uniform_index(inst.candidates.size())].positive;
        sel[t] = 100.0 * static_cast<double>(hits) / static_cast<double>(set.instances.size());
        if (!has_positive) return;
        std::vector<ScoredLabel> items;
        items.reserve(set.n_candidates());
        for (const auto& inst : set.instances)
            for (const auto& c : inst.candidates) items.push_back({rng.uniform01(), c.positive});
        ap[t] = *average_precision(items);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), n_trials));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int t = static_cast<int>(w); t < n_trials; t += static_cast<int>(workers)) trial(t);
            });
    }
    return {estimate(sel), estimate(ap)};
}

}  // namespace overgen::metrics
