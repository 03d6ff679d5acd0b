// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "overgen/annotation/aggregation.hpp"
#include "overgen/annotation/agreement.hpp"
#include "overgen/filter/external.hpp"
#include "overgen/filter/filter_input.hpp"
#include "overgen/filter/scoring.hpp"
#include "overgen/metrics/ranking.hpp"
#include "overgen/metrics/report.hpp"
#include "overgen/metrics/statistics.hpp"
#include "overgen/pipeline/demo.hpp"
#include "overgen/pipeline/stages.hpp"
#include "overgen/prompt/prompt_engine.hpp"
#include "overgen/prompt/template.hpp"
#include "overgen/serialization.hpp"

using namespace overgen;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) detail << what;
        if (!cond) ok = false;
    }
};

int failures = 0;

void run(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << "exception: " << e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s > budget_s) {
        if (c.ok) c.detail << "too slow";
        c.ok = false;
    }
    if (!c.ok) ++failures;
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << " [" << std::fixed << std::setprecision(2) << s << "s / "
              << budget_s << "s]";
    const auto d = c.detail.str();
    if (!d.empty()) std::cout << " " << d;
    std::cout << std::endl;
}

std::vector<bool> positives(std::span<const AggregatedLabel> labels, Threshold t) {
    std::vector<bool> out;
    for (const auto& l : labels) out.push_back(is_positive(l, t));
    return out;
}

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// ---------------------------------------------------------------------------

void constant_baseline_identity(Check& c) {
    struct Case {
        const char* name;
        std::vector<AggregatedLabel> labels;
        double exact;
        double paper;
    };
    const Case cases[] = {{"commonsenseqa", fixtures::cqa_test_labels(), 31.76, 31.8},
                          {"snli", fixtures::snli_test_labels(), 14.48, 14.5}};
    for (const auto& k : cases) {
        auto pos = positives(k.labels, Threshold::at_3of3);
        auto arr = std::make_unique<bool[]>(pos.size());
        std::copy(pos.begin(), pos.end(), arr.get());
        auto v = metrics::constant_baseline(std::span<const bool>(arr.get(), pos.size()));
        c.expect(v.has_value(), std::string(k.name) + ": undefined");
        if (!v) continue;
        c.expect(std::fabs(*v - k.exact) < 1e-9, std::string(k.name) + " = " + num(*v));
        c.expect(std::fabs(*v - k.paper) <= 0.1, std::string(k.name) + " differs from reported value");
        c.detail << k.name << "=" << num(*v, 2) << " ";
    }
}

void threshold_counting(Check& c) {
    auto labels = fixtures::cqa_train_labels();
    const auto n2 = annotation::count_positive(labels, Threshold::at_2of3);
    const auto n3 = annotation::count_positive(labels, Threshold::at_3of3);
    c.expect(labels.size() == 4500, "fixture size " + std::to_string(labels.size()));
    c.expect(n2 == 2490, "2/3 count " + std::to_string(n2));
    c.expect(n3 == 1296, "3/3 count " + std::to_string(n3));
    c.detail << "2/3=" << n2 << "/" << labels.size() << " 3/3=" << n3 << "/" << labels.size();
}

void ap_oracle(Check& c) {
    Rng rng(20221);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t n = 1 + rng.uniform_index(12);
        std::vector<double> s(n);
        std::vector<bool> l(n);
        std::vector<metrics::ScoredLabel> items;
        const bool coarse = rng.bernoulli(0.5);  // half the cases have heavy ties
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse ? static_cast<double>(rng.uniform_index(4)) : rng.uniform01();
            l[i] = rng.bernoulli(0.4);
            items.push_back({s[i], l[i]});
        }
        auto expected = oracle::average_precision(s, l);
        auto got = metrics::average_precision(items);
        c.expect(expected.has_value() == got.has_value(), "definedness differs on case " + std::to_string(t));
        if (expected && got) worst = std::max(worst, std::fabs(*expected - *got));
    }
    c.expect(worst <= 1e-12, "max |diff| " + std::to_string(worst));
    c.detail << "max |diff|=" << worst;
}

void alpha_suite(Check& c) {
    using annotation::RatingMatrix;
    Rng rng(7);
    RatingMatrix perfect;
    for (int i = 0; i < 50; ++i) {
        const double v = static_cast<double>(i % 2);
        perfect.push_back({v, v, v});
    }
    auto p = annotation::krippendorff_alpha(perfect, annotation::Scale::nominal).alpha;
    c.expect(p && *p == 1.0, "perfect agreement alpha " + (p ? num(*p, 17) : std::string("undefined")));

    RatingMatrix random;
    for (int i = 0; i < 2000; ++i) {
        std::vector<std::optional<double>> row;
        for (int r = 0; r < 3; ++r) row.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        random.push_back(row);
    }
    auto a = annotation::krippendorff_alpha(random, annotation::Scale::nominal).alpha;
    c.expect(a && std::fabs(*a) < 0.05, "random alpha " + (a ? num(*a) : std::string("undefined")));

    double worst = 0.0;
    int compared = 0;
    while (compared < 20) {
        RatingMatrix m;
        const std::size_t items = 3 + rng.uniform_index(8), raters = 2 + rng.uniform_index(4);
        for (std::size_t i = 0; i < items; ++i) {
            std::vector<std::optional<double>> row;
            for (std::size_t r = 0; r < raters; ++r)
                row.push_back(rng.bernoulli(0.15) ? std::nullopt
                                                  : std::optional<double>(static_cast<double>(rng.uniform_index(3))));
            m.push_back(row);
        }
        const bool interval = compared % 2 == 1;
        auto expected = oracle::krippendorff_alpha(m, interval);
        if (!expected) continue;
        auto got = annotation::krippendorff_alpha(m, interval ? annotation::Scale::interval : annotation::Scale::nominal);
        c.expect(got.alpha.has_value(), "alpha undefined where oracle is defined");
        if (got.alpha) worst = std::max(worst, std::fabs(*got.alpha - *expected));
        ++compared;
    }
    c.expect(worst <= 1e-10, "oracle max |diff| " + std::to_string(worst));
    c.detail << "perfect=" << (p ? num(*p, 1) : "-") << " random=" << (a ? num(*a) : "-") << " oracle max |diff|="
             << worst;
}

void spearman_wilcoxon(Check& c) {
    Rng rng(3);
    std::vector<double> x, neg;
    for (int i = 0; i < 40; ++i) {
        x.push_back(static_cast<double>(rng.uniform_index(10)));
        neg.push_back(-x.back());
    }
    auto same = metrics::spearman_rho(x, x, 200, 1);
    auto opp = metrics::spearman_rho(x, neg, 200, 1);
    c.expect(same.rho && *same.rho == 1.0, "rho(x, x) != 1");
    c.expect(opp.rho && *opp.rho == -1.0, "rho(x, -x) != -1");

    std::vector<double> a, b;
    for (int i = 1; i <= 10; ++i) {
        a.push_back(1.0 + 0.1 * i);
        b.push_back(1.0);
    }
    auto w = metrics::wilcoxon_signed_rank_one_sided(a, b);
    c.expect(w.exact && w.p == std::ldexp(1.0, -10), "wilcoxon p = " + num(w.p, 12));

    std::vector<double> u, v;
    for (int i = 0; i < 30; ++i) {
        u.push_back(rng.uniform01());
        v.push_back(u.back() + rng.uniform01());
    }
    auto p1 = metrics::spearman_rho(u, v, 10000, 99);
    auto p2 = metrics::spearman_rho(u, v, 10000, 99);
    c.expect(p1.p_two_sided == p2.p_two_sided, "permutation p differs across runs with one seed");
    c.detail << "wilcoxon p=2^" << std::log2(w.p) << " perm p=" << num(p1.p_two_sided.value_or(-1));
}

void selection_invariances(Check& c) {
    Rng rng(11);
    // Transforms: a strictly increasing map built from an affine step and a monotone nonlinearity.
    const std::vector<std::function<double(double)>> shapes{
        [](double x) { return x; },           [](double x) { return x * x * x; },
        [](double x) { return std::atan(x); }, [](double x) { return std::exp(x); },
        [](double x) { return std::sinh(x); }, [](double x) { return std::tanh(x / 4); }};

    int fixtures_checked = 0;
    for (int f = 0; f < 4; ++f) {
        auto eval3 = fixtures::random_eval_set(rng, 150, 5, 0.25 + 0.1 * f);
        // Candidates and labels consistent with the eval set, so the 2/3 threshold can be derived too.
        std::vector<ExplanationCandidate> cands;
        std::vector<AggregatedLabel> labels;
        for (const auto& inst : eval3.instances)
            for (const auto& ec : inst.candidates) {
                ExplanationCandidate x;
                x.candidate_id = ec.candidate_id;
                x.instance_id = inst.instance_id;
                x.text = "t";
                x.decode = ec.rank == 0 ? Decode::greedy() : Decode::sampled(ec.rank);
                cands.push_back(x);
                const int accepts = ec.positive ? 3 : static_cast<int>(rng.uniform_index(3));
                labels.push_back(AggregatedLabel::from_counts(ec.candidate_id, 3, accepts));
            }
        auto set3 = metrics::build_eval_set(cands, labels, Threshold::at_3of3);
        auto set2 = metrics::build_eval_set(cands, labels, Threshold::at_2of3);

        // Backends: continuous scores, coarse scores with ties, and label-correlated scores.
        std::vector<filter::FilterScoreSet> backends(3);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            const double noisy = is_positive(labels[i], Threshold::at_2of3) ? 0.6 + 0.4 * rng.uniform01()
                                                                             : 0.8 * rng.uniform01();
            backends[0].scores.push_back({cands[i].candidate_id, rng.uniform01(), ""});
            backends[1].scores.push_back({cands[i].candidate_id, static_cast<double>(rng.uniform_index(4)) / 3, ""});
            backends[2].scores.push_back({cands[i].candidate_id, noisy, ""});
        }
        for (auto& backend : backends) {
            auto base = filter::select_all(cands, backend);
            metrics::SelectionMap sel;
            for (const auto& s : base) sel[s.instance_id] = s.candidate_id;
            const double acc3 = metrics::select1_accuracy(set3, sel);
            const double acc2 = metrics::select1_accuracy(set2, sel);
            c.expect(metrics::oracle_select1(set3) >= acc3, "oracle below select-1 at 3/3");
            c.expect(metrics::oracle_select1(set2) >= acc2, "oracle below select-1 at 2/3");
            c.expect(acc2 >= acc3, "select-1 at 2/3 below 3/3");
            c.expect(metrics::oracle_select1(set2) >= metrics::oracle_select1(set3), "oracle at 2/3 below 3/3");
            c.expect(metrics::random_select1_expectation(set2) >= metrics::random_select1_expectation(set3),
                     "random expectation at 2/3 below 3/3");

            for (int t = 0; t < 100; ++t) {
                const double a = 0.5 + 4.5 * rng.uniform01(), b = 4 * rng.uniform01() - 2;
                const auto& shape = shapes[rng.uniform_index(shapes.size())];
                filter::FilterScoreSet moved = backend;
                for (auto& s : moved.scores) s.value = shape(a * *s.value + b);
                auto sel2 = filter::select_all(cands, moved);
                bool same = sel2.size() == base.size();
                for (std::size_t i = 0; same && i < base.size(); ++i) same = sel2[i].candidate_id == base[i].candidate_id;
                c.expect(same, "selection changed under a monotone transform");
                metrics::SelectionMap m2;
                for (const auto& s : sel2) m2[s.instance_id] = s.candidate_id;
                c.expect(metrics::select1_accuracy(set3, m2) == acc3, "select-1 changed under a monotone transform");
            }
        }
        ++fixtures_checked;
    }
    c.detail << fixtures_checked << " fixtures x 3 backends x 100 transforms";
}

void prompt_engine(Check& c) {
    auto nli_pool = fixtures::synthetic_nli_pool(240, 5);
    auto mc_pool = fixtures::synthetic_mcqa_pool(200, 6);
    auto nli_cfg = prompt::PromptConfig::nli_defaults();
    nli_cfg.rng_seed = 42;
    auto mc_cfg = prompt::PromptConfig::mcqa_defaults();
    mc_cfg.rng_seed = 42;
    mc_cfg.token_budget = 1400;  // tight: some draws must step down

    std::vector<std::pair<TaskInstance, bool>> targets;  // instance, is NLI
    for (int i = 0; i < 500; ++i) {
        if (i < 240) targets.emplace_back(nli_pool[static_cast<std::size_t>(i)].instance, true);
        else targets.emplace_back(fixtures::nli("nli-t" + std::to_string(i), "P " + std::to_string(i), "H",
                                                std::string(kNliLabels[static_cast<std::size_t>(i) % 3]), Split::test),
                                  true);
    }
    for (int i = 0; i < 500; ++i) {
        if (i < 200) targets.emplace_back(mc_pool[static_cast<std::size_t>(i)].instance, false);
        else targets.emplace_back(fixtures::mcqa("mc-t" + std::to_string(i), "Q " + std::to_string(i) + "?",
                                                 {"a1", "b1", "c1", "d1", "e1"}, "c1", Split::test),
                                  false);
    }

    auto assemble_all = [&] {
        std::vector<prompt::AssembledPrompt> out;
        for (const auto& [t, is_nli] : targets)
            out.push_back(is_nli ? prompt::assemble_prompt(t, nli_pool, nli_cfg)
                                 : prompt::assemble_prompt(t, mc_pool, mc_cfg));
        return out;
    };
    auto first = assemble_all();
    auto second = assemble_all();

    std::unordered_map<std::string, const PromptExample*> by_id;
    for (const auto& e : nli_pool) by_id[e.instance.id] = &e;
    for (const auto& e : mc_pool) by_id[e.instance.id] = &e;

    std::size_t below_max_k = 0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        const auto& p = first[i];
        const auto& [target, is_nli] = targets[i];
        const auto& cfg = is_nli ? nli_cfg : mc_cfg;
        const auto& ks = cfg.k_choices;
        c.expect(std::find(ks.begin(), ks.end(), p.k_used) != ks.end(), "k outside k_choices");
        c.expect(p.example_ids.size() == static_cast<std::size_t>(p.k_used), "example count differs from k");
        if (p.k_used < *std::max_element(ks.begin(), ks.end())) ++below_max_k;
        std::map<std::string, int> per_label;
        for (const auto& id : p.example_ids) {
            c.expect(id != target.id, "target used as its own example");
            auto it = by_id.find(id);
            c.expect(it != by_id.end(), "example outside the pool");
            if (it != by_id.end()) ++per_label[it->second->instance.gold_label];
        }
        if (is_nli)
            for (auto l : kNliLabels)
                c.expect(per_label[std::string(l)] * 3 == p.k_used, "NLI labels not balanced");
        c.expect(p.estimated_tokens + cfg.completion_reserve <= cfg.token_budget, "token budget exceeded");
        c.expect(p.rendered_text.ends_with("why?"), "prompt does not end with why?");
        c.expect(p.rendered_text == second[i].rendered_text && p.fingerprint == second[i].fingerprint,
                 "assembly not byte-identical across runs");
    }

    auto render = [](prompt::TemplateId id, const std::vector<PromptExample>& ex, const TaskInstance& target) {
        const auto& t = prompt::PromptTemplate::builtin(id);
        std::vector<std::string> blocks;
        for (const auto& e : ex) blocks.push_back(t.render_example(e, prompt::identity_order(e.instance.choices.size())));
        blocks.push_back(t.render_target(target, prompt::identity_order(target.choices.size())));
        return t.join(blocks);
    };
    c.expect(render(prompt::TemplateId::nli_qa_style, fixtures::snli_prompt_examples(), fixtures::snli_prompt_target()) ==
                 fixtures::golden("snli_prompt.txt"),
             "NLI golden mismatch");
    c.expect(render(prompt::TemplateId::mcqa_style, fixtures::cqa_prompt_examples(), fixtures::cqa_prompt_target()) ==
                 fixtures::golden("cqa_prompt.txt"),
             "multiple-choice golden mismatch");
    c.detail << first.size() << " prompts, " << below_max_k << " below the largest k, goldens checked";
}

void end_to_end(Check& c) {
    const auto dir = fs::temp_directory_path() / "overgen-acceptance-e2e";
    fs::remove_all(dir);
    auto cfg_path = pipeline::write_demo_project(dir);
    auto config = pipeline::RunConfig::load(cfg_path);
    const std::string marker = config.annotation.planted_marker;
    pipeline::Pipeline p(config, dir / "run");
    p.run_all();

    std::ifstream in(dir / "run" / pipeline::artifact::metrics);
    auto report = metrics::MetricsReport::from_json(nlohmann::json::parse(in));
    const auto* constant = report.row("Constant");
    const metrics::ReportRow* builtin = nullptr;
    for (const auto& r : report.rows)
        if (r.backend_id.starts_with("builtin:")) builtin = &r;
    c.expect(constant && builtin, "report lacks the Constant or builtin row");
    if (!constant || !builtin) return;
    for (auto s : report.splits) {
        const auto fa = builtin->ap.at(s).value, ca = constant->ap.at(s).value;
        c.expect(fa && ca && *fa >= *ca + 20.0, "AP margin below 20 points on " + std::string(to_string(s)));
        if (fa && ca) c.detail << to_string(s) << " AP " << num(*fa, 1) << " vs " << num(*ca, 1) << "; ";
    }

    auto candidates = jsonl::read_records<ExplanationCandidate>(dir / "run" / pipeline::artifact::candidates,
                                                                entity::candidates);
    auto instances = jsonl::read_records<TaskInstance>(dir / "run" / pipeline::artifact::instances, entity::instances);
    auto selections = jsonl::read_records<filter::Selection>(dir / "run" / pipeline::artifact::selections,
                                                             filter::kSelectionsEntity);
    auto planted = [&](const std::string& text) { return text.find(marker) != std::string::npos; };
    std::unordered_map<std::string, const ExplanationCandidate*> by_id;
    std::unordered_map<std::string, bool> has_planted;
    for (const auto& cand : candidates) {
        by_id[cand.candidate_id] = &cand;
        if (planted(cand.text)) has_planted[cand.instance_id] = true;
    }
    std::unordered_map<std::string, Split> split_of;
    for (const auto& i : instances) split_of[i.id] = i.split;
    std::size_t eligible = 0, recovered = 0;
    for (const auto& s : selections) {
        if (split_of[s.instance_id] == Split::train || !has_planted[s.instance_id]) continue;
        ++eligible;
        recovered += planted(by_id.at(s.candidate_id)->text) ? 1 : 0;
    }
    const double rate = eligible ? 100.0 * static_cast<double>(recovered) / static_cast<double>(eligible) : 0.0;
    c.expect(eligible > 0 && rate >= 90.0, "planted recovery " + num(rate, 1) + "%");
    c.detail << "planted recovery " << recovered << "/" << eligible << " (" << num(rate, 1) << "%)";
}

void filter_input_golden(Check& c) {
    auto lines = fixtures::golden_lines("filter_inputs.txt");
    c.expect(lines.size() == 4, "golden file has " + std::to_string(lines.size()) + " lines");
    if (lines.size() != 4) return;
    auto cqa = fixtures::cqa_prompt_target();
    auto snli = fixtures::snli_prompt_target();
    const std::string e1 = "After peeing, the bladder is empty.", e2 = "A dog cannot carry something while asleep";
    const std::string got[] = {
        filter::format_filter_input(filter::make_filter_input(cqa, e1, filter::FilterMode::explanation_only)),
        filter::format_filter_input(filter::make_filter_input(cqa, e1, filter::FilterMode::full)),
        filter::format_filter_input(filter::make_filter_input(snli, e2, filter::FilterMode::explanation_only)),
        filter::format_filter_input(filter::make_filter_input(snli, e2, filter::FilterMode::full)),
    };
    for (std::size_t i = 0; i < 4; ++i) c.expect(got[i] == lines[i], "line " + std::to_string(i + 1) + " differs");
    c.detail << "4 strings byte-identical";
}

void external_protocol(Check& c) {
    filter::KeywordRule rule{{{"because", 2.5}, {"good", 0.75}, {"bad", -1.25}}, -0.5, 0.15, "keyword-rule/accept"};
    filter::ReferenceScorerServer server(rule);
    const int port = server.start();
    filter::ExternalScorerClient client({"http://127.0.0.1:" + std::to_string(port), 64, std::chrono::seconds(10)});
    c.expect(client.health() == rule.version, "health version mismatch");

    Rng rng(5);
    const char* words[] = {"because", "good", "bad", "shelf", "the", "dog", "is", "Because", "explanation", "answer"};
    std::vector<std::string> inputs;
    for (int i = 0; i < 1000; ++i) {
        std::string expl;
        for (std::size_t w = 0, n = 1 + rng.uniform_index(20); w < n; ++w) expl += std::string(w ? " " : "") + words[rng.uniform_index(10)];
        filter::FilterInput fi{"question " + std::to_string(i), "answer", expl,
                               i % 2 ? filter::FilterMode::full : filter::FilterMode::explanation_only};
        inputs.push_back(filter::format_filter_input(fi));
    }
    std::size_t mismatches = 0;
    for (std::size_t start = 0; start < inputs.size(); start += 64) {
        std::vector<std::string> batch(inputs.begin() + static_cast<std::ptrdiff_t>(start),
                                       inputs.begin() + static_cast<std::ptrdiff_t>(std::min(inputs.size(), start + 64)));
        auto probs = client.score_batch(batch);
        c.expect(probs.size() == batch.size(), "batch length mismatch");
        for (std::size_t i = 0; i < batch.size() && i < probs.size(); ++i) mismatches += probs[i] != rule(batch[i]);
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " scores differ");
    c.detail << inputs.size() << " inputs, " << server.score_requests() << " requests, " << mismatches
             << " mismatches";
    server.stop();
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    run("constant-baseline identity", 1, constant_baseline_identity);
    run("threshold counting", 1, threshold_counting);
    run("AP oracle equivalence", 5, ap_oracle);
    run("Krippendorff alpha suite", 10, alpha_suite);
    run("Spearman and Wilcoxon", 30, spearman_wilcoxon);
    run("selection invariances", 60, selection_invariances);
    run("prompt engine", 60, prompt_engine);
    run("end-to-end smoke", 120, end_to_end);
    run("filter input golden", 1, filter_input_golden);
    run("external scorer protocol", 60, external_protocol);
    std::cout << (failures ? std::to_string(failures) + " check(s) failed" : std::string("all checks passed"))
              << std::endl;
    return failures ? 1 : 0;
}
