#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "overgen/metrics/ranking.hpp"
#include "overgen/random.hpp"
#include "overgen/types.hpp"

#ifndef OVERGEN_TEST_DATA_DIR
#define OVERGEN_TEST_DATA_DIR "tests/data"
#endif

namespace overgen::fixtures {

inline std::filesystem::path data_dir() { return OVERGEN_TEST_DATA_DIR; }

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Golden file contents without the editor's trailing newline.
inline std::string golden(const std::string& name) {
    auto s = read_file(data_dir() / "golden" / name);
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

inline std::vector<std::string> golden_lines(const std::string& name) {
    std::vector<std::string> out;
    std::istringstream in(read_file(data_dir() / "golden" / name));
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

/// Labels whose accept counts follow `buckets`: buckets[i] candidates with i of 3 raters accepting.
inline std::vector<AggregatedLabel> labels_from_buckets(const std::array<std::size_t, 4>& buckets,
                                                        const std::string& prefix = "c") {
    std::vector<AggregatedLabel> out;
    for (int accept = 0; accept < 4; ++accept)
        for (std::size_t i = 0; i < buckets[accept]; ++i)
            out.push_back(AggregatedLabel::from_counts(prefix + std::to_string(out.size()), 3, accept));
    return out;
}

/// CommonsenseQA acceptability training split: 932 / 1078 / 1194 / 1296 candidates with 0..3 accepts.
inline std::vector<AggregatedLabel> cqa_train_labels() { return labels_from_buckets({932, 1078, 1194, 1296}); }

/// Test-split distributions: 397 of 1250 CommonsenseQA and 181 of 1250 SNLI candidates acceptable at 3/3.
inline std::vector<AggregatedLabel> cqa_test_labels() { return labels_from_buckets({300, 300, 253, 397}); }
inline std::vector<AggregatedLabel> snli_test_labels() { return labels_from_buckets({500, 300, 269, 181}); }

inline TaskInstance nli(std::string id, std::string premise, std::string hypothesis, std::string gold,
                        Split split = Split::train) {
    TaskInstance t;
    t.id = std::move(id);
    t.task = Task::nli;
    t.premise = std::move(premise);
    t.hypothesis = std::move(hypothesis);
    t.gold_label = std::move(gold);
    t.split = split;
    return t;
}

inline TaskInstance mcqa(std::string id, std::string question, std::vector<std::string> choices, std::string gold,
                         Split split = Split::train) {
    TaskInstance t;
    t.id = std::move(id);
    t.task = Task::mcqa;
    t.question = std::move(question);
    t.choices = std::move(choices);
    t.gold_label = std::move(gold);
    t.split = split;
    return t;
}

/// The three SNLI prompt examples and target used in the paper's prompt illustration.
inline std::vector<PromptExample> snli_prompt_examples() {
    return {
        {nli("snli-ex-1", "A young boy wearing a tank-top is climbing a tree.", "A boy was showing off for a girl.",
             "neutral"),
         "A boy might climb a tree to show off for a girl, but he also might do it for fun or for other reasons."},
        {nli("snli-ex-2", "A person on a horse jumps over a broken down airplane.", "A person is outdoors, on a horse.",
             "entailment"),
         "Horse riding is an activity almost always done outdoors. Additionally, a plane is a large object and is "
         "most likely to be found outdoors."},
        {nli("snli-ex-3", "There is a red truck behind the horses.", "The horses are becoming suspicious of my apples.",
             "contradiction"),
         "The presence of a red truck does not imply there are apples, nor does it imply the horses are suspicious."},
    };
}
inline TaskInstance snli_prompt_target() {
    return nli("snli-target", "A dog carries an object in the snow.", "A dog is asleep in its dog house.",
               "contradiction", Split::test);
}

inline std::vector<PromptExample> cqa_prompt_examples() {
    return {
        {mcqa("cqa-ex-1", "When remembering a tragedy in the past, what do many people feel?",
              {"pain", "depression", "knowing", "knowledge", "nostalgia"}, "depression"),
         "Remembering a past tradedy can resurface feelings that arose in response to that tragedy. Because "
         "tragedies are not positive events, it's possible that sadness and depression could arise from "
         "remembering it."},
        {mcqa("cqa-ex-2", "What do people do sometimes when they find a good deal?",
              {"race cars", "murder each other", "believe in god", "fight each other", "fear death"},
              "fight each other"),
         "Malls sometimes have sales, e.g., on black friday, when they offer good deals; however, the items are "
         "sometimes in limited supply, which can cause altercations between folks, each trying to buy the same "
         "item."},
        {mcqa("cqa-ex-3", "What does someone who has a greed for energy do?",
              {"buy food", "lie", "get", "cause businesses to grow", "win"}, "buy food"),
         "When consumed, food provides energy and satisfies the greed for it."},
    };
}
inline TaskInstance cqa_prompt_target() {
    return mcqa("cqa-target", "Immediately after peeing, a person's bladder is what?",
                {"full", "empty", "filled", "stretchable", "collapsed"}, "empty", Split::test);
}

/// Synthetic pools for property tests. NLI pools cycle through the three labels.
inline std::vector<PromptExample> synthetic_nli_pool(std::size_t n, std::uint64_t seed = 1) {
    Rng rng(seed);
    std::vector<PromptExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string words(5 + rng.uniform_index(30), 'x');
        out.push_back({nli("nli-pool-" + std::to_string(i), "Premise " + std::to_string(i) + " " + words,
                           "Hypothesis " + std::to_string(i), std::string(kNliLabels[i % 3])),
                       "Explanation number " + std::to_string(i) + " " + words + "."});
    }
    return out;
}

inline std::vector<PromptExample> synthetic_mcqa_pool(std::size_t n, std::uint64_t seed = 2) {
    Rng rng(seed);
    std::vector<PromptExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> choices;
        for (int c = 0; c < 5; ++c) choices.push_back("choice" + std::to_string(i) + "_" + std::to_string(c));
        std::string gold = choices[rng.uniform_index(5)];
        std::string filler;
        for (std::size_t w = 0, nw = 3 + rng.uniform_index(25); w < nw; ++w) filler += " word";
        out.push_back({mcqa("mcqa-pool-" + std::to_string(i), "Question " + std::to_string(i) + filler + "?",
                            choices, gold),
                       "Because reasons" + filler + "."});
    }
    return out;
}

/// Random evaluation fixture: `n` instances of 1..max_candidates candidates, ranks 0..m-1.
inline metrics::EvalSet random_eval_set(Rng& rng, std::size_t n, std::size_t max_candidates, double p_positive) {
    metrics::EvalSet set;
    for (std::size_t i = 0; i < n; ++i) {
        metrics::EvalInstance inst;
        inst.instance_id = "i" + std::to_string(i);
        const std::size_t m = 1 + rng.uniform_index(max_candidates);
        for (std::size_t c = 0; c < m; ++c)
            inst.candidates.push_back({inst.instance_id + "#" + std::to_string(c), static_cast<int>(c),
                                       rng.bernoulli(p_positive)});
        set.instances.push_back(std::move(inst));
    }
    return set;
}

}  // namespace overgen::fixtures
