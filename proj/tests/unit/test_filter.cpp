#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "overgen/error.hpp"
#include "overgen/filter/external.hpp"
#include "overgen/filter/features.hpp"
#include "overgen/filter/filter_input.hpp"
#include "overgen/filter/linear_model.hpp"
#include "overgen/filter/scoring.hpp"
#include "overgen/filter/training_set.hpp"

using namespace overgen;
using namespace overgen::filter;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("overgen-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

ExplanationCandidate cand(const std::string& instance, int rank, std::string text = "text") {
    ExplanationCandidate c;
    c.instance_id = instance;
    c.decode = rank == 0 ? Decode::greedy() : Decode::sampled(rank);
    c.candidate_id = instance + (rank == 0 ? "#g" : "#s" + std::to_string(rank));
    c.text = std::move(text);
    return c;
}

/// Instances and candidates where "because" marks the acceptable ones.
struct Planted {
    std::vector<TaskInstance> instances;
    std::vector<ExplanationCandidate> candidates;
    std::vector<AggregatedLabel> labels;
    std::vector<Judgment> judgments;
};

Planted planted(std::size_t n, std::uint64_t seed) {
    Planted p;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const Split split = i % 5 < 3 ? Split::train : (i % 5 == 3 ? Split::dev : Split::test);
        auto inst = fixtures::mcqa("q" + std::to_string(i), "Where does thing " + std::to_string(i) + " go?",
                                   {"box", "shelf", "floor"}, "shelf", split);
        p.instances.push_back(inst);
        for (int r = 0; r < 5; ++r) {
            const bool good = rng.bernoulli(0.35);
            auto c = cand(inst.id, r,
                          good ? "The thing goes on the shelf because shelves hold things."
                               : "A shelf is a shelf " + std::to_string(rng.uniform_index(100)) + ".");
            const int accepts = good ? 3 : static_cast<int>(rng.uniform_index(2));
            p.labels.push_back(AggregatedLabel::from_counts(c.candidate_id, 3, accepts));
            for (int k = 0; k < 3; ++k) {
                Judgment j;
                j.judgment_id = c.candidate_id + "/" + std::to_string(k);
                j.study_id = "s";
                j.annotator_id = "r" + std::to_string(k);
                j.subject_id = c.candidate_id;
                j.payload = AcceptabilityPayload{k < accepts};
                p.judgments.push_back(j);
            }
            p.candidates.push_back(c);
        }
    }
    return p;
}

}  // namespace

TEST(FilterInput, GoldenStrings) {
    auto lines = fixtures::golden_lines("filter_inputs.txt");
    ASSERT_EQ(lines.size(), 4u);
    auto cqa = fixtures::cqa_prompt_target();
    auto snli = fixtures::snli_prompt_target();
    EXPECT_EQ(format_filter_input(make_filter_input(cqa, "After peeing, the bladder is empty.",
                                                    FilterMode::explanation_only)),
              lines[0]);
    EXPECT_EQ(format_filter_input(make_filter_input(cqa, "After peeing, the bladder is empty.", FilterMode::full)),
              lines[1]);
    EXPECT_EQ(format_filter_input(make_filter_input(snli, "A dog cannot carry something while asleep",
                                                    FilterMode::explanation_only)),
              lines[2]);
    EXPECT_EQ(format_filter_input(make_filter_input(snli, "A dog cannot carry something while asleep",
                                                    FilterMode::full)),
              lines[3]);
}

TEST(FilterInput, RejectsMissingFields) {
    FilterInput in{"", "a", "e", FilterMode::full};
    EXPECT_THROW(validate(in), PreconditionError);
    in.mode = FilterMode::explanation_only;
    EXPECT_NO_THROW(validate(in));
    in.explanation.clear();
    EXPECT_THROW(validate(in), PreconditionError);
}

TEST(TrainingSet, WithAgreementUsesTwoOfThree) {
    auto p = planted(30, 1);
    auto set = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::with_agreement,
                                  FilterMode::full, 3);
    ASSERT_EQ(set.examples.size(), p.candidates.size());
    std::size_t pos = 0;
    for (const auto& l : p.labels) pos += l.label_2of3;
    std::size_t got = 0;
    for (const auto& e : set.examples) got += e.label;
    EXPECT_EQ(got, pos);
    EXPECT_NO_THROW(check_split_integrity(set));
}

TEST(TrainingSet, WithoutAgreementSeeded) {
    auto p = planted(30, 2);
    auto a = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::without_agreement,
                                FilterMode::full, 3);
    auto b = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::without_agreement,
                                FilterMode::full, 3);
    EXPECT_EQ(a.examples, b.examples);
    // Unanimous candidates keep their label whichever rater is drawn.
    for (std::size_t i = 0; i < p.labels.size(); ++i)
        if (p.labels[i].n_accept == 3) EXPECT_TRUE(a.examples[i].label);
}

TEST(TrainingSet, SkipsUnlabeledAndDegenerate) {
    auto p = planted(10, 3);
    p.candidates[0].degenerate = true;
    p.candidates[0].text.clear();
    p.labels.erase(p.labels.begin() + 1);
    auto set = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::with_agreement,
                                  FilterMode::full, 3);
    EXPECT_EQ(set.examples.size(), p.candidates.size() - 2);
    EXPECT_EQ(set.n_degenerate, 1u);
    EXPECT_EQ(set.n_incomplete, 1u);
}

TEST(TrainingSet, SaveLoadRoundTrip) {
    auto p = planted(10, 4);
    auto set = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::with_agreement,
                                  FilterMode::explanation_only, 3);
    auto path = temp_dir("ts") / "training_set.jsonl";
    save_training_set(path, set);
    auto back = load_training_set(path);
    EXPECT_EQ(back.examples, set.examples);
    EXPECT_EQ(back.mode, set.mode);
    EXPECT_EQ(back.scheme, set.scheme);
}

TEST(Features, NormalizedAndDeterministic) {
    FeatureConfig cfg;
    auto a = featurize("The dog sleeps because it is tired.", cfg);
    auto b = featurize("The dog sleeps because it is tired.", cfg);
    ASSERT_EQ(a.size(), b.size());
    double norm = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].index, b[i].index);
        EXPECT_EQ(a[i].value, b[i].value);
        EXPECT_LT(a[i].index, cfg.dim());
        norm += a[i].value * a[i].value;
    }
    EXPECT_NEAR(norm, 1.0, 1e-12);
    EXPECT_TRUE(featurize("", cfg).empty());
}

TEST(Features, LowercaseOption) {
    FeatureConfig cfg;
    auto a = featurize("Dog", cfg);
    auto b = featurize("dog", cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].index, b[i].index);
}

TEST(LinearModel, LearnsPlantedRule) {
    auto p = planted(200, 5);
    auto set = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::with_agreement,
                                  FilterMode::explanation_only, 3);
    TrainConfig tc;
    tc.features.dim_log2 = 14;
    auto [model, report] = train_builtin(set, tc);
    EXPECT_GT(report.validation_accuracy, 0.95);
    EXPECT_GT(model.score_text("explanation: It goes there because it fits.. Is this explanation good or bad?"),
              model.score_text("explanation: It is a shelf 3.. Is this explanation good or bad?"));
    // Same data and seed, same model.
    auto again = train_builtin(set, tc).first;
    EXPECT_EQ(again.digest(), model.digest());
}

TEST(LinearModel, SerializationRoundTrip) {
    auto p = planted(60, 6);
    auto set = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::with_agreement,
                                  FilterMode::full, 3);
    TrainConfig tc;
    tc.features.dim_log2 = 12;
    tc.max_epochs = 5;
    auto model = train_builtin(set, tc).first;
    auto path = temp_dir("model") / "m.bin";
    model.save(path);
    auto back = LinearModel::load(path);
    EXPECT_EQ(back.digest(), model.digest());
    EXPECT_EQ(back.weights(), model.weights());
    auto bytes = model.serialize();
    EXPECT_THROW(LinearModel::deserialize(bytes.substr(0, bytes.size() - 3)), ModelFormatError);
    bytes[0] = 'X';
    EXPECT_THROW(LinearModel::deserialize(bytes), ModelFormatError);
}

TEST(LinearModel, SingleClassRejected) {
    auto p = planted(20, 7);
    for (auto& l : p.labels) l = AggregatedLabel::from_counts(l.candidate_id, 3, 0);
    auto set = build_training_set(p.instances, p.candidates, p.labels, p.judgments, LabelScheme::with_agreement,
                                  FilterMode::full, 3);
    EXPECT_THROW(train_builtin(set, TrainConfig{}), PreconditionError);
}

TEST(Selection, ArgmaxWithRankTieBreak) {
    std::vector<ExplanationCandidate> cs{cand("a", 0), cand("a", 1), cand("a", 2)};
    EXPECT_EQ(select_one(cs, {{"a#g", 0.2}, {"a#s1", 0.9}, {"a#s2", 0.5}}), 1u);
    EXPECT_EQ(select_one(cs, {{"a#g", 0.5}, {"a#s1", 0.9}, {"a#s2", 0.9}}), 1u);
    EXPECT_EQ(select_one(cs, {{"a#s2", 0.9}, {"a#s1", 0.9}}), 1u);
    EXPECT_EQ(select_one(cs, {}), 0u);  // nothing scored: greedy
}

TEST(Selection, InvariantUnderMonotoneTransform) {
    Rng rng(4);
    std::vector<ExplanationCandidate> cs;
    FilterScoreSet s;
    for (int i = 0; i < 50; ++i)
        for (int r = 0; r < 5; ++r) {
            cs.push_back(cand("i" + std::to_string(i), r));
            s.scores.push_back({cs.back().candidate_id, static_cast<double>(rng.uniform_index(6)) / 5.0, ""});
        }
    auto base = select_all(cs, s);
    for (int t = 0; t < 20; ++t) {
        const double a = 0.1 + rng.uniform01() * 5, b = rng.uniform01() * 10 - 5;
        FilterScoreSet u = s;
        for (auto& c : u.scores) c.value = std::exp(a * *c.value + b);
        auto sel = select_all(cs, u);
        ASSERT_EQ(sel.size(), base.size());
        for (std::size_t i = 0; i < sel.size(); ++i) EXPECT_EQ(sel[i].candidate_id, base[i].candidate_id);
    }
}

TEST(Nll, ScoresSumsAndFlagsDegenerate) {
    auto a = cand("x", 0);
    a.token_logprobs = {-0.5, -0.5};
    a.total_logprob = -1.0;
    auto b = cand("x", 1);
    b.token_logprobs = {-0.1, -0.1, -0.1, -0.1};
    b.total_logprob = -0.4;
    auto d = cand("x", 2, "");
    d.degenerate = true;
    std::vector<ExplanationCandidate> cs{a, b, d};
    auto sum = score_nll(cs);
    EXPECT_EQ(sum.kind, ScoreKind::log_likelihood);
    EXPECT_DOUBLE_EQ(*sum.scores[0].value, -1.0);
    EXPECT_FALSE(sum.scores[2].value.has_value());
    EXPECT_EQ(sum.n_errors(), 1u);
    auto mean = score_nll(cs, true);
    EXPECT_DOUBLE_EQ(*mean.scores[1].value, -0.1);
    auto missing = cand("y", 0);
    std::vector<ExplanationCandidate> bad{missing};
    EXPECT_THROW(score_nll(bad), MissingLogprobsError);
}

TEST(Nll, DominanceFraction) {
    auto g = cand("x", 0);
    g.token_logprobs = {-1};
    g.total_logprob = -1;
    auto s = cand("x", 1);
    s.token_logprobs = {-0.5};
    s.total_logprob = -0.5;
    auto g2 = cand("y", 0);
    g2.token_logprobs = {-0.1};
    g2.total_logprob = -0.1;
    std::vector<ExplanationCandidate> cs{g, s, g2};
    EXPECT_DOUBLE_EQ(*nll_dominance_fraction(cs), 0.5);
}

TEST(ScoreSet, SaveLoadRoundTrip) {
    FilterScoreSet s{"builtin:abc", ScoreKind::probability, {{"a", 0.25, ""}, {"b", std::nullopt, "degenerate"}}};
    auto path = temp_dir("scores") / "scores.jsonl";
    save_score_set(path, s);
    auto back = load_score_set(path);
    EXPECT_EQ(back.backend_id, s.backend_id);
    EXPECT_EQ(back.scores, s.scores);
}

TEST(KeywordRuleScorer, Sigmoid) {
    KeywordRule rule{{{"because", 2.0}}, -1.0, 0.0};
    EXPECT_NEAR(rule("Because because"), 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
    EXPECT_NEAR(rule("nothing"), 1.0 / (1.0 + std::exp(1.0)), 1e-15);
}

TEST(External, MatchesInProcessRule) {
    KeywordRule rule{{{"because", 3.0}, {"shelf", -0.5}}, -1.0, 0.2};
    ReferenceScorerServer server(rule);
    const int port = server.start();
    ExternalScorer scorer({"http://127.0.0.1:" + std::to_string(port), 16, std::chrono::milliseconds(5000)});
    auto p = planted(20, 8);
    auto items = make_scoring_items(p.candidates, p.instances, FilterMode::full);
    auto remote = scorer.score(items);
    EXPECT_EQ(remote.backend_id, "external:" + rule.version);
    ASSERT_EQ(remote.scores.size(), items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        EXPECT_EQ(*remote.scores[i].value, rule(format_filter_input(*items[i].input)));
    server.stop();
}

TEST(External, TruncatedBatchRetriedThenPerItemErrors) {
    KeywordRule rule{{{"because", 1.0}}, 0.0, 0.0};
    ReferenceScorerServer server(rule);
    const int port = server.start();
    auto p = planted(4, 9);
    auto items = make_scoring_items(p.candidates, p.instances, FilterMode::full);
    ExternalScorer scorer({"http://127.0.0.1:" + std::to_string(port), 64, std::chrono::milliseconds(5000)});

    server.truncate_next(1);  // one short response: the retry succeeds
    auto ok = scorer.score(items);
    EXPECT_EQ(ok.n_errors(), 0u);

    server.truncate_next(2);  // short twice: the batch fails, scoring continues
    auto bad = scorer.score(items);
    EXPECT_EQ(bad.n_errors(), items.size());
    server.stop();
}

TEST(External, UnreachableScorer) {
    ExternalScorer scorer({"http://127.0.0.1:1", 8, std::chrono::milliseconds(500)});
    auto p = planted(1, 10);
    auto items = make_scoring_items(p.candidates, p.instances, FilterMode::full);
    EXPECT_THROW(scorer.score(items), ScorerUnavailableError);
}
