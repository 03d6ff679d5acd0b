#include <algorithm>
#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "overgen/annotation/aggregation.hpp"
#include "overgen/error.hpp"
#include "overgen/metrics/head_to_head.hpp"
#include "overgen/metrics/ranking.hpp"
#include "overgen/metrics/report.hpp"
#include "overgen/metrics/statistics.hpp"

using namespace overgen;
using namespace overgen::metrics;

namespace {

std::vector<ScoredLabel> zip(const std::vector<double>& s, const std::vector<bool>& l) {
    std::vector<ScoredLabel> out;
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s[i], l[i]});
    return out;
}

}  // namespace

TEST(AveragePrecision, PerfectRanking) {
    auto items = zip({0.9, 0.8, 0.1, 0.0}, {true, true, false, false});
    EXPECT_DOUBLE_EQ(*average_precision(items), 100.0);
}

TEST(AveragePrecision, WorstRanking) {
    auto items = zip({0.9, 0.8, 0.1}, {false, false, true});
    EXPECT_NEAR(*average_precision(items), 100.0 / 3.0, 1e-12);
}

TEST(AveragePrecision, HandComputedInterleaving) {
    // Positives at ranks 1 and 3: (1/1 + 2/3) / 2.
    auto items = zip({3, 2, 1, 0}, {true, false, true, false});
    EXPECT_NEAR(*average_precision(items), 100.0 * (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
}

TEST(AveragePrecision, NoPositivesIsUndefined) {
    auto items = zip({1, 2}, {false, false});
    EXPECT_FALSE(average_precision(items).has_value());
}

TEST(AveragePrecision, NanRejected) {
    auto items = zip({1, std::nan("")}, {true, false});
    EXPECT_THROW(average_precision(items), PreconditionError);
}

TEST(AveragePrecision, MatchesOracleOnRandomInputs) {
    Rng rng(11);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + rng.uniform_index(12);
        std::vector<double> s(n);
        std::vector<bool> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.uniform_index(5));  // plenty of ties
            l[i] = rng.bernoulli(0.4);
        }
        auto expected = oracle::average_precision(s, l);
        auto got = average_precision(zip(s, l));
        ASSERT_EQ(expected.has_value(), got.has_value());
        if (expected) EXPECT_NEAR(*got, *expected, 1e-12);
    }
}

TEST(AveragePrecision, OrderIndependentUnderTies) {
    auto a = zip({1, 1, 1, 0}, {true, false, true, false});
    auto b = a;
    std::reverse(b.begin(), b.end());
    EXPECT_EQ(*average_precision(a), *average_precision(b));
}

TEST(AveragePrecision, TieBoundsBracketValue) {
    auto items = zip({1, 1, 1, 0, 2}, {true, false, true, false, false});
    auto d = average_precision_detail(items);
    ASSERT_TRUE(d.ap && d.pessimistic && d.optimistic);
    EXPECT_LE(*d.pessimistic, *d.ap + 1e-12);
    EXPECT_GE(*d.optimistic, *d.ap - 1e-12);
    EXPECT_EQ(d.n_mixed_ties, 3u);
}

TEST(ConstantBaseline, EqualsPrevalence) {
    EXPECT_NEAR(*constant_baseline(397, 1250), 31.76, 1e-9);
    EXPECT_NEAR(*constant_baseline(181, 1250), 14.48, 1e-9);
    EXPECT_FALSE(constant_baseline(0, 10).has_value());
}

TEST(ConstantBaseline, BitIdenticalToApOverConstantScores) {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 1 + rng.uniform_index(2000);
        std::vector<bool> labels(n);
        std::vector<ScoredLabel> items;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.bernoulli(0.3);
            items.push_back({0.5, labels[i]});
        }
        auto raw = std::make_unique<bool[]>(n);
        std::copy(labels.begin(), labels.end(), raw.get());
        std::span<const bool> span(raw.get(), n);
        auto a = average_precision(items);
        auto c = constant_baseline(span);
        ASSERT_EQ(a.has_value(), c.has_value());
        if (a) EXPECT_EQ(*a, *c);
    }
}

TEST(ConstantBaseline, TestDistributionFixtures) {
    auto cqa = fixtures::cqa_test_labels();
    std::size_t pos = annotation::count_positive(cqa, Threshold::at_3of3);
    EXPECT_EQ(pos, 397u);
    EXPECT_NEAR(*constant_baseline(pos, cqa.size()), 31.8, 0.1);
    auto snli = fixtures::snli_test_labels();
    pos = annotation::count_positive(snli, Threshold::at_3of3);
    EXPECT_EQ(pos, 181u);
    EXPECT_NEAR(*constant_baseline(pos, snli.size()), 14.5, 0.1);
}

TEST(Selection, AccuracyMatchesOracle) {
    Rng rng(5);
    auto set = fixtures::random_eval_set(rng, 200, 6, 0.3);
    SelectionMap sel;
    std::vector<std::vector<bool>> labels;
    std::vector<std::size_t> chosen;
    for (const auto& inst : set.instances) {
        std::vector<bool> l;
        for (const auto& c : inst.candidates) l.push_back(c.positive);
        labels.push_back(l);
        const std::size_t pick = rng.uniform_index(inst.candidates.size());
        chosen.push_back(pick);
        sel[inst.instance_id] = inst.candidates[pick].candidate_id;
    }
    EXPECT_NEAR(select1_accuracy(set, sel), oracle::select1(labels, chosen), 1e-12);
    EXPECT_NEAR(oracle_select1(set), oracle::oracle_select1(labels), 1e-12);
    EXPECT_NEAR(random_select1_expectation(set), oracle::random_select1_expectation(labels), 1e-12);
    EXPECT_GE(oracle_select1(set), select1_accuracy(set, sel));
}

TEST(Selection, MissingSelectionThrows) {
    Rng rng(6);
    auto set = fixtures::random_eval_set(rng, 3, 3, 0.5);
    SelectionMap sel{{"i0", "i0#0"}, {"i1", "i1#0"}};
    EXPECT_THROW(select1_accuracy(set, sel), PreconditionError);
    sel["i2"] = "nope";
    EXPECT_THROW(select1_accuracy(set, sel), PreconditionError);
}

TEST(Selection, GreedyPicksRankZero) {
    EvalSet set;
    set.instances.push_back({"a", {{"a#1", 1, true}, {"a#0", 0, false}}});
    set.instances.push_back({"b", {{"b#0", 0, true}, {"b#1", 1, false}}});
    EXPECT_DOUBLE_EQ(greedy_select1(set), 50.0);
}

TEST(BuildEvalSet, UnlabeledCountAsNegative) {
    std::vector<ExplanationCandidate> cands(3);
    cands[0] = {"x#g", "x", "t", Decode::greedy()};
    cands[1] = {"x#s1", "x", "t", Decode::sampled(1)};
    cands[2] = {"y#g", "y", "t", Decode::greedy()};
    std::vector<AggregatedLabel> labels{AggregatedLabel::from_counts("x#g", 3, 3),
                                        AggregatedLabel::from_counts("y#g", 3, 2)};
    auto s3 = build_eval_set(cands, labels, Threshold::at_3of3);
    EXPECT_EQ(s3.n_unlabeled, 1u);
    EXPECT_EQ(s3.n_positive(), 1u);
    auto s2 = build_eval_set(cands, labels, Threshold::at_2of3);
    EXPECT_EQ(s2.n_positive(), 2u);
}

TEST(RandomBaseline, DeterministicAndCloseToExpectation) {
    Rng rng(8);
    auto set = fixtures::random_eval_set(rng, 400, 5, 0.3);
    auto a = random_baseline(set, 20, 42);
    auto b = random_baseline(set, 20, 42);
    EXPECT_EQ(a.select1.mean, b.select1.mean);
    EXPECT_EQ(a.ap.mean, b.ap.mean);
    EXPECT_NEAR(a.select1.mean, random_select1_expectation(set), 4 * a.select1.stderr_ + 1.0);
    EXPECT_THROW(random_baseline(set, 1, 0), PreconditionError);
}

TEST(Midranks, MatchOracle) {
    std::vector<double> x{3, 1, 3, 2, 3, 1};
    EXPECT_EQ(midranks(x), oracle::midranks(x));
}

TEST(Spearman, ExactExtremes) {
    std::vector<double> x{1, 5, 2, 8, 3, 3, 9};
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    EXPECT_EQ(*spearman_rho(x, x, 100).rho, 1.0);
    EXPECT_EQ(*spearman_rho(x, neg, 100).rho, -1.0);
}

TEST(Spearman, MatchesOracleWithTies) {
    Rng rng(9);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> x, y;
        for (int i = 0; i < 25; ++i) {
            x.push_back(static_cast<double>(rng.uniform_index(4)));
            y.push_back(static_cast<double>(rng.uniform_index(3)));
        }
        auto r = spearman_rho(x, y, 10);
        if (!r.rho) continue;
        EXPECT_NEAR(*r.rho, oracle::spearman(x, y), 1e-12);
    }
}

TEST(Spearman, ZeroVarianceUndefined) {
    std::vector<double> x{1, 1, 1, 1};
    std::vector<double> y{1, 2, 3, 4};
    EXPECT_FALSE(spearman_rho(x, y, 10).rho.has_value());
}

TEST(Spearman, PermutationPValueSeedStable) {
    std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> y{2, 1, 4, 3, 6, 5, 8, 7, 10, 9};
    auto a = spearman_rho(x, y, 2000, 77);
    auto b = spearman_rho(x, y, 2000, 77);
    EXPECT_EQ(*a.p_two_sided, *b.p_two_sided);
    EXPECT_LT(*a.p_two_sided, 0.01);
    EXPECT_THROW(spearman_rho(std::vector<double>{1, 2}, std::vector<double>{1, 2}), PreconditionError);
}

TEST(Wilcoxon, AllPositiveTenPairs) {
    std::vector<double> a, b;
    for (int i = 1; i <= 10; ++i) {
        a.push_back(10.0 + i);
        b.push_back(10.0);
    }
    auto r = wilcoxon_signed_rank_one_sided(a, b);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.p, std::ldexp(1.0, -10));
    EXPECT_EQ(r.w_plus, 55.0);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
    Rng rng(12);
    for (int t = 0; t < 40; ++t) {
        std::vector<double> a, b;
        for (int i = 0; i < 12; ++i) {
            a.push_back(static_cast<double>(rng.uniform_index(5)));
            b.push_back(static_cast<double>(rng.uniform_index(5)));
        }
        std::size_t nz = 0;
        for (std::size_t i = 0; i < a.size(); ++i) nz += a[i] != b[i];
        if (nz < kWilcoxonMinPairs) continue;
        EXPECT_NEAR(wilcoxon_signed_rank_one_sided(a, b).p, oracle::wilcoxon_exact(a, b), 1e-12);
    }
}

TEST(Wilcoxon, TooFewPairsThrows) {
    std::vector<double> a{1, 2, 3, 4}, b{0, 0, 0, 0};
    EXPECT_THROW(wilcoxon_signed_rank_one_sided(a, b), PreconditionError);
}

TEST(Wilcoxon, NormalApproximationAboveExactLimit) {
    std::vector<double> a, b;
    for (int i = 1; i <= 40; ++i) {
        a.push_back(i % 4 == 0 ? -i : i);
        b.push_back(0);
    }
    auto r = wilcoxon_signed_rank_one_sided(a, b);
    EXPECT_FALSE(r.exact);
    ASSERT_TRUE(r.z.has_value());
    EXPECT_LT(r.p, 0.05);
}

TEST(HeadToHead, SharesAndMajorities) {
    std::vector<Judgment> js;
    auto add = [&](std::string subject, std::string who, HeadToHeadChoice c, bool a_left) {
        Judgment j;
        j.judgment_id = subject + who;
        j.study_id = "h";
        j.annotator_id = who;
        j.subject_id = subject;
        j.kind = JudgmentKind::head_to_head;
        j.payload = HeadToHeadPayload{c, a_left ? "gpt3" : "human", a_left ? "human" : "gpt3"};
        js.push_back(j);
    };
    // Item 1: A, A, tie -> A. Item 2: B, B, A (A on the right) -> B. Item 3 incomplete.
    add("1", "r1", HeadToHeadChoice::left, true);
    add("1", "r2", HeadToHeadChoice::right, false);
    add("1", "r3", HeadToHeadChoice::tie, true);
    add("2", "r1", HeadToHeadChoice::right, true);
    add("2", "r2", HeadToHeadChoice::left, false);
    add("2", "r3", HeadToHeadChoice::left, true);
    add("3", "r1", HeadToHeadChoice::left, true);
    auto t = head_to_head_tally(js, "gpt3", "human");
    EXPECT_EQ(t.n_incomplete, 1u);
    EXPECT_EQ(t.per_annotation.n, 6u);
    EXPECT_NEAR(t.per_annotation.a, 100.0 * 3 / 6, 1e-9);
    EXPECT_NEAR(t.per_annotation.tie, 100.0 * 1 / 6, 1e-9);
    EXPECT_NEAR(t.per_item.a, 50.0, 1e-9);
    EXPECT_NEAR(t.per_item.b, 50.0, 1e-9);
}

TEST(Report, JsonRoundTrip) {
    MetricsReport r;
    r.experiment = "x";
    r.threshold = Threshold::at_2of3;
    r.splits = {Split::dev, Split::test};
    ReportRow row;
    row.name = "Constant";
    row.ap[Split::dev] = MetricCell{31.76, std::nullopt};
    row.select1[Split::dev] = MetricCell{std::nullopt, std::nullopt};
    r.rows.push_back(row);
    r.agreement_alpha = 0.25;
    auto back = MetricsReport::from_json(r.to_json());
    EXPECT_EQ(back.to_json(), r.to_json());
    EXPECT_NE(back.render_table().find("31.8"), std::string::npos);
    EXPECT_NE(back.render_table().find("---"), std::string::npos);
}
