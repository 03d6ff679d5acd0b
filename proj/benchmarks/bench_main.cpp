#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "overgen/annotation/agreement.hpp"
#include "overgen/filter/features.hpp"
#include "overgen/filter/linear_model.hpp"
#include "overgen/metrics/ranking.hpp"
#include "overgen/prompt/prompt_engine.hpp"

using namespace overgen;

static void BM_AveragePrecision(benchmark::State& state) {
    Rng rng(1);
    std::vector<metrics::ScoredLabel> items;
    for (std::int64_t i = 0; i < state.range(0); ++i) items.push_back({rng.uniform01(), rng.bernoulli(0.3)});
    for (auto _ : state) benchmark::DoNotOptimize(metrics::average_precision(items));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AveragePrecision)->Arg(1250)->Arg(5000)->Arg(100000);

static void BM_KrippendorffAlpha(benchmark::State& state) {
    Rng rng(2);
    annotation::RatingMatrix m;
    for (std::int64_t i = 0; i < state.range(0); ++i)
        m.push_back({rng.bernoulli(0.5) ? 1.0 : 0.0, rng.bernoulli(0.5) ? 1.0 : 0.0, rng.bernoulli(0.5) ? 1.0 : 0.0});
    for (auto _ : state) benchmark::DoNotOptimize(annotation::krippendorff_alpha(m, annotation::Scale::nominal));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KrippendorffAlpha)->Arg(1000)->Arg(5000);

static const std::string kInput =
    "What do people do sometimes when they find a good deal? answer: fight each other. explanation: Malls sometimes "
    "have sales when they offer good deals; items are in limited supply, which can cause altercations.. Is this "
    "explanation good or bad?";

static void BM_Featurize(benchmark::State& state) {
    filter::FeatureConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(filter::featurize(kInput, cfg));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(kInput.size()));
}
BENCHMARK(BM_Featurize);

static void BM_ScoreText(benchmark::State& state) {
    filter::LinearModel model(filter::FeatureConfig{}, filter::FilterMode::full, 1);
    for (auto _ : state) benchmark::DoNotOptimize(model.score_text(kInput));
}
BENCHMARK(BM_ScoreText);

static void BM_AssemblePrompt(benchmark::State& state) {
    auto pool = fixtures::synthetic_mcqa_pool(500);
    auto cfg = prompt::PromptConfig::mcqa_defaults();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(prompt::assemble_prompt(pool[i % pool.size()].instance, pool, cfg));
        ++i;
    }
}
BENCHMARK(BM_AssemblePrompt);
BENCHMARK_MAIN();
