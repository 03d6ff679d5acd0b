#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "overgen/generation/completion.hpp"
#include "overgen/generation/generator.hpp"
#include "overgen/prompt/prompt_engine.hpp"

using namespace overgen;
using namespace overgen::gen;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("overgen-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(StopSequences, CutAtEarliest) {
    std::vector<std::string> stops{"###", "\n"};
    EXPECT_EQ(cut_at_stop(" The bladder is empty.\n###", stops), " The bladder is empty.");
    EXPECT_EQ(cut_at_stop("abc###def\n", stops), "abc");
    EXPECT_EQ(cut_at_stop("no stop", stops), "no stop");
}

TEST(Candidates, TrimmedAndDegenerateFlagged) {
    CompletionResponse r{"  \n###", {"  ", "\n", "###"}, {-0.1, -0.2, -0.3}};
    std::vector<std::string> stops{"###", "\n"};
    auto c = make_candidate("i1", Decode::sampled(2), r, stops, "fp");
    EXPECT_TRUE(c.degenerate);
    EXPECT_EQ(c.candidate_id, "i1#s2");

    CompletionResponse ok{" A dog sleeps.\nmore", {" A", " dog", " sleeps.", "\n", "more"}, {-1, -1, -1, -1, -1}};
    auto d = make_candidate("i1", Decode::greedy(), ok, stops, "fp");
    EXPECT_EQ(d.text, "A dog sleeps.");
    EXPECT_EQ(d.token_logprobs.size(), 3u);
    EXPECT_DOUBLE_EQ(d.total_logprob, -3.0);
}

TEST(Generation, OneGreedyAndFourSamples) {
    auto pool = fixtures::synthetic_mcqa_pool(40);
    auto cfg = prompt::PromptConfig::mcqa_defaults();
    std::vector<CompletionRequest> seen;
    MockCompletionClient client([&](const CompletionRequest& r) {
        seen.push_back(r);
        return r.is_greedy() ? std::string(" greedy text.\n###") : std::string(" sampled text.\n");
    });
    GenerationConfig g;
    auto run = generate_candidates(pool[0].instance, pool, cfg, g, client);
    ASSERT_EQ(run.candidates.size(), 5u);
    EXPECT_TRUE(run.candidates[0].decode.is_greedy());
    for (int i = 1; i < 5; ++i) EXPECT_EQ(run.candidates[static_cast<std::size_t>(i)].decode.sample_index(), i);
    std::set<std::string> prompts;
    for (const auto& r : seen) prompts.insert(r.prompt_text);
    EXPECT_EQ(prompts.size(), 1u);  // every decode sees the same prompt
    EXPECT_EQ(seen[0].temperature, 0.0);
    for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_EQ(seen[i].temperature, g.temperature);
    for (const auto& c : run.candidates) EXPECT_EQ(c.prompt_fingerprint, run.prompt.fingerprint);
}

TEST(Generation, AllInstancesInOrder) {
    auto pool = fixtures::synthetic_mcqa_pool(40);
    std::vector<TaskInstance> targets;
    for (int i = 0; i < 10; ++i) targets.push_back(pool[static_cast<std::size_t>(i)].instance);
    MockCompletionClient client([](const CompletionRequest&) { return std::string(" text"); });
    auto runs = generate_all(targets, pool, prompt::PromptConfig::mcqa_defaults(), GenerationConfig{}, client);
    ASSERT_EQ(runs.size(), targets.size());
    for (std::size_t i = 0; i < runs.size(); ++i) EXPECT_EQ(runs[i].instance_id, targets[i].id);
}

TEST(Retry, RecoversFromTransientFailures) {
    auto mock = std::make_shared<MockCompletionClient>(std::vector<std::string>{"ok"});
    mock->fail_next(2);
    RetryPolicy policy;
    int retries = 0;
    policy.sleep = [](std::chrono::milliseconds) {};
    policy.on_retry = [&](int, const EndpointError&) { ++retries; };
    RetryingClient client(mock, policy);
    EXPECT_EQ(client.complete({"p"}).text, "ok");
    EXPECT_EQ(retries, 2);
}

TEST(Retry, GivesUpAfterMaxAttempts) {
    auto mock = std::make_shared<MockCompletionClient>(std::vector<std::string>{"ok"});
    mock->fail_next(10);
    RetryPolicy policy;
    policy.max_attempts = 3;
    policy.sleep = [](std::chrono::milliseconds) {};
    policy.on_retry = [](int, const EndpointError&) {};
    RetryingClient client(mock, policy);
    EXPECT_THROW(client.complete({"p"}), TimeoutError);
    EXPECT_EQ(mock->calls(), 3);
}

TEST(Cache, SecondCallHits) {
    auto dir = temp_dir("cache");
    auto mock = std::make_shared<MockCompletionClient>([](const CompletionRequest& r) { return r.prompt_text + "!"; });
    CachingClient client(mock, dir);
    CompletionRequest req{"hello"};
    auto a = client.complete(req);
    auto b = client.complete(req);
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(a.token_logprobs, b.token_logprobs);
    EXPECT_EQ(client.hits(), 1);
    EXPECT_EQ(mock->calls(), 1);
    req.temperature = 0.9;
    EXPECT_NE(client.cache_key(req), client.cache_key(CompletionRequest{"hello"}));
}

TEST(Mock, LogprobsDeterministic) {
    MockCompletionClient a([](const CompletionRequest&) { return std::string("one two three"); });
    MockCompletionClient b([](const CompletionRequest&) { return std::string("one two three"); });
    CompletionRequest r{"p"};
    r.seed_tag = "x";
    EXPECT_EQ(a.complete(r).token_logprobs, b.complete(r).token_logprobs);
}

TEST(Labels, ParsesSurfaceForms) {
    auto snli = fixtures::snli_prompt_target();
    const auto& nli_t = prompt::PromptTemplate::builtin(prompt::TemplateId::nli_qa_style);
    EXPECT_EQ(parse_label(" false\n", snli, nli_t), "contradiction");
    EXPECT_EQ(parse_label("neither.", snli, nli_t), "neutral");
    EXPECT_FALSE(parse_label("maybe", snli, nli_t).has_value());
    auto cqa = fixtures::cqa_prompt_target();
    const auto& mc_t = prompt::PromptTemplate::builtin(prompt::TemplateId::mcqa_style);
    EXPECT_EQ(parse_label(" empty", cqa, mc_t), "empty");
}
