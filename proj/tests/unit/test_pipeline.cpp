#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "overgen/pipeline/config.hpp"
#include "overgen/pipeline/demo.hpp"
#include "overgen/pipeline/manifest.hpp"
#include "overgen/pipeline/stages.hpp"

using namespace overgen;
using namespace overgen::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("overgen-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, ParsesSections) {
    auto cfg = RunConfig::parse(R"(
experiment = "x"
seed = 3
[data]
task = "nli"
corpus = "c.jsonl"
prompt_pool = "p.jsonl"
[prompt]
k_choices = [12, 18]
[filter]
backend = "external:http://localhost:9000"
mode = "explanation-only"
[eval]
threshold = "2of3"
)",
                                "/base");
    EXPECT_EQ(cfg.experiment_name, "x");
    EXPECT_EQ(cfg.data.task, Task::nli);
    EXPECT_EQ(cfg.prompt.k_choices, (std::vector<int>{12, 18}));
    EXPECT_EQ(cfg.filter.backend.kind, BackendKind::external);
    EXPECT_EQ(cfg.filter.backend.url, "http://localhost:9000");
    EXPECT_EQ(cfg.filter.mode, filter::FilterMode::explanation_only);
    EXPECT_EQ(cfg.eval.threshold, Threshold::at_2of3);
}

TEST(Config, UnknownKeyRejected) {
    EXPECT_THROW(RunConfig::parse("[data]\ntaks = \"nli\"\n", "."), ConfigError);
    EXPECT_THROW(RunConfig::parse("[filter]\nbackend = \"magic\"\n", "."), ConfigError);
    EXPECT_THROW(RunConfig::parse("this is not toml", "."), ConfigError);
}

TEST(Config, StageSettingsIsolateStages) {
    auto a = RunConfig::parse("[eval]\nthreshold = \"3of3\"\n", ".");
    auto b = RunConfig::parse("[eval]\nthreshold = \"2of3\"\n", ".");
    EXPECT_EQ(a.stage_settings("generate"), b.stage_settings("generate"));
    EXPECT_NE(a.stage_settings("evaluate"), b.stage_settings("evaluate"));
}

TEST(Manifest, UpToDateTracksInputsAndOutputs) {
    auto dir = temp_dir("manifest");
    {
        std::ofstream(dir / "out.txt") << "1";
    }
    Manifest m(dir);
    FileHashes in{{"a", "h1"}};
    m.record({"s", "cfg", in, hash_files(dir, {"out.txt"}), {}});
    Manifest reloaded(dir);
    EXPECT_TRUE(reloaded.up_to_date("s", "cfg", in));
    EXPECT_FALSE(reloaded.up_to_date("s", "other", in));
    EXPECT_FALSE(reloaded.up_to_date("s", "cfg", {{"a", "h2"}}));
    {
        std::ofstream(dir / "out.txt") << "2";
    }
    EXPECT_FALSE(reloaded.up_to_date("s", "cfg", in));
}

TEST(Pipeline, MissingUpstreamNamesProducer) {
    auto dir = temp_dir("upstream");
    auto cfg_path = write_demo_project(dir, {60, 48, 7, "t"});
    Pipeline p(RunConfig::load(cfg_path), dir / "run");
    try {
        p.run("evaluate");
        FAIL() << "expected UpstreamMissingError";
    } catch (const UpstreamMissingError& e) {
        EXPECT_NE(std::string(e.what()).find("aggregate"), std::string::npos);
    }
}

TEST(Pipeline, RerunSkipsAndConfigChangeInvalidatesDownstream) {
    auto dir = temp_dir("rerun");
    auto cfg_path = write_demo_project(dir, {80, 48, 7, "t"});
    {
        Pipeline p(RunConfig::load(cfg_path), dir / "run");
        for (const auto& r : p.run_all()) EXPECT_FALSE(r.skipped) << r.stage;
    }
    {
        Pipeline p(RunConfig::load(cfg_path), dir / "run");
        for (const auto& r : p.run_all()) EXPECT_TRUE(r.skipped) << r.stage;
    }
    auto cfg = RunConfig::load(cfg_path);
    cfg.eval.threshold = Threshold::at_2of3;
    Pipeline p(cfg, dir / "run");
    for (const auto& r : p.run_all()) {
        const bool downstream = r.stage == "evaluate" || r.stage == "report";
        EXPECT_EQ(r.skipped, !downstream) << r.stage;
    }
}

TEST(Pipeline, ArtifactsPassIntegrityCheck) {
    auto dir = temp_dir("integrity");
    auto cfg_path = write_demo_project(dir, {60, 48, 7, "t"});
    Pipeline p(RunConfig::load(cfg_path), dir / "run");
    p.run_all();
    auto report = validate_run_dir(dir / "run");
    EXPECT_TRUE(report.ok()) << (report.problems.empty() ? "" : report.problems.front());
    EXPECT_TRUE(fs::exists(dir / "run" / artifact::report));
}

#ifdef OVERGEN_CLI_PATH
TEST(Cli, ExitCodes) {
    auto dir = temp_dir("cli");
    const std::string cli = OVERGEN_CLI_PATH;
    ASSERT_EQ(std::system((cli + " demo " + (dir / "d").string() + " --instances 40 > /dev/null").c_str()), 0);
    const std::string cfg = " -c " + (dir / "d" / "config.toml").string() + " 2> /dev/null > /dev/null";
    EXPECT_EQ(WEXITSTATUS(std::system((cli + " evaluate" + cfg).c_str())), 3);
    EXPECT_EQ(WEXITSTATUS(std::system((cli + " validate -c /nonexistent.toml 2> /dev/null").c_str())), 2);
    EXPECT_EQ(WEXITSTATUS(std::system((cli + " run" + cfg).c_str())), 0);
}
#endif
