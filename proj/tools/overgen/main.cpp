#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "overgen/filter/external.hpp"
#include "overgen/filter/scoring.hpp"
#include "overgen/generation/completion.hpp"
#include "overgen/pipeline/config.hpp"
#include "overgen/pipeline/demo.hpp"
#include "overgen/pipeline/manifest.hpp"
#include "overgen/pipeline/stages.hpp"

namespace fs = std::filesystem;
using namespace overgen;

namespace {

struct Options {
    fs::path config = "config.toml";
    fs::path run_dir;
    bool force = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<std::string> threshold;
    std::optional<std::string> mode;
    bool verbose = false;
};

pipeline::Pipeline make_pipeline(const Options& o) {
    auto cfg = pipeline::RunConfig::load(o.config);
    if (o.seed) cfg.set_seed(*o.seed);
    if (o.backend) cfg.filter.backend = pipeline::BackendSpec::parse(*o.backend);
    try {
        if (o.threshold) cfg.eval.threshold = parse_threshold(*o.threshold);
        if (o.mode) cfg.filter.mode = filter::parse_filter_mode(*o.mode);
    } catch (const Error& e) {
        throw pipeline::ConfigError(e.what());
    }
    fs::path dir = o.run_dir.empty() ? cfg.base_dir / "runs" / cfg.experiment_name : o.run_dir;
    pipeline::Pipeline p(std::move(cfg), dir);
    p.set_force(o.force);
    return p;
}

void print(const pipeline::StageResult& r) {
    std::cout << r.stage << ": " << (r.skipped ? "skipped (" + r.summary + ")" : r.summary) << "\n";
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const pipeline::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const pipeline::UpstreamMissingError*>(&e)) return 3;
    if (dynamic_cast<const gen::EndpointError*>(&e) || dynamic_cast<const filter::ScorerUnavailableError*>(&e))
        return 4;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overgenerate-and-filter explanation pipeline"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "Run configuration (TOML)");
        sub->add_option("-r,--run-dir", o.run_dir, "Run directory (default <config dir>/runs/<experiment>)");
        sub->add_flag("-f,--force", o.force, "Rerun even when up to date");
        sub->add_option("--seed", o.seed, "Override the experiment seed");
        sub->add_option("--backend", o.backend, "Filter backend: nll | builtin | external:<url>");
        sub->add_option("--threshold", o.threshold, "Acceptability threshold: 2of3 | 3of3");
        sub->add_option("--mode", o.mode, "Filter input: full | explanation-only");
        sub->add_flag("-v,--verbose", o.verbose, "Debug logging");
    };

    struct StageCommand {
        const char* name;
        const char* stage;
        const char* help;
    };
    const StageCommand stage_commands[] = {
        {"validate", "validate", "Ingest and check the corpus and prompt pool"},
        {"prompts", "prompts", "Assemble few-shot prompts"},
        {"generate", "generate", "Sample explanation candidates"},
        {"predict-labels", "predict-labels", "Few-shot label prediction"},
        {"annotate-synthetic", "annotate", "Simulated acceptability judgments"},
        {"aggregate", "aggregate", "Aggregate judgments into labels and QC"},
        {"build-labels", "build-labels", "Build the filter training set"},
        {"train-filter", "train-filter", "Train the builtin filter"},
        {"score", "score", "Score candidates with the filter backend"},
        {"select", "select", "Select one explanation per instance"},
        {"evaluate", "evaluate", "Compute select-1 and explanation-level AP"},
        {"report", "report", "Render the results table"},
    };
    std::string chosen_stage;
    for (const auto& sc : stage_commands) {
        auto* sub = app.add_subcommand(sc.name, sc.help);
        add_common(sub);
        sub->callback([&chosen_stage, stage = sc.stage] { chosen_stage = stage; });
    }

    auto* run = app.add_subcommand("run", "Run every stage with synthetic annotation");
    add_common(run);
    auto* serve = app.add_subcommand("serve", "Serve the annotation study over HTTP");
    add_common(serve);

    fs::path demo_dir = "demo";
    pipeline::DemoProjectOptions demo_opts;
    auto* demo = app.add_subcommand("demo", "Write a synthetic demo project");
    demo->add_option("dir", demo_dir, "Target directory");
    demo->add_option("--instances", demo_opts.n_instances, "Number of instances");
    demo->add_option("--seed", demo_opts.seed, "Generator seed");

    std::string scorer_host = "127.0.0.1";
    int scorer_port = 8700;
    std::string scorer_marker = "because";
    auto* mock_scorer = app.add_subcommand("mock-scorer", "Serve a reference keyword scorer");
    mock_scorer->add_option("--host", scorer_host);
    mock_scorer->add_option("--port", scorer_port);
    mock_scorer->add_option("--marker", scorer_marker, "Keyword that raises the score");

    CLI11_PARSE(app, argc, argv);
    if (o.verbose) spdlog::set_level(spdlog::level::debug);

    try {
        if (demo->parsed()) {
            auto cfg = pipeline::write_demo_project(demo_dir, demo_opts);
            std::cout << "wrote " << cfg.string() << "\n";
            return 0;
        }
        if (mock_scorer->parsed()) {
            filter::KeywordRule rule{{{scorer_marker, 4.0}}, -2.0, 0.0, "keyword-rule/1"};
            filter::ReferenceScorerServer server(rule);
            std::cout << "scoring on " << scorer_host << ":" << scorer_port << "\n" << std::flush;
            server.listen(scorer_host, scorer_port);
            return 0;
        }
        auto p = make_pipeline(o);
        if (serve->parsed()) {
            std::cout << "serving on " << p.config().annotation.host << ":" << p.config().annotation.port << "\n"
                      << std::flush;
            p.serve();
            return 0;
        }
        if (run->parsed()) {
            for (const auto& r : p.run_all()) print(r);
            return 0;
        }
        print(p.run(chosen_stage));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
