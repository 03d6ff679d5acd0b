#include "overgen/pipeline/stages.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "overgen/annotation/aggregation.hpp"
#include "overgen/annotation/agreement.hpp"
#include "overgen/annotation/quality.hpp"
#include "overgen/annotation/service.hpp"
#include "overgen/annotation/synthetic.hpp"
#include "overgen/filter/external.hpp"
#include "overgen/filter/linear_model.hpp"
#include "overgen/filter/scoring.hpp"
#include "overgen/filter/training_set.hpp"
#include "overgen/generation/generator.hpp"
#include "overgen/hashing.hpp"
#include "overgen/metrics/report.hpp"
#include "overgen/pipeline/demo.hpp"
#include "overgen/serialization.hpp"

namespace overgen::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << text;
    }
    fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

fs::path resolve(const RunConfig& cfg, const fs::path& p) { return p.is_relative() ? cfg.base_dir / p : p; }

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string fmt_pct(std::optional<double> v) {
    if (!v) return "n/a";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << *v;
    return os.str();
}

}  // namespace

annotation::StudySpec acceptability_study(const RunConfig& config, std::span<const TaskInstance> instances,
                                          std::span<const ExplanationCandidate> candidates) {
    std::unordered_map<std::string_view, const TaskInstance*> by_id;
    for (const auto& i : instances) by_id.emplace(i.id, &i);
    annotation::StudySpec spec;
    spec.study_id = config.experiment_name + "-acceptability";
    spec.kind = annotation::StudyKind::acceptability;
    spec.raters_per_item = config.annotation.raters_per_item;
    spec.batch_size = config.annotation.batch_size;
    spec.task = config.data.task;
    for (const auto& c : candidates) {
        if (c.degenerate) continue;
        auto it = by_id.find(c.instance_id);
        if (it == by_id.end()) throw InvariantError(c.candidate_id, "unknown instance '" + c.instance_id + "'");
        const auto& inst = *it->second;
        annotation::StudyItem item;
        item.subject_id = c.candidate_id;
        item.task = inst.task;
        item.question = inst.question;
        item.premise = inst.premise;
        item.hypothesis = inst.hypothesis;
        item.gold_label = inst.gold_label;
        item.explanations.push_back({c.text, c.decode.to_string()});
        spec.items.push_back(std::move(item));
    }
    return spec;
}

Pipeline::Pipeline(RunConfig config, fs::path run_dir)
    : config_(std::move(config)), dir_(std::move(run_dir)), manifest_((fs::create_directories(dir_), dir_)) {}

const std::vector<std::string>& Pipeline::stages() {
    static const std::vector<std::string> names{"validate", "prompts",      "generate",     "predict-labels",
                                                "annotate", "aggregate",    "build-labels", "train-filter",
                                                "score",    "select",       "evaluate",     "report"};
    return names;
}

StageResult Pipeline::run(std::string_view stage) {
    if (stage == "validate") return validate();
    if (stage == "prompts") return prompts();
    if (stage == "generate") return generate();
    if (stage == "predict-labels") return predict_labels();
    if (stage == "annotate") return annotate();
    if (stage == "aggregate") return aggregate();
    if (stage == "build-labels") return build_labels();
    if (stage == "train-filter") return train_filter();
    if (stage == "score") return score();
    if (stage == "select") return select();
    if (stage == "evaluate") return evaluate();
    if (stage == "report") return report();
    throw ConfigError("unknown stage '" + std::string(stage) + "'");
}

std::vector<StageResult> Pipeline::run_all() {
    std::vector<StageResult> out;
    for (const auto& s : stages()) {
        if (s == "predict-labels") continue;
        out.push_back(run(s));
    }
    return out;
}

StageResult Pipeline::execute(const std::string& stage, const Inputs& inputs, const FileHashes& external_inputs,
                              const std::vector<std::string>& outputs, const std::function<std::string()>& body) {
    std::vector<std::string> names;
    for (const auto& [file, producer] : inputs) {
        if (!fs::exists(dir_ / file)) throw UpstreamMissingError(file, producer);
        names.push_back(file);
    }
    FileHashes in = hash_files(dir_, names);
    for (const auto& [k, v] : external_inputs) in[k] = v;
    const std::string config_hash = sha256_hex(config_.stage_settings(stage).dump());
    if (!force_ && manifest_.up_to_date(stage, config_hash, in)) {
        spdlog::info("{}: up to date", stage);
        return {stage, true, "up to date"};
    }
    spdlog::info("{}: running", stage);
    StageResult result{stage, false, body()};
    manifest_.record({stage, config_hash, in, hash_files(dir_, outputs), {}});
    return result;
}

std::shared_ptr<gen::CompletionClient> Pipeline::client() {
    if (client_) return client_;
    if (config_.endpoint.kind == "mock") {
        client_ = std::make_shared<gen::MockCompletionClient>(demo_responder(
            {config_.annotation.planted_marker, 0.45, 0.3, derive_seed(config_.seed, "mock-endpoint")}));
        return client_;
    }
    gen::EndpointConfig ep;
    ep.base_url = config_.endpoint.base_url;
    ep.model = config_.endpoint.model;
    ep.timeout = std::chrono::milliseconds(config_.endpoint.timeout_ms);
    ep = gen::EndpointConfig::from_env(ep);
    if (ep.api_key.empty() && !config_.endpoint.api_key_env.empty())
        if (const char* key = std::getenv(config_.endpoint.api_key_env.c_str())) ep.api_key = key;
    std::shared_ptr<gen::CompletionClient> c = std::make_shared<gen::HttpCompletionClient>(ep);
    c = std::make_shared<gen::RetryingClient>(c);
    if (config_.endpoint.cache) c = std::make_shared<gen::CachingClient>(c, dir_ / "cache");
    client_ = c;
    return client_;
}

StageResult Pipeline::validate() {
    config_.validate();
    const auto corpus = resolve(config_, config_.data.corpus);
    const auto pool_path = resolve(config_, config_.data.prompt_pool);
    FileHashes external{{"corpus:" + corpus.filename().string(), sha256_file(corpus)},
                        {"prompt_pool:" + pool_path.filename().string(), sha256_file(pool_path)}};
    return execute("validate", {}, external, {artifact::instances, artifact::prompt_pool}, [&] {
        auto instances = ingest_corpus(corpus, config_.data.corpus_format, CsvColumns{});
        auto pool = ingest_prompt_pool(pool_path, config_.data.pool_format, CsvColumns{});
        for (const auto& i : instances)
            if (i.task != config_.data.task)
                throw ConfigError("instance '" + i.id + "' is " + std::string(to_string(i.task)) + ", config says " +
                                  std::string(to_string(config_.data.task)));
        std::size_t same_task = 0;
        for (const auto& p : pool) same_task += p.instance.task == config_.data.task ? 1 : 0;
        try {
            prompt::validate(config_.prompt, same_task);
        } catch (const Error& e) {
            throw ConfigError(std::string("prompt: ") + e.what());
        }
        jsonl::write_records(dir_ / artifact::instances, entity::instances, instances);
        jsonl::write_records(dir_ / artifact::prompt_pool, entity::prompt_pool, pool);
        std::map<Split, std::size_t> per;
        for (const auto& i : instances) ++per[i.split];
        std::ostringstream os;
        os << instances.size() << " instances (";
        bool first = true;
        for (const auto& [s, n] : per) {
            os << (first ? "" : ", ") << to_string(s) << " " << n;
            first = false;
        }
        os << "), " << pool.size() << " pool examples";
        return os.str();
    });
}

StageResult Pipeline::prompts() {
    return execute("prompts", {{artifact::instances, "validate"}, {artifact::prompt_pool, "validate"}}, {},
                   {artifact::prompts}, [&] {
                       auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
                       auto pool = jsonl::read_records<PromptExample>(dir_ / artifact::prompt_pool, entity::prompt_pool);
                       std::vector<json> rows;
                       long total_tokens = 0;
                       for (const auto& inst : instances) {
                           auto p = prompt::assemble_prompt(inst, pool, config_.prompt);
                           total_tokens += p.estimated_tokens;
                           rows.push_back({{"target_instance_id", p.target_instance_id},
                                           {"example_ids", p.example_ids},
                                           {"k_used", p.k_used},
                                           {"estimated_tokens", p.estimated_tokens},
                                           {"attempts", p.attempts},
                                           {"fingerprint", p.fingerprint},
                                           {"text", p.rendered_text}});
                       }
                       jsonl::write(dir_ / artifact::prompts, "prompts", rows);
                       return std::to_string(rows.size()) + " prompts, mean " +
                              std::to_string(rows.empty() ? 0 : total_tokens / static_cast<long>(rows.size())) +
                              " estimated tokens";
                   });
}

StageResult Pipeline::generate() {
    return execute("generate", {{artifact::instances, "validate"}, {artifact::prompt_pool, "validate"}}, {},
                   {artifact::candidates}, [&] {
                       auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
                       auto pool = jsonl::read_records<PromptExample>(dir_ / artifact::prompt_pool, entity::prompt_pool);
                       auto runs = gen::generate_all(instances, pool, config_.prompt, config_.generation, *client());
                       std::vector<ExplanationCandidate> candidates;
                       std::size_t degenerate = 0;
                       for (auto& r : runs) {
                           degenerate += r.degenerate_count();
                           for (auto& c : r.candidates) candidates.push_back(std::move(c));
                       }
                       jsonl::write_records(dir_ / artifact::candidates, entity::candidates, candidates);
                       std::string s = std::to_string(candidates.size()) + " candidates for " +
                                       std::to_string(runs.size()) + " instances";
                       if (degenerate) s += ", " + std::to_string(degenerate) + " degenerate";
                       if (auto nll = filter::nll_dominance_fraction(candidates))
                           s += "; a sample beats greedy likelihood on " + fmt_pct(100.0 * *nll) + "% of instances";
                       return s;
                   });
}

StageResult Pipeline::predict_labels() {
    return execute(
        "predict-labels", {{artifact::instances, "validate"}, {artifact::prompt_pool, "validate"}}, {},
        {artifact::label_predictions}, [&] {
            auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
            auto pool = jsonl::read_records<PromptExample>(dir_ / artifact::prompt_pool, entity::prompt_pool);
            std::vector<gen::LabelPrediction> preds;
            std::vector<json> rows;
            for (const auto& inst : instances) {
                auto p = gen::predict_label(inst, pool, config_.prompt, *client());
                rows.push_back({{"instance_id", p.instance_id},
                                {"completion", p.completion},
                                {"predicted_label", p.predicted_label ? json(*p.predicted_label) : json(nullptr)},
                                {"correct", p.correct}});
                preds.push_back(std::move(p));
            }
            jsonl::write(dir_ / artifact::label_predictions, "label_predictions", rows);
            return "label accuracy " + fmt_pct(gen::label_accuracy(preds)) + "% over " + std::to_string(preds.size()) +
                   " instances";
        });
}

StageResult Pipeline::annotate() {
    return execute(
        "annotate", {{artifact::instances, "validate"}, {artifact::candidates, "generate"}}, {}, {artifact::judgments},
        [&] {
            auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
            auto candidates =
                jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates, entity::candidates);
            annotation::Study study(acceptability_study(config_, instances, candidates));
            std::vector<annotation::SyntheticAnnotator> raters;
            for (int i = 0; i < config_.annotation.synthetic_annotators; ++i)
                raters.push_back({"synthetic-" + std::to_string(i + 1), config_.annotation.synthetic_error_rate,
                                  35000, false});
            const std::string marker = lower(config_.annotation.planted_marker);
            auto rule = [&](const annotation::StudyItem& item) {
                return lower(item.explanations.front().text).find(marker) != std::string::npos;
            };
            // Fixed clock so reruns produce identical judgments.
            const annotation::Clock::time_point epoch{std::chrono::milliseconds(1'700'000'000'000)};
            const auto n = annotation::simulate_acceptability(study, raters, rule,
                                                              derive_seed(config_.seed, "annotate"), epoch);
            auto judgments = study.judgments();
            jsonl::write_records(dir_ / artifact::judgments, entity::judgments, judgments);
            auto close = study.close_out();
            std::string s = std::to_string(n) + " synthetic judgments over " + std::to_string(study.page_count()) +
                            " pages";
            if (!close.complete()) s += ", " + std::to_string(close.underfilled_pages.size()) + " pages underfilled";
            return s;
        });
}

void Pipeline::serve() {
    for (const char* f : {artifact::instances, artifact::candidates})
        if (!fs::exists(dir_ / f)) throw UpstreamMissingError(f, f == artifact::instances ? "validate" : "generate");
    auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
    auto candidates = jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates, entity::candidates);
    annotation::ServiceConfig sc;
    if (const char* t = std::getenv(config_.annotation.admin_token_env.c_str())) sc.admin_token = t;
    sc.annotator_tokens = config_.annotation.annotator_tokens;
    if (!config_.annotation.ui_dir.empty()) sc.ui_dir = resolve(config_, config_.annotation.ui_dir);
    sc.judgments_path = dir_ / artifact::judgments;
    sc.studies_dir = dir_ / "studies";
    annotation::AnnotationService service(sc);
    auto spec = acceptability_study(config_, instances, candidates);
    if (!service.study(spec.study_id)) service.add_study(std::move(spec));
    service.listen(config_.annotation.host, config_.annotation.port);
}

StageResult Pipeline::aggregate() {
    return execute(
        "aggregate", {{artifact::judgments, "annotate"}, {artifact::candidates, "generate"}}, {},
        {artifact::labels, artifact::annotation_qc}, [&] {
            auto candidates =
                jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates, entity::candidates);
            auto all = jsonl::read_records<Judgment>(dir_ / artifact::judgments, entity::judgments);
            std::vector<Judgment> judgments;
            for (auto& j : all)
                if (j.kind == JudgmentKind::acceptability) judgments.push_back(std::move(j));
            std::vector<std::string> ids;
            for (const auto& c : candidates)
                if (!c.degenerate) ids.push_back(c.candidate_id);
            const int r = config_.annotation.raters_per_item;
            auto result = annotation::aggregate_all(ids, judgments, r);
            jsonl::write_records(dir_ / artifact::labels, entity::labels, result.labels);

            json qc = json::array();
            for (const auto& a : annotation::annotator_qc(judgments))
                qc.push_back({{"annotator_id", a.annotator_id},
                              {"judgments", a.judgments},
                              {"median_ms", a.median_ms},
                              {"leave_one_out_alpha_delta", a.leave_one_out_alpha_delta
                                                                ? json(*a.leave_one_out_alpha_delta)
                                                                : json(nullptr)},
                              {"flagged", a.flagged()}});
            std::optional<double> alpha;
            try {
                alpha = annotation::krippendorff_alpha(annotation::rating_matrix(judgments), annotation::Scale::nominal)
                            .alpha;
            } catch (const PreconditionError&) {
            }
            json summary{{"annotators", qc},
                         {"alpha", alpha ? json(*alpha) : json(nullptr)},
                         {"buckets", annotation::agreement_buckets(result.labels, r)},
                         {"incomplete", result.incomplete.size()}};
            write_text(dir_ / artifact::annotation_qc, summary.dump(2) + "\n");

            std::ostringstream os;
            os << result.labels.size() << " labels; positive at 2/3: "
               << annotation::count_positive(result.labels, Threshold::at_2of3)
               << ", at 3/3: " << annotation::count_positive(result.labels, Threshold::at_3of3)
               << "; alpha " << (alpha ? fmt_pct(*alpha) : std::string("n/a"));
            if (!result.incomplete.empty()) os << "; " << result.incomplete.size() << " incomplete";
            return os.str();
        });
}

StageResult Pipeline::build_labels() {
    return execute("build-labels",
                   {{artifact::labels, "aggregate"},
                    {artifact::judgments, "annotate"},
                    {artifact::candidates, "generate"},
                    {artifact::instances, "validate"}},
                   {}, {artifact::training_set}, [&] {
                       auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
                       auto candidates = jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates,
                                                                                   entity::candidates);
                       auto labels = jsonl::read_records<AggregatedLabel>(dir_ / artifact::labels, entity::labels);
                       auto judgments = jsonl::read_records<Judgment>(dir_ / artifact::judgments, entity::judgments);
                       auto set = filter::build_training_set(instances, candidates, labels, judgments,
                                                             config_.filter.scheme, config_.filter.mode,
                                                             derive_seed(config_.seed, "build-labels"));
                       filter::save_training_set(dir_ / artifact::training_set, set);
                       std::ostringstream os;
                       os << set.examples.size() << " examples (" << filter::to_string(set.scheme) << "); train "
                          << set.positives(Split::train) << "/" << set.count(Split::train) << " positive";
                       return os.str();
                   });
}

StageResult Pipeline::train_filter() {
    if (config_.filter.backend.kind != BackendKind::builtin)
        return {"train-filter", true, "backend " + config_.filter.backend.to_string() + " needs no training"};
    return execute("train-filter", {{artifact::training_set, "build-labels"}}, {},
                   {artifact::model, artifact::train_report}, [&] {
                       auto set = filter::load_training_set(dir_ / artifact::training_set);
                       auto [model, rep] = filter::train_builtin(set, config_.filter.train);
                       model.save(dir_ / artifact::model);
                       json j{{"epochs_run", rep.epochs_run},
                              {"best_epoch", rep.best_epoch},
                              {"best_validation_loss", rep.best_validation_loss},
                              {"validation_accuracy", rep.validation_accuracy},
                              {"base_rate", rep.base_rate},
                              {"n_train", rep.n_train},
                              {"n_validation", rep.n_validation},
                              {"held_out_validation", rep.held_out_validation},
                              {"digest", model.digest()}};
                       write_text(dir_ / artifact::train_report, j.dump(2) + "\n");
                       std::ostringstream os;
                       os << "best epoch " << rep.best_epoch << " of " << rep.epochs_run << ", validation accuracy "
                          << fmt_pct(100.0 * rep.validation_accuracy) << "%";
                       return os.str();
                   });
}

StageResult Pipeline::score() {
    Inputs inputs{{artifact::candidates, "generate"}, {artifact::instances, "validate"}};
    if (config_.filter.backend.kind == BackendKind::builtin) inputs.push_back({artifact::model, "train-filter"});
    std::vector<std::string> outputs{artifact::scores};
    if (config_.filter.audit) outputs.push_back(artifact::audit);
    return execute("score", inputs, {}, outputs, [&] {
        auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
        auto candidates = jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates, entity::candidates);
        auto items = filter::make_scoring_items(candidates, instances, config_.filter.mode);
        std::unique_ptr<filter::Scorer> scorer;
        switch (config_.filter.backend.kind) {
            case BackendKind::nll: scorer = std::make_unique<filter::NllScorer>(config_.filter.nll_mean); break;
            case BackendKind::builtin:
                scorer = std::make_unique<filter::BuiltinScorer>(filter::LinearModel::load(dir_ / artifact::model));
                break;
            case BackendKind::external:
                scorer = std::make_unique<filter::ExternalScorer>(filter::ExternalScorerConfig{
                    config_.filter.backend.url, config_.filter.external_batch,
                    std::chrono::milliseconds(config_.filter.external_timeout_ms)});
                break;
        }
        auto set = scorer->score(items);
        filter::save_score_set(dir_ / artifact::scores, set);
        if (config_.filter.audit) {
            fs::remove(dir_ / artifact::audit);
            filter::write_audit_log(dir_ / artifact::audit, set.backend_id, items);
        }
        std::string s = std::to_string(set.scores.size()) + " candidates scored by " + set.backend_id;
        if (auto e = set.n_errors()) s += ", " + std::to_string(e) + " without a score";
        return s;
    });
}

StageResult Pipeline::select() {
    return execute("select", {{artifact::scores, "score"}, {artifact::candidates, "generate"}}, {},
                   {artifact::selections}, [&] {
                       auto candidates = jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates,
                                                                                   entity::candidates);
                       auto scores = filter::load_score_set(dir_ / artifact::scores);
                       auto sel = filter::select_all(candidates, scores);
                       jsonl::write_records(dir_ / artifact::selections, filter::kSelectionsEntity, sel);
                       std::size_t greedy = 0;
                       for (const auto& s : sel) greedy += s.candidate_id.ends_with("#g") ? 1 : 0;
                       return std::to_string(sel.size()) + " selections, " + std::to_string(greedy) + " greedy";
                   });
}

StageResult Pipeline::evaluate() {
    return execute("evaluate",
                   {{artifact::labels, "aggregate"},
                    {artifact::scores, "score"},
                    {artifact::candidates, "generate"},
                    {artifact::instances, "validate"},
                    {artifact::judgments, "annotate"}},
                   {}, {artifact::metrics, artifact::diagnostics}, [&] {
                       auto instances = jsonl::read_records<TaskInstance>(dir_ / artifact::instances, entity::instances);
                       auto candidates = jsonl::read_records<ExplanationCandidate>(dir_ / artifact::candidates,
                                                                                   entity::candidates);
                       auto labels = jsonl::read_records<AggregatedLabel>(dir_ / artifact::labels, entity::labels);
                       auto judgments = jsonl::read_records<Judgment>(dir_ / artifact::judgments, entity::judgments);
                       auto scores = filter::load_score_set(dir_ / artifact::scores);
                       metrics::ReportInputs in;
                       in.experiment = config_.experiment_name;
                       in.instances = instances;
                       in.candidates = candidates;
                       in.labels = labels;
                       in.judgments = judgments;
                       in.systems.push_back({"Filter (" + config_.filter.backend.to_string() + ", " +
                                                 std::string(filter::to_string(config_.filter.mode)) + ")",
                                             scores});
                       in.threshold = config_.eval.threshold;
                       in.splits = config_.eval.splits;
                       in.n_random_trials = config_.eval.n_random_trials;
                       in.permutations = config_.eval.permutations;
                       in.seed = derive_seed(config_.seed, "evaluate");
                       auto rep = metrics::build_report(in);
                       rep.provenance["dataset_hashes"] = {
                           {"instances", sha256_file(dir_ / artifact::instances)},
                           {"candidates", sha256_file(dir_ / artifact::candidates)},
                           {"labels", sha256_file(dir_ / artifact::labels)}};
                       rep.provenance["config_seed"] = config_.seed;
                       write_text(dir_ / artifact::metrics, rep.to_json().dump(2) + "\n");
                       write_text(dir_ / artifact::diagnostics, rep.diagnostics_csv());
                       const auto& sys = rep.rows[rep.rows.size() - 2];
                       std::ostringstream os;
                       os << sys.name << ":";
                       for (auto s : rep.splits)
                           os << " " << to_string(s) << " select-1 " << fmt_pct(sys.select1.at(s).value) << ", AP "
                              << fmt_pct(sys.ap.at(s).value) << ";";
                       return os.str();
                   });
}

StageResult Pipeline::report() {
    return execute("report", {{artifact::metrics, "evaluate"}}, {}, {artifact::report}, [&] {
        auto rep = metrics::MetricsReport::from_json(read_json(dir_ / artifact::metrics));
        std::ostringstream os;
        os << rep.experiment << "\n\n" << rep.render_table() << "\n";
        if (rep.agreement_alpha) os << "Krippendorff's alpha (acceptability): " << fmt_pct(*rep.agreement_alpha) << "\n";
        if (rep.nll_dominance)
            os << "Instances where a sample is more likely than greedy: " << fmt_pct(100.0 * *rep.nll_dominance)
               << "%\n";
        if (rep.n_unlabeled) os << "Unlabeled candidates counted as unacceptable: " << rep.n_unlabeled << "\n";
        for (const auto& c : rep.correlations)
            if (c.rho)
                os << "Spearman(" << c.attribute << ", acceptable) = " << fmt_pct(*c.rho) << " (p = "
                   << fmt_pct(c.p_two_sided) << ", n = " << c.n << ")\n";
        write_text(dir_ / artifact::report, os.str());
        return os.str();
    });
}

}  // namespace overgen::pipeline
