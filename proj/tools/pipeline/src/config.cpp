#include "overgen/pipeline/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <toml++/toml.hpp>

#include "overgen/hashing.hpp"

namespace overgen::pipeline {

using nlohmann::json;

BackendSpec BackendSpec::parse(std::string_view text) {
    if (text == "nll") return {BackendKind::nll, {}};
    if (text == "builtin") return {BackendKind::builtin, {}};
    constexpr std::string_view prefix = "external:";
    if (text.starts_with(prefix) && text.size() > prefix.size())
        return {BackendKind::external, std::string(text.substr(prefix.size()))};
    throw ConfigError("unknown filter backend '" + std::string(text) + "' (nll, builtin or external:<url>)");
}

std::string BackendSpec::to_string() const {
    switch (kind) {
        case BackendKind::nll: return "nll";
        case BackendKind::builtin: return "builtin";
        case BackendKind::external: return "external:" + url;
    }
    return {};
}

namespace {

class Table {
public:
    Table(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

    bool present() const { return t_ != nullptr; }

    void allow(std::initializer_list<std::string_view> keys) const {
        if (!t_) return;
        std::set<std::string_view> ok(keys);
        for (const auto& [k, v] : *t_)
            if (!ok.count(k.str())) throw ConfigError("unknown key '" + where(k.str()) + "'");
    }

    template <class T>
    void get(std::string_view key, T& out) const {
        if (!t_) return;
        const auto* node = t_->get(key);
        if (!node) return;
        if constexpr (std::is_same_v<T, bool>) {
            auto v = node->value<bool>();
            if (!v) throw ConfigError(where(key) + " must be a boolean");
            out = *v;
        } else if constexpr (std::is_integral_v<T>) {
            auto v = node->value<std::int64_t>();
            if (!v) throw ConfigError(where(key) + " must be an integer");
            if (*v < 0 && std::is_unsigned_v<T>) throw ConfigError(where(key) + " must be non-negative");
            out = static_cast<T>(*v);
        } else if constexpr (std::is_floating_point_v<T>) {
            auto v = node->value<double>();
            if (!v) throw ConfigError(where(key) + " must be a number");
            out = *v;
        } else {
            auto v = node->value<std::string>();
            if (!v) throw ConfigError(where(key) + " must be a string");
            out = *v;
        }
    }

    std::optional<std::string> str(std::string_view key) const {
        std::optional<std::string> out;
        if (t_ && t_->get(key)) {
            std::string s;
            get(key, s);
            out = s;
        }
        return out;
    }

    template <class T>
    std::optional<std::vector<T>> list(std::string_view key) const {
        if (!t_) return std::nullopt;
        const auto* node = t_->get(key);
        if (!node) return std::nullopt;
        const auto* arr = node->as_array();
        if (!arr) throw ConfigError(where(key) + " must be an array");
        std::vector<T> out;
        for (const auto& e : *arr) {
            auto v = e.value<T>();
            if (!v) throw ConfigError(where(key) + " has an element of the wrong type");
            out.push_back(*v);
        }
        return out;
    }

    Table sub(std::string_view key) const {
        if (!t_) return {nullptr, name_ + "." + std::string(key)};
        const auto* node = t_->get(key);
        if (node && !node->is_table()) throw ConfigError(where(key) + " must be a table");
        return {node ? node->as_table() : nullptr, name_.empty() ? std::string(key) : name_ + "." + std::string(key)};
    }

    const toml::table* raw() const { return t_; }

    std::string where(std::string_view key) const {
        return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
    }

private:
    const toml::table* t_;
    std::string name_;
};

template <class F>
auto convert(const Table& t, std::string_view key, F&& f) {
    try {
        return f();
    } catch (const PreconditionError& e) {
        throw ConfigError(t.where(key) + ": " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
    toml::table doc;
    try {
        doc = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: " << e.description() << " at line " << e.source().begin.line << ", column "
           << e.source().begin.column;
        throw ConfigError(os.str());
    }

    RunConfig cfg;
    cfg.base_dir = base_dir;
    const Table root(&doc, "");
    root.allow({"experiment", "seed", "data", "prompt", "generation", "endpoint", "annotation", "filter", "eval"});
    root.get("experiment", cfg.experiment_name);
    std::int64_t seed = 0;
    root.get("seed", seed);

    const auto data = root.sub("data");
    data.allow({"task", "corpus", "corpus_format", "prompt_pool", "pool_format"});
    if (auto v = data.str("task")) cfg.data.task = convert(data, "task", [&] { return parse_task(*v); });
    if (auto v = data.str("corpus")) cfg.data.corpus = *v;
    if (auto v = data.str("corpus_format"))
        cfg.data.corpus_format = convert(data, "corpus_format", [&] { return parse_corpus_format(*v); });
    if (auto v = data.str("prompt_pool")) cfg.data.prompt_pool = *v;
    if (auto v = data.str("pool_format"))
        cfg.data.pool_format = convert(data, "pool_format", [&] { return parse_corpus_format(*v); });

    cfg.prompt = prompt::PromptConfig::defaults_for(cfg.data.task);
    cfg.prompt_template = std::string(prompt::to_string(cfg.prompt.template_id));
    const auto pr = root.sub("prompt");
    pr.allow({"k_choices", "token_budget", "completion_reserve", "template", "shuffle_choices", "label_balance",
              "max_resamples"});
    if (auto v = pr.list<std::int64_t>("k_choices")) {
        cfg.prompt.k_choices.clear();
        for (auto k : *v) cfg.prompt.k_choices.push_back(static_cast<int>(k));
    }
    pr.get("token_budget", cfg.prompt.token_budget);
    pr.get("completion_reserve", cfg.prompt.completion_reserve);
    pr.get("shuffle_choices", cfg.prompt.shuffle_choices);
    pr.get("label_balance", cfg.prompt.label_balance);
    pr.get("max_resamples", cfg.prompt.max_resamples);
    if (auto v = pr.str("template")) {
        cfg.prompt_template = *v;
        if (v->ends_with(".tmpl")) {
            auto path = std::filesystem::path(*v);
            if (path.is_relative()) path = base_dir / path;
            try {
                cfg.prompt.template_override =
                    std::make_shared<const prompt::PromptTemplate>(prompt::PromptTemplate::load(path));
            } catch (const Error& e) {
                throw ConfigError("prompt.template: " + std::string(e.what()));
            }
        } else {
            cfg.prompt.template_id = convert(pr, "template", [&] { return prompt::parse_template_id(*v); });
        }
    }

    const auto g = root.sub("generation");
    g.allow({"n_sampled", "temperature", "max_tokens", "parallelism", "requests_per_second"});
    g.get("n_sampled", cfg.generation.n_sampled);
    g.get("temperature", cfg.generation.temperature);
    g.get("max_tokens", cfg.generation.max_tokens);
    g.get("parallelism", cfg.generation.parallelism);
    g.get("requests_per_second", cfg.generation.requests_per_second);
    cfg.generation.run_id = cfg.experiment_name;
    cfg.prompt.completion_reserve = std::max(cfg.prompt.completion_reserve, 0);

    const auto ep = root.sub("endpoint");
    ep.allow({"kind", "base_url", "model", "api_key_env", "timeout_ms", "cache"});
    ep.get("kind", cfg.endpoint.kind);
    ep.get("base_url", cfg.endpoint.base_url);
    ep.get("model", cfg.endpoint.model);
    ep.get("api_key_env", cfg.endpoint.api_key_env);
    ep.get("timeout_ms", cfg.endpoint.timeout_ms);
    ep.get("cache", cfg.endpoint.cache);
    if (cfg.endpoint.kind != "mock" && cfg.endpoint.kind != "http")
        throw ConfigError("endpoint.kind must be \"mock\" or \"http\"");

    const auto an = root.sub("annotation");
    an.allow({"raters_per_item", "batch_size", "host", "port", "ui_dir", "admin_token_env", "tokens", "planted_marker",
              "synthetic_annotators", "synthetic_error_rate"});
    an.get("raters_per_item", cfg.annotation.raters_per_item);
    an.get("batch_size", cfg.annotation.batch_size);
    an.get("host", cfg.annotation.host);
    an.get("port", cfg.annotation.port);
    if (auto v = an.str("ui_dir")) cfg.annotation.ui_dir = *v;
    an.get("admin_token_env", cfg.annotation.admin_token_env);
    an.get("planted_marker", cfg.annotation.planted_marker);
    an.get("synthetic_annotators", cfg.annotation.synthetic_annotators);
    an.get("synthetic_error_rate", cfg.annotation.synthetic_error_rate);
    if (const auto tokens = an.sub("tokens"); tokens.present())
        for (const auto& [k, v] : *tokens.raw()) {
            auto id = v.value<std::string>();
            if (!id) throw ConfigError("annotation.tokens values must be annotator ids");
            cfg.annotation.annotator_tokens[std::string(k.str())] = *id;
        }

    const auto f = root.sub("filter");
    f.allow({"backend", "mode", "label_scheme", "nll_mean", "audit", "external_batch", "external_timeout_ms", "train"});
    if (auto v = f.str("backend")) cfg.filter.backend = BackendSpec::parse(*v);
    if (auto v = f.str("mode")) cfg.filter.mode = convert(f, "mode", [&] { return filter::parse_filter_mode(*v); });
    if (auto v = f.str("label_scheme"))
        cfg.filter.scheme = convert(f, "label_scheme", [&] { return filter::parse_label_scheme(*v); });
    f.get("nll_mean", cfg.filter.nll_mean);
    f.get("audit", cfg.filter.audit);
    f.get("external_batch", cfg.filter.external_batch);
    f.get("external_timeout_ms", cfg.filter.external_timeout_ms);
    const auto tr = f.sub("train");
    tr.allow({"learning_rate", "l2", "max_epochs", "patience", "validation_fraction", "dim_log2"});
    tr.get("learning_rate", cfg.filter.train.learning_rate);
    tr.get("l2", cfg.filter.train.l2);
    tr.get("max_epochs", cfg.filter.train.max_epochs);
    tr.get("patience", cfg.filter.train.patience);
    tr.get("validation_fraction", cfg.filter.train.validation_fraction);
    tr.get("dim_log2", cfg.filter.train.features.dim_log2);

    const auto ev = root.sub("eval");
    ev.allow({"threshold", "n_random_trials", "permutations", "splits"});
    if (auto v = ev.str("threshold"))
        cfg.eval.threshold = convert(ev, "threshold", [&] { return parse_threshold(*v); });
    ev.get("n_random_trials", cfg.eval.n_random_trials);
    ev.get("permutations", cfg.eval.permutations);
    if (auto v = ev.list<std::string>("splits"))
        for (const auto& s : *v) cfg.eval.splits.push_back(convert(ev, "splits", [&] { return parse_split(s); }));

    cfg.set_seed(static_cast<std::uint64_t>(seed));

    if (cfg.generation.n_sampled < 0 || cfg.generation.max_tokens <= 0 || cfg.generation.parallelism <= 0)
        throw ConfigError("generation: n_sampled >= 0, max_tokens > 0 and parallelism > 0 are required");
    if (cfg.annotation.raters_per_item < 1 || cfg.annotation.batch_size < 1)
        throw ConfigError("annotation: raters_per_item and batch_size must be positive");
    if (cfg.eval.n_random_trials < 2) throw ConfigError("eval.n_random_trials must be at least 2");
    if (cfg.filter.train.features.dim_log2 < 1 || cfg.filter.train.features.dim_log2 > 30)
        throw ConfigError("filter.train.dim_log2 must be in [1, 30]");
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    auto base = path.parent_path();
    return parse(ss.str(), base.empty() ? std::filesystem::path(".") : base);
}

void RunConfig::set_seed(std::uint64_t s) {
    seed = s;
    prompt.rng_seed = derive_seed(s, "prompt");
    filter.train.seed = derive_seed(s, "filter");
}

void RunConfig::validate() const {
    auto check = [&](const std::filesystem::path& p, std::string_view key) {
        if (p.empty()) throw ConfigError(std::string(key) + " is not set");
        auto full = p.is_relative() ? base_dir / p : p;
        if (!std::filesystem::exists(full)) throw ConfigError(std::string(key) + ": no such file " + full.string());
    };
    check(data.corpus, "data.corpus");
    check(data.prompt_pool, "data.prompt_pool");
    if (!annotation.ui_dir.empty()) check(annotation.ui_dir, "annotation.ui_dir");
    if (prompt.k_choices.empty()) throw ConfigError("prompt.k_choices is empty");
}

json RunConfig::stage_settings(std::string_view stage) const {
    json j{{"seed", seed}};
    if (stage == "validate") {
        j["data"] = to_json()["data"];
    } else if (stage == "prompts" || stage == "predict-labels") {
        j["prompt"] = to_json()["prompt"];
        j["endpoint"] = to_json()["endpoint"];
    } else if (stage == "generate") {
        j["prompt"] = to_json()["prompt"];
        j["generation"] = to_json()["generation"];
        j["endpoint"] = to_json()["endpoint"];
    } else if (stage == "annotate" || stage == "aggregate") {
        j["annotation"] = to_json()["annotation"];
    } else if (stage == "build-labels") {
        j["filter"] = {{"mode", filter::to_string(filter.mode)}, {"label_scheme", filter::to_string(filter.scheme)}};
    } else if (stage == "train-filter" || stage == "score" || stage == "select") {
        j["filter"] = to_json()["filter"];
    } else if (stage == "evaluate" || stage == "report") {
        j["filter"] = to_json()["filter"];
        j["eval"] = to_json()["eval"];
    } else {
        j = to_json();
    }
    return j;
}

json RunConfig::to_json() const {
    json j;
    j["experiment"] = experiment_name;
    j["seed"] = seed;
    j["data"] = {{"task", overgen::to_string(data.task)},
                 {"corpus", data.corpus.generic_string()},
                 {"corpus_format", data.corpus_format == CorpusFormat::jsonl ? "jsonl" : "csv"},
                 {"prompt_pool", data.prompt_pool.generic_string()},
                 {"pool_format", data.pool_format == CorpusFormat::jsonl ? "jsonl" : "csv"}};
    j["prompt"] = {{"k_choices", prompt.k_choices},
                   {"token_budget", prompt.token_budget},
                   {"completion_reserve", prompt.completion_reserve},
                   {"template", prompt_template},
                   {"shuffle_choices", prompt.shuffle_choices},
                   {"label_balance", prompt.label_balance},
                   {"max_resamples", prompt.max_resamples}};
    j["generation"] = {{"n_sampled", generation.n_sampled},
                       {"temperature", generation.temperature},
                       {"max_tokens", generation.max_tokens}};
    j["endpoint"] = {{"kind", endpoint.kind}, {"base_url", endpoint.base_url}, {"model", endpoint.model}};
    j["annotation"] = {{"raters_per_item", annotation.raters_per_item},
                       {"batch_size", annotation.batch_size},
                       {"planted_marker", annotation.planted_marker},
                       {"synthetic_annotators", annotation.synthetic_annotators},
                       {"synthetic_error_rate", annotation.synthetic_error_rate}};
    j["filter"] = {{"backend", filter.backend.to_string()},
                   {"mode", filter::to_string(filter.mode)},
                   {"label_scheme", filter::to_string(filter.scheme)},
                   {"nll_mean", filter.nll_mean},
                   {"train",
                    {{"learning_rate", filter.train.learning_rate},
                     {"l2", filter.train.l2},
                     {"max_epochs", filter.train.max_epochs},
                     {"patience", filter.train.patience},
                     {"validation_fraction", filter.train.validation_fraction},
                     {"dim_log2", filter.train.features.dim_log2}}}};
    j["eval"] = {{"threshold", overgen::to_string(eval.threshold)},
                 {"n_random_trials", eval.n_random_trials},
                 {"permutations", eval.permutations}};
    j["eval"]["splits"] = json::array();
    for (auto s : eval.splits) j["eval"]["splits"].push_back(overgen::to_string(s));
    return j;
}

}  // namespace overgen::pipeline
