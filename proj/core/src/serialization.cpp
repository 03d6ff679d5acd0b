#include "overgen/serialization.hpp"

#include <system_error>

#include "overgen/error.hpp"

namespace overgen {

using nlohmann::json;

void to_json(json& j, const TaskInstance& v) {
    j = json{{"id", v.id}, {"task", to_string(v.task)}, {"gold_label", v.gold_label}, {"split", to_string(v.split)}};
    if (v.task == Task::mcqa) {
        j["question"] = v.question;
        j["choices"] = v.choices;
    } else {
        j["premise"] = v.premise;
        j["hypothesis"] = v.hypothesis;
    }
}

void from_json(const json& j, TaskInstance& v) {
    v = TaskInstance{};
    j.at("id").get_to(v.id);
    v.task = parse_task(j.at("task").get<std::string>());
    j.at("gold_label").get_to(v.gold_label);
    v.split = parse_split(j.value("split", std::string("train")));
    if (v.task == Task::mcqa) {
        j.at("question").get_to(v.question);
        j.at("choices").get_to(v.choices);
    } else {
        j.at("premise").get_to(v.premise);
        j.at("hypothesis").get_to(v.hypothesis);
    }
}

void to_json(json& j, const PromptExample& v) {
    j = json(v.instance);
    j["explanation"] = v.explanation;
}

void from_json(const json& j, PromptExample& v) {
    v.instance = j.get<TaskInstance>();
    j.at("explanation").get_to(v.explanation);
}

void to_json(json& j, const ExplanationCandidate& v) {
    j = json{{"candidate_id", v.candidate_id},
             {"instance_id", v.instance_id},
             {"text", v.text},
             {"decode", v.decode.to_string()},
             {"token_logprobs", v.token_logprobs},
             {"total_logprob", v.total_logprob},
             {"prompt_fingerprint", v.prompt_fingerprint},
             {"degenerate", v.degenerate}};
}

void from_json(const json& j, ExplanationCandidate& v) {
    j.at("candidate_id").get_to(v.candidate_id);
    j.at("instance_id").get_to(v.instance_id);
    j.at("text").get_to(v.text);
    v.decode = Decode::parse(j.at("decode").get<std::string>());
    j.at("token_logprobs").get_to(v.token_logprobs);
    j.at("total_logprob").get_to(v.total_logprob);
    j.at("prompt_fingerprint").get_to(v.prompt_fingerprint);
    v.degenerate = j.value("degenerate", false);
}

void to_json(json& j, const AbsolutePayload& v) {
    j = json{{"factuality", to_string(v.factuality)},
             {"grammar", v.grammar},
             {"new_info", v.new_info},
             {"acceptable", v.acceptable}};
    if (v.supports_label) j["supports_label"] = *v.supports_label;
    if (v.amount_info) j["amount_info"] = to_string(*v.amount_info);
}

void from_json(const json& j, AbsolutePayload& v) {
    v = AbsolutePayload{};
    v.factuality = parse_factuality(j.at("factuality").get<std::string>());
    j.at("grammar").get_to(v.grammar);
    j.at("new_info").get_to(v.new_info);
    j.at("acceptable").get_to(v.acceptable);
    if (auto it = j.find("supports_label"); it != j.end() && !it->is_null()) v.supports_label = it->get<bool>();
    if (auto it = j.find("amount_info"); it != j.end() && !it->is_null())
        v.amount_info = parse_amount_info(it->get<std::string>());
}

void to_json(json& j, const HeadToHeadPayload& v) {
    j = json{{"choice", to_string(v.choice)}, {"left_source", v.left_source}, {"right_source", v.right_source}};
}

void from_json(const json& j, HeadToHeadPayload& v) {
    v.choice = parse_head_to_head_choice(j.at("choice").get<std::string>());
    v.left_source = j.value("left_source", std::string());
    v.right_source = j.value("right_source", std::string());
}

json payload_to_json(const JudgmentPayload& payload) {
    return std::visit(
        [](const auto& p) -> json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, AcceptabilityPayload>) {
                return json{{"accept", p.accept}};
            } else {
                return json(p);
            }
        },
        payload);
}

JudgmentPayload payload_from_json(JudgmentKind kind, const json& j) {
    switch (kind) {
    case JudgmentKind::acceptability: return AcceptabilityPayload{j.at("accept").get<bool>()};
    case JudgmentKind::head_to_head: return j.get<HeadToHeadPayload>();
    case JudgmentKind::absolute: return j.get<AbsolutePayload>();
    }
    throw PreconditionError("unknown judgment kind");
}

void to_json(json& j, const Judgment& v) {
    j = json{{"judgment_id", v.judgment_id},
             {"study_id", v.study_id},
             {"annotator_id", v.annotator_id},
             {"subject_id", v.subject_id},
             {"kind", to_string(v.kind)},
             {"payload", payload_to_json(v.payload)},
             {"elapsed_ms", v.elapsed_ms},
             {"created_at_ms", v.created_at_ms},
             {"excluded", v.excluded}};
}

void from_json(const json& j, Judgment& v) {
    j.at("judgment_id").get_to(v.judgment_id);
    v.study_id = j.value("study_id", std::string());
    j.at("annotator_id").get_to(v.annotator_id);
    j.at("subject_id").get_to(v.subject_id);
    v.kind = parse_judgment_kind(j.at("kind").get<std::string>());
    v.payload = payload_from_json(v.kind, j.at("payload"));
    j.at("elapsed_ms").get_to(v.elapsed_ms);
    v.created_at_ms = j.value("created_at_ms", std::int64_t{0});
    v.excluded = j.value("excluded", false);
}

void to_json(json& j, const AggregatedLabel& v) {
    j = json{{"candidate_id", v.candidate_id},
             {"n_raters", v.n_raters},
             {"n_accept", v.n_accept},
             {"label_3of3", v.label_3of3},
             {"label_2of3", v.label_2of3}};
}

void from_json(const json& j, AggregatedLabel& v) {
    j.at("candidate_id").get_to(v.candidate_id);
    j.at("n_raters").get_to(v.n_raters);
    j.at("n_accept").get_to(v.n_accept);
    j.at("label_3of3").get_to(v.label_3of3);
    j.at("label_2of3").get_to(v.label_2of3);
}

namespace jsonl {

json header(std::string_view entity) {
    return json{{"schema_version", kSchemaVersion}, {"entity", entity}};
}

void write(const std::filesystem::path& path, std::string_view entity, std::span<const json> rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << header(entity).dump() << '\n';
        for (const auto& row : rows) out << row.dump() << '\n';
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

namespace {

void check_header(const std::string& path, const std::string& line, std::string_view entity) {
    json head;
    try {
        head = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(path, 1, std::string("bad header: ") + e.what());
    }
    if (!head.is_object() || !head.contains("schema_version"))
        throw SchemaVersionError(path + ": missing schema_version header");
    if (!head["schema_version"].is_number_integer() || head["schema_version"].get<int>() != kSchemaVersion)
        throw SchemaVersionError(path + ": unsupported schema_version " + head["schema_version"].dump());
    if (head.value("entity", std::string()) != entity)
        throw SchemaVersionError(path + ": expected entity '" + std::string(entity) + "', found " +
                                 head.value("entity", std::string("<none>")));
}

}  // namespace

std::vector<json> read(const std::filesystem::path& path, std::string_view entity) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaVersionError(path.string() + ": empty file, no header");
    check_header(path.string(), line, entity);
    std::vector<json> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    return rows;
}

Appender::Appender(const std::filesystem::path& path, std::string_view entity) {
    bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (!fresh) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        check_header(path.string(), line, entity);
    } else if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot append to '" + path.string() + "'");
    if (fresh) out_ << header(entity).dump() << '\n' << std::flush;
}

void Appender::append(const json& row) {
    std::lock_guard lock(mutex_);
    out_ << row.dump() << '\n' << std::flush;
    if (!out_) throw IoError("append failed");
}

}  // namespace jsonl
}  // namespace overgen
