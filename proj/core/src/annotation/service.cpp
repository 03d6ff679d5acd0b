#include "overgen/annotation/service.hpp"

#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "overgen/serialization.hpp"

namespace overgen::annotation {

using nlohmann::json;

struct AnnotationService::Impl {
    ServiceConfig config;
    httplib::Server server;
    std::shared_ptr<QualificationRegistry> registry = std::make_shared<QualificationRegistry>();
    mutable std::shared_mutex studies_mutex;
    std::map<std::string, std::shared_ptr<Study>> studies;
    std::unique_ptr<jsonl::Appender> judgments_out;
    std::jthread thread;

    std::shared_ptr<Study> find(const std::string& id) const {
        std::shared_lock lock(studies_mutex);
        auto it = studies.find(id);
        return it == studies.end() ? nullptr : it->second;
    }

    std::shared_ptr<Study> add(StudySpec spec) {
        std::unique_lock lock(studies_mutex);
        if (studies.count(spec.study_id)) throw DuplicateIdError(spec.study_id);
        auto study = std::make_shared<Study>(std::move(spec), registry);
        studies[study->id()] = study;
        return study;
    }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void fail(httplib::Response& res, int status, std::string_view code, const std::string& message) {
        reply(res, status, json{{"error", code}, {"message", message}});
    }

    static std::optional<std::string> bearer(const httplib::Request& req) {
        auto header = req.get_header_value("Authorization");
        constexpr std::string_view prefix = "Bearer ";
        if (!header.starts_with(prefix)) return std::nullopt;
        return header.substr(prefix.size());
    }

    std::optional<std::string> annotator(const httplib::Request& req) const {
        auto token = bearer(req);
        if (!token) return std::nullopt;
        auto it = config.annotator_tokens.find(*token);
        if (it == config.annotator_tokens.end()) return std::nullopt;
        return it->second;
    }

    void restore_state() {
        if (!config.studies_dir.empty() && std::filesystem::exists(config.studies_dir)) {
            for (const auto& entry : std::filesystem::directory_iterator(config.studies_dir)) {
                if (entry.path().extension() != ".json") continue;
                std::ifstream in(entry.path());
                add(json::parse(in).get<StudySpec>());
            }
        }
        if (!config.judgments_path.empty() && std::filesystem::exists(config.judgments_path)) {
            for (const auto& j : jsonl::read_records<Judgment>(config.judgments_path, entity::judgments)) {
                if (auto s = find(j.study_id)) s->restore(j);
            }
        }
        if (!config.judgments_path.empty())
            judgments_out = std::make_unique<jsonl::Appender>(config.judgments_path, entity::judgments);
    }

    void persist_spec(const StudySpec& spec) {
        if (config.studies_dir.empty()) return;
        std::filesystem::create_directories(config.studies_dir);
        std::ofstream out(config.studies_dir / (spec.study_id + ".json"));
        out << json(spec).dump();
    }

    void routes() {
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, json{{"status", "ok"}}); });

        server.Post("/studies", [this](const httplib::Request& req, httplib::Response& res) {
            auto token = bearer(req);
            if (config.admin_token.empty() || !token || *token != config.admin_token)
                return fail(res, 401, "unauthorized", "admin token required");
            try {
                auto spec = json::parse(req.body).get<StudySpec>();
                auto study = add(spec);
                persist_spec(spec);
                auto p = study->progress();
                reply(res, 201, json{{"study_id", study->id()}, {"pages", p.pages}, {"assignments", p.assignments}});
            } catch (const DuplicateIdError& e) {
                fail(res, 409, "duplicate_study", e.what());
            } catch (const json::exception& e) {
                fail(res, 400, "bad_request", e.what());
            } catch (const Error& e) {
                fail(res, 400, "bad_request", e.what());
            }
        });

        server.Get("/studies/:id/next", [this](const httplib::Request& req, httplib::Response& res) {
            auto who = annotator(req);
            if (!who) return fail(res, 401, "unauthorized", "rater token required");
            auto study = find(req.path_params.at("id"));
            if (!study) return fail(res, 404, "unknown_study", "no such study");
            auto page = study->claim(*who);
            if (!page) return reply(res, 200, json{{"page", nullptr}});
            reply(res, 200, json{{"page", study->page_payload(*page)}});
        });

        server.Post("/judgments", [this](const httplib::Request& req, httplib::Response& res) {
            auto who = annotator(req);
            if (!who) return fail(res, 401, "unauthorized", "rater token required");
            try {
                auto body = json::parse(req.body);
                auto study = find(body.at("study_id").get<std::string>());
                if (!study) return fail(res, 404, "unknown_study", "no such study");
                auto kind = judgment_kind_for(study->spec().kind);
                auto payload = payload_from_json(kind, body.at("payload"));
                auto stored = study->record(*who, body.at("subject_id").get<std::string>(), std::move(payload),
                                            body.value("elapsed_ms", std::int64_t{0}));
                if (judgments_out) judgments_out->append(json(stored));
                reply(res, 201, json(stored));
            } catch (const UnqualifiedError& e) {
                fail(res, 403, "unqualified", e.what());
            } catch (const DuplicateJudgmentError& e) {
                fail(res, 409, "duplicate", e.what());
            } catch (const AssignmentError& e) {
                fail(res, 409, "no_assignment", e.what());
            } catch (const FlowViolationError& e) {
                fail(res, 422, "flow_violation", e.what());
            } catch (const json::exception& e) {
                fail(res, 400, "bad_request", e.what());
            } catch (const Error& e) {
                fail(res, 400, "bad_request", e.what());
            }
        });

        server.Get("/studies/:id/progress", [this](const httplib::Request& req, httplib::Response& res) {
            auto study = find(req.path_params.at("id"));
            if (!study) return fail(res, 404, "unknown_study", "no such study");
            auto p = study->progress();
            auto close = study->close_out();
            reply(res, 200, json{{"study_id", study->id()},
                                 {"pages", p.pages},
                                 {"assignments", p.assignments},
                                 {"committed", p.committed},
                                 {"leased", p.leased},
                                 {"pending", p.pending},
                                 {"complete", close.complete()}});
        });

        server.Get("/studies/:id/agreement", [this](const httplib::Request& req, httplib::Response& res) {
            auto study = find(req.path_params.at("id"));
            if (!study) return fail(res, 404, "unknown_study", "no such study");
            auto judgments = study->active_judgments();
            try {
                auto report = krippendorff_alpha(rating_matrix(judgments), Scale::nominal);
                reply(res, 200, json{{"alpha", report.alpha ? json(*report.alpha) : json(nullptr)},
                                     {"n_items", report.n_items},
                                     {"n_raters", report.n_raters},
                                     {"scale", to_string(report.scale)}});
            } catch (const PreconditionError& e) {
                fail(res, 422, "insufficient_data", e.what());
            }
        });

        if (!config.ui_dir.empty() && std::filesystem::exists(config.ui_dir)) {
            server.set_mount_point("/", config.ui_dir.string());
        }
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                fail(res, 500, "internal", e.what());
            }
        });
    }
};

AnnotationService::AnnotationService(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
    impl_->restore_state();
    impl_->routes();
}

AnnotationService::~AnnotationService() { stop(); }

std::shared_ptr<Study> AnnotationService::add_study(StudySpec spec) {
    impl_->persist_spec(spec);
    return impl_->add(std::move(spec));
}

std::shared_ptr<Study> AnnotationService::study(const std::string& id) const { return impl_->find(id); }

std::shared_ptr<QualificationRegistry> AnnotationService::qualifications() const { return impl_->registry; }

int AnnotationService::start(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::jthread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    spdlog::info("annotation service listening on {}:{}", host, bound);
    return bound;
}

void AnnotationService::listen(const std::string& host, int port) {
    spdlog::info("annotation service listening on {}:{}", host, port);
    if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace overgen::annotation
