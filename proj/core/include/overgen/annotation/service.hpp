#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "overgen/annotation/quality.hpp"
#include "overgen/annotation/study.hpp"

namespace overgen::annotation {

struct ServiceConfig {
    /// Bearer token required by POST /studies.
    std::string admin_token;
    /// Rater bearer token -> annotator id.
    std::map<std::string, std::string> annotator_tokens;
    /// Static UI assets served at "/"; empty disables.
    std::filesystem::path ui_dir;
    /// Every accepted judgment is appended here; empty disables persistence.
    std::filesystem::path judgments_path;
    /// Persisted study specs so a restarted service can resume; empty disables.
    std::filesystem::path studies_dir;
};

/// HTTP front end for studies:
///   POST /studies                 create (admin token)
///   GET  /studies/{id}/next       claim or re-serve a page (rater token)
///   POST /judgments               submit one judgment (rater token)
///   GET  /studies/{id}/progress   assignment counts
///   GET  /studies/{id}/agreement  Krippendorff's alpha over active judgments
///   GET  /health
class AnnotationService {
public:
    explicit AnnotationService(ServiceConfig config);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    /// Registers a study directly (bypassing HTTP).
    std::shared_ptr<Study> add_study(StudySpec spec);
    std::shared_ptr<Study> study(const std::string& id) const;
    std::shared_ptr<QualificationRegistry> qualifications() const;

    /// Binds and serves on a background thread. Port 0 picks a free port; returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace overgen::annotation
