#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "organdiff/review/survey.hpp"

namespace httplib {
class Server;
}

namespace organdiff::review {

struct Request {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;
    std::string body;
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json; charset=utf-8";
    std::map<std::string, std::string> headers;
};

struct ServiceOptions {
    std::optional<std::filesystem::path> manifest;
    std::filesystem::path store = "review_labels.jsonl";
    /// Empty disables result reveal entirely.
    std::string admin_token;
    std::optional<std::filesystem::path> ui_dir;
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// Transport-independent request handling for the survey API:
///   GET  /api/objects                 [{id, index, total}] in display order
///   GET  /api/objects/{id}            {id, index, total}
///   GET  /api/objects/{id}/mesh       binary mesh, X-Content-Hash header
///   POST /api/objects/{id}/label      {choice, reviewer} -> 201 with the stored record
///   GET  /api/labels?reviewer=R       that reviewer's latest choice per item
///   GET  /api/results[?reveal=true]   summary; reveal needs X-Admin-Token or a Bearer token
/// Errors are {code, message}. Without a survey every survey route answers 409.
class ReviewService {
public:
    using Clock = std::function<std::int64_t()>;

    ReviewService(std::optional<Survey> survey, std::filesystem::path store, std::string admin_token,
                  std::optional<std::filesystem::path> ui_dir = {}, Clock clock = {});

    Response handle(const Request& req);

    const std::optional<Survey>& survey() const { return survey_; }
    SurveySummary summary() const;

private:
    Response list_objects() const;
    Response object_detail(const std::string& id) const;
    Response mesh(const std::string& id);
    Response post_label(const std::string& id, const std::string& body);
    Response reviewer_labels(const Request& req) const;
    Response results(const Request& req) const;
    Response static_file(const std::string& path) const;
    bool authorized(const Request& req) const;

    std::optional<Survey> survey_;
    LabelStore store_;
    std::string admin_token_;
    std::optional<std::filesystem::path> ui_dir_;
    Clock clock_;
    std::mutex mesh_mu_;
    std::map<std::string, std::pair<std::string, std::string>> mesh_cache_;
};

/// Routes every request of `server` through `service`.
void bind(httplib::Server& server, ReviewService& service);

/// Builds the service from `opts` and serves until the process is stopped. `on_ready`
/// runs once the socket is bound.
void serve(const ServiceOptions& opts, const std::function<void(int port)>& on_ready = {});

}  // namespace organdiff::review
