#include "organdiff/review/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>

#include <fmt/format.h>

#include "organdiff/checkpoint.hpp"
#include "organdiff/error.hpp"
#include "organdiff/geometry/mesh_io.hpp"

namespace organdiff::review {

namespace fs = std::filesystem;

namespace {

Response json_response(int status, const nlohmann::json& body) {
    Response r;
    r.status = status;
    r.body = body.dump();
    return r;
}

Response error(int status, std::string_view code, const std::string& message) {
    return json_response(status, {{"code", code}, {"message", message}});
}

Response no_survey() {
    return error(409, "no_survey", "no survey manifest is loaded; restart the service with --manifest <survey.json>");
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        const auto next = path.find('/', pos);
        const auto end = next == std::string::npos ? path.size() : next;
        if (end > pos) parts.push_back(path.substr(pos, end - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return parts;
}

std::string header(const Request& req, const std::string& lower_name) {
    const auto it = req.headers.find(lower_name);
    return it == req.headers.end() ? std::string() : it->second;
}

std::string_view mime_type(const fs::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".html") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json") return "application/json; charset=utf-8";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

ReviewService::ReviewService(std::optional<Survey> survey, fs::path store, std::string admin_token,
                             std::optional<fs::path> ui_dir, Clock clock)
    : survey_(std::move(survey)),
      store_(std::move(store)),
      admin_token_(std::move(admin_token)),
      ui_dir_(std::move(ui_dir)),
      clock_(clock ? std::move(clock) : Clock(now_ms)) {}

SurveySummary ReviewService::summary() const {
    return survey_ ? summarize(store_.snapshot(), *survey_) : SurveySummary{};
}

Response ReviewService::handle(const Request& req) {
    const auto parts = split_path(req.path);
    if (parts.empty() || parts[0] != "api") {
        if (req.method != "GET" && req.method != "HEAD") return error(405, "method_not_allowed", "only GET is served here");
        return static_file(req.path);
    }
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    try {
        if (parts.size() == 2 && parts[1] == "objects") {
            return get ? list_objects() : error(405, "method_not_allowed", "use GET");
        }
        if (parts.size() == 3 && parts[1] == "objects") {
            return get ? object_detail(parts[2]) : error(405, "method_not_allowed", "use GET");
        }
        if (parts.size() == 4 && parts[1] == "objects" && parts[3] == "mesh") {
            return get ? mesh(parts[2]) : error(405, "method_not_allowed", "use GET");
        }
        if (parts.size() == 4 && parts[1] == "objects" && parts[3] == "label") {
            return post ? post_label(parts[2], req.body) : error(405, "method_not_allowed", "use POST");
        }
        if (parts.size() == 2 && parts[1] == "labels") {
            return get ? reviewer_labels(req) : error(405, "method_not_allowed", "use GET");
        }
        if (parts.size() == 2 && parts[1] == "results") {
            return get ? results(req) : error(405, "method_not_allowed", "use GET");
        }
    } catch (const Error& e) {
        return error(500, "internal", e.what());
    }
    return error(404, "not_found", "no route for " + req.path);
}

Response ReviewService::list_objects() const {
    if (!survey_) return no_survey();
    nlohmann::json out = nlohmann::json::array();
    const auto total = survey_->items.size();
    for (std::size_t i = 0; i < total; ++i) {
        out.push_back({{"id", survey_->items[i].id}, {"index", i}, {"total", total}});
    }
    return json_response(200, out);
}

Response ReviewService::object_detail(const std::string& id) const {
    if (!survey_) return no_survey();
    const auto idx = survey_->index_of(id);
    if (!idx) return error(404, "not_found", "unknown object '" + id + "'");
    return json_response(200, {{"id", id}, {"index", *idx}, {"total", survey_->items.size()}});
}

Response ReviewService::mesh(const std::string& id) {
    if (!survey_) return no_survey();
    const auto idx = survey_->index_of(id);
    if (!idx) return error(404, "not_found", "unknown object '" + id + "'");

    std::pair<std::string, std::string> payload;
    {
        std::lock_guard lock(mesh_mu_);
        auto it = mesh_cache_.find(id);
        if (it == mesh_cache_.end()) {
            geometry::TriMesh m;
            try {
                m = geometry::load_mesh(survey_->items[*idx].mesh);
            } catch (const Error& e) {
                return error(500, "mesh_unreadable", fmt::format("object '{}': {}", id, e.what()));
            }
            auto bytes = encode_mesh(m);
            auto hash = hex64(fnv1a64(bytes));
            it = mesh_cache_.emplace(id, std::make_pair(std::move(bytes), std::move(hash))).first;
        }
        payload = it->second;
    }
    Response r;
    r.body = std::move(payload.first);
    r.content_type = "application/octet-stream";
    r.headers["X-Content-Hash"] = payload.second;
    r.headers["ETag"] = "\"" + payload.second + "\"";
    return r;
}

Response ReviewService::post_label(const std::string& id, const std::string& body) {
    if (!survey_) return no_survey();
    if (!survey_->index_of(id)) return error(404, "not_found", "unknown object '" + id + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        return error(400, "bad_request", "body must be a JSON object {choice, reviewer}");
    }
    if (!j.is_object() || !j.contains("choice") || !j["choice"].is_string()) {
        return error(400, "invalid_choice", "choice must be one of Real, Fake, NotSure");
    }
    const auto choice = parse_choice(j["choice"].get<std::string>());
    if (!choice) return error(400, "invalid_choice", "choice must be one of Real, Fake, NotSure");
    if (!j.contains("reviewer") || !j["reviewer"].is_string() || j["reviewer"].get<std::string>().empty()) {
        return error(400, "bad_request", "reviewer must be a non-empty string");
    }
    LabelRecord rec{id, j["reviewer"].get<std::string>(), *choice, clock_()};
    store_.append(rec);
    return json_response(201, to_json(rec));
}

Response ReviewService::reviewer_labels(const Request& req) const {
    if (!survey_) return no_survey();
    const auto it = req.query.find("reviewer");
    if (it == req.query.end() || it->second.empty()) return error(400, "bad_request", "reviewer query parameter required");
    std::map<std::string, LabelRecord> latest;
    for (const auto& r : store_.snapshot()) {
        if (r.reviewer == it->second && survey_->index_of(r.item)) latest[r.item] = r;
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [item, r] : latest) {
        out.push_back({{"id", item}, {"choice", choice_name(r.choice)}, {"timestamp_ms", r.timestamp_ms}});
    }
    return json_response(200, out);
}

bool ReviewService::authorized(const Request& req) const {
    if (admin_token_.empty()) return false;
    return header(req, "x-admin-token") == admin_token_ || header(req, "authorization") == "Bearer " + admin_token_;
}

Response ReviewService::results(const Request& req) const {
    if (!survey_) return no_survey();
    const auto it = req.query.find("reveal");
    const bool reveal = it != req.query.end() && (it->second == "true" || it->second == "1");
    if (reveal && !authorized(req)) return error(403, "forbidden", "reveal requires the admin token");
    return json_response(200, to_json(summary(), reveal));
}

Response ReviewService::static_file(const std::string& path) const {
    if (!ui_dir_) return error(404, "not_found", "no UI directory configured");
    const fs::path rel = fs::path(path == "/" || path.empty() ? "index.html" : path.substr(1)).lexically_normal();
    if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") return error(404, "not_found", "not found");
    const fs::path full = *ui_dir_ / rel;
    std::ifstream f(full, std::ios::binary);
    if (!f || fs::is_directory(full)) return error(404, "not_found", "not found");
    Response r;
    r.body.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    r.content_type = std::string(mime_type(full));
    return r;
}

}  // namespace organdiff::review
