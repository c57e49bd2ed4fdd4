#include <algorithm>
#include <cctype>

// Eigen names parameters `_res`, which <resolv.h> (pulled in by httplib) defines as a
// macro, so the library headers come first.
#include "organdiff/error.hpp"
#include "organdiff/review/service.hpp"

#include <fmt/format.h>
#include <httplib.h>

namespace organdiff::review {

namespace {

Request convert(const httplib::Request& in) {
    Request r;
    r.method = in.method;
    r.path = in.path;
    r.body = in.body;
    for (const auto& [k, v] : in.params) r.query[k] = v;
    for (const auto& [k, v] : in.headers) {
        std::string key = k;
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
        r.headers[key] = v;
    }
    return r;
}

}  // namespace

void bind(httplib::Server& server, ReviewService& service) {
    const auto handler = [&service](const httplib::Request& in, httplib::Response& out) {
        const auto r = service.handle(convert(in));
        out.status = r.status;
        for (const auto& [k, v] : r.headers) out.set_header(k, v);
        out.set_content(r.body, r.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
    server.Patch(".*", handler);
}

void serve(const ServiceOptions& opts, const std::function<void(int)>& on_ready) {
    std::optional<Survey> survey;
    if (opts.manifest) survey = load_survey(*opts.manifest);
    ReviewService service(std::move(survey), opts.store, opts.admin_token, opts.ui_dir);
    httplib::Server server;
    bind(server, service);
    int port = opts.port;
    if (port == 0) {
        port = server.bind_to_any_port(opts.host);
    } else if (!server.bind_to_port(opts.host, port)) {
        port = -1;
    }
    if (port < 0) throw UsageError(fmt::format("cannot bind {}:{}", opts.host, opts.port));
    if (on_ready) on_ready(port);
    server.listen_after_bind();
}

}  // namespace organdiff::review
