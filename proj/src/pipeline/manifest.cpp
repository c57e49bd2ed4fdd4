#include "organdiff/pipeline/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "organdiff/error.hpp"

namespace organdiff::pipeline {

namespace fs = std::filesystem;

std::string_view split_name(Split s) {
    switch (s) {
        case Split::None: return "none";
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "none";
}

std::optional<Split> parse_split(std::string_view text) {
    for (auto s : {Split::None, Split::Train, Split::Val, Split::Test}) {
        if (text == split_name(s)) return s;
    }
    return std::nullopt;
}

void Manifest::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.id.empty()) throw DataError("manifest entry with an empty id");
        if (!seen.insert(e.id).second) throw DataError("duplicate manifest id '" + e.id + "'");
    }
}

ManifestEntry* Manifest::find(const std::string& id) {
    for (auto& e : entries) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

nlohmann::json to_json(const Manifest& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json j{{"id", e.id},
                         {"mesh", e.mesh},
                         {"qa_status", geometry::status_id(e.qa_status)},
                         {"split", split_name(e.split)}};
        if (e.human_status) j["human_status"] = geometry::status_id(*e.human_status);
        if (e.mlp) j["mlp"] = *e.mlp;
        if (e.metrics) j["metrics"] = *e.metrics;
        if (e.error) j["error"] = *e.error;
        entries.push_back(std::move(j));
    }
    return {{"entries", std::move(entries)}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    try {
        for (const auto& item : j.at("entries")) {
            ManifestEntry e;
            e.id = item.at("id").get<std::string>();
            e.mesh = item.at("mesh").get<std::string>();
            const auto qa = item.at("qa_status").get<std::string>();
            const auto status = geometry::parse_status(qa);
            if (!status) throw DataError(fmt::format("entry '{}': unknown qa_status '{}'", e.id, qa));
            e.qa_status = *status;
            if (item.contains("human_status") && !item["human_status"].is_null()) {
                const auto h = item["human_status"].get<std::string>();
                const auto hs = geometry::parse_status(h);
                if (!hs) throw DataError(fmt::format("entry '{}': unknown human_status '{}'", e.id, h));
                e.human_status = *hs;
            }
            const auto sp = item.value("split", std::string("none"));
            const auto split = parse_split(sp);
            if (!split) throw DataError(fmt::format("entry '{}': unknown split '{}'", e.id, sp));
            e.split = *split;
            if (item.contains("mlp") && !item["mlp"].is_null()) e.mlp = item["mlp"].get<std::string>();
            if (item.contains("metrics") && !item["metrics"].is_null()) e.metrics = item["metrics"];
            if (item.contains("error") && !item["error"].is_null()) e.error = item["error"].get<std::string>();
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        f << text;
        f.flush();
        if (!f) throw DataError("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

void save_manifest(const Manifest& m, const fs::path& path) {
    m.validate();
    write_text_atomic(path, to_json(m).dump(2) + "\n");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
}

std::string relative_to(const fs::path& base, const fs::path& p) {
    const fs::path abs_base = fs::absolute(base).lexically_normal();
    const fs::path abs_p = fs::absolute(p).lexically_normal();
    const fs::path rel = abs_p.lexically_relative(abs_base);
    return rel.empty() ? abs_p.string() : rel.generic_string();
}

}  // namespace organdiff::pipeline
