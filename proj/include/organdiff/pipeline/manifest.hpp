#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "organdiff/geometry/qa.hpp"

namespace organdiff::pipeline {

using geometry::ShapeStatus;

enum class Split { None, Train, Val, Test };

std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view text);

struct ManifestEntry {
    std::string id;
    /// Relative paths are resolved against the manifest's directory.
    std::string mesh;
    ShapeStatus qa_status = ShapeStatus::NotUsable;
    std::optional<ShapeStatus> human_status;
    Split split = Split::None;
    std::optional<std::string> mlp;
    /// Per-shape reconstruction metrics written by `fit`.
    std::optional<nlohmann::json> metrics;
    /// Reason for a QA or fit failure.
    std::optional<std::string> error;

    /// Human review wins over the automatic suggestion.
    ShapeStatus status() const { return human_status.value_or(qa_status); }
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    /// Throws DataError on duplicate or empty ids.
    void validate() const;
    ManifestEntry* find(const std::string& id);
};

nlohmann::json to_json(const Manifest& m);
/// Throws DataError naming the offending entry on unknown statuses or splits.
Manifest manifest_from_json(const nlohmann::json& j);

Manifest load_manifest(const std::filesystem::path& path);
/// Atomic write (temporary file, then rename).
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// `p` resolved against `base` unless absolute.
std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p);
/// `p` relative to `base` when possible, else absolute.
std::string relative_to(const std::filesystem::path& base, const std::filesystem::path& p);

/// Writes `text` to `path` through a temporary file and rename, creating parent directories.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace organdiff::pipeline
