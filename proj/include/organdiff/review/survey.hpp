#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::review {

enum class Choice { Real, Fake, NotSure };
inline constexpr std::array<Choice, 3> kAllChoices = {Choice::Real, Choice::Fake, Choice::NotSure};

std::string_view choice_name(Choice c);
/// Exactly "Real", "Fake" or "NotSure".
std::optional<Choice> parse_choice(std::string_view text);

enum class GroundTruth { Real, Synthetic };
std::string_view ground_truth_name(GroundTruth g);

struct ReviewItem {
    std::string id;
    std::filesystem::path mesh;
    GroundTruth ground_truth = GroundTruth::Real;
};

/// Items in display order, which is a permutation of the manifest order drawn from the
/// survey seed, so every reviewer sees the same sequence.
struct Survey {
    std::uint64_t seed = 0;
    std::vector<ReviewItem> items;

    /// Display index of `id`, if present.
    std::optional<std::size_t> index_of(std::string_view id) const;
};

/// {seed, items: [{id, mesh, ground_truth: "real" | "synthetic"}]}; relative mesh paths are
/// resolved against `base`. DataError on duplicate ids or unknown ground truth.
Survey survey_from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
Survey load_survey(const std::filesystem::path& path);

/// Little-endian u32 vertex count, u32 face count, vertices as 3 x f32, faces as 3 x u32.
std::string encode_mesh(const geometry::TriMesh& mesh);

struct LabelRecord {
    std::string item;
    std::string reviewer;
    Choice choice = Choice::NotSure;
    /// Milliseconds since the Unix epoch, UTC.
    std::int64_t timestamp_ms = 0;
};

nlohmann::json to_json(const LabelRecord& r);
LabelRecord label_from_json(const nlohmann::json& j);

/// Append-only JSON-lines record log. Each append is flushed and fsynced before it
/// returns. Opening replays the existing log; a torn final line (no trailing newline)
/// from an interrupted write is dropped, any other malformed line is a DataError.
class LabelStore {
public:
    explicit LabelStore(std::filesystem::path path);
    ~LabelStore();
    LabelStore(const LabelStore&) = delete;
    LabelStore& operator=(const LabelStore&) = delete;

    void append(const LabelRecord& r);
    std::vector<LabelRecord> snapshot() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
    mutable std::mutex mu_;
    std::vector<LabelRecord> records_;
};

struct SurveySummary {
    std::array<std::size_t, 3> counts{};
    std::size_t total = 0;
    std::size_t reviewers = 0;
    /// Records naming items outside the survey; excluded from the counts.
    std::size_t ignored = 0;
    /// [ground truth][choice].
    std::array<std::array<std::size_t, 3>, 2> confusion{};
};

/// Fold over the log keeping the last record per (reviewer, item).
SurveySummary summarize(const std::vector<LabelRecord>& records, const Survey& survey);

/// {total, counts, reviewers, ignored} and, with `reveal`, the confusion table.
nlohmann::json to_json(const SurveySummary& s, bool reveal);

}  // namespace organdiff::review
