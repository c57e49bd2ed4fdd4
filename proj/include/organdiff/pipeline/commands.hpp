#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "organdiff/error.hpp"
#include "organdiff/pipeline/config.hpp"
#include "organdiff/pipeline/manifest.hpp"

namespace organdiff::pipeline {

namespace fs = std::filesystem;

/// Progress lines for the CLI; library code never prints.
using Log = std::function<void(const std::string&)>;

struct QaResult {
    Manifest manifest;
    /// Status distribution over the five review categories.
    std::string table;
    nlohmann::json report;
};

/// Runs qa_report on every .obj/.stl file of `input_dir` (sorted by name) and writes the
/// manifest to `manifest_path` and the report to qa_report.json next to it. Files that
/// parse but hold no faces are suggested NoFullShape; unreadable files are NotUsable with
/// the reason in `error`. An empty directory yields an empty manifest.
QaResult cmd_qa(const fs::path& input_dir, const fs::path& manifest_path, const Log& log = {});

/// Count and percentage per status, one row per category, in review order.
std::string status_table(const Manifest& m);

struct SplitCounts {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

/// floor(train n), floor(val n), remainder to test.
SplitCounts split_counts(std::size_t n, const SplitRatios& r);

/// Shuffles the Usable entries (by effective status) with `seed` and partitions them;
/// every other entry gets split none. DataError below `min_usable` Usable entries.
SplitCounts assign_splits(Manifest& m, std::uint64_t seed, const SplitRatios& r, std::size_t min_usable);

SplitCounts cmd_split(const fs::path& manifest_path, const RunConfig& cfg, const Log& log = {});

struct FitSummary {
    std::size_t fitted = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    /// Category of the first failure, if any.
    std::optional<ErrorKind> failure;
};

/// Fits every Usable entry into out_dir/<id>.mlp. Existing loadable checkpoints are kept
/// (resume). Per-shape failures are recorded on the entry and the run continues. The
/// manifest is saved after every shape.
FitSummary cmd_fit(const fs::path& manifest_path, const RunConfig& cfg, const fs::path& out_dir, bool deterministic,
                   const Log& log = {});

struct TrainSummary {
    std::size_t train_count = 0;
    std::size_t val_count = 0;
    int best_epoch = 0;
    double final_loss = 0.0;
};

/// Trains on the fitted thetas of the train split (validating on val) and writes
/// best.ckpt, last.ckpt, loss.csv and run.json to out_dir.
TrainSummary cmd_train(const fs::path& manifest_path, const RunConfig& cfg, const fs::path& out_dir,
                       bool deterministic, const Log& log = {});

/// Generates cfg.sample.count samples from `checkpoint` into out_dir (see
/// diffusion::write_generation) plus run.json. Returns the number of empty surfaces.
std::size_t cmd_sample(const fs::path& checkpoint, const RunConfig& cfg, const fs::path& out_dir, bool deterministic,
                       const Log& log = {});

/// Set metrics of the generated meshes in `generated_dir` against the manifest entries
/// of the reference split, plus the per-shape fit metrics recorded in the manifest.
/// Written to out_dir/eval.json and returned.
nlohmann::json cmd_eval(const fs::path& generated_dir, const fs::path& manifest_path, const RunConfig& cfg,
                        const fs::path& out_dir, bool deterministic, const Log& log = {});

}  // namespace organdiff::pipeline
