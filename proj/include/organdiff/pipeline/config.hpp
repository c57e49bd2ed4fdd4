#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "organdiff/diffusion/diffusion.hpp"
#include "organdiff/inr/fit.hpp"
#include "organdiff/weightspace/denoiser.hpp"

namespace organdiff::pipeline {

struct SplitRatios {
    double train = 0.80;
    double val = 0.05;
    double test = 0.15;
};

/// Every tunable of a run. Loaded from one JSON document whose top-level sections are
/// "seed", "split", "fit", "denoiser", "schedule", "train", "sample" and "eval"; unknown
/// keys are rejected so typos surface as usage errors.
struct RunConfig {
    std::uint64_t seed = 0;

    SplitRatios split;
    std::size_t min_usable = 20;

    inr::FitConfig fit;
    int fit_resolution = 128;
    std::size_t fit_metric_points = 100000;
    std::size_t fit_viou_samples = 100000;

    weightspace::DenoiserConfig denoiser;
    int schedule_T = 1000;
    double beta_min = 1e-4;
    double beta_max = 0.02;
    diffusion::TrainConfig train;

    diffusion::SampleConfig sample{100, 0.0, 16, 0};
    int sample_resolution = 128;

    std::size_t eval_cloud_points = 2048;
    std::string eval_reference_split = "test";

    /// Sets every per-stage seed from `seed`.
    void apply_seed(std::uint64_t s);
    diffusion::DiffusionSchedule schedule() const;
    /// Throws UsageError on out-of-range values.
    void validate() const;
};

/// Defaults overridden by the fields present in `j`. "denoiser": {"preset": "desk"} selects
/// the desk-scale model before other denoiser fields apply.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

/// {command, seed, deterministic, config_hash, config, version, compiler}.
nlohmann::json reproducibility_block(const std::string& command, const RunConfig& c, bool deterministic);

}  // namespace organdiff::pipeline
