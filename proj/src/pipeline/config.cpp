#include "organdiff/pipeline/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "organdiff/checkpoint.hpp"
#include "organdiff/error.hpp"
#include "organdiff/pipeline/manifest.hpp"

namespace organdiff::pipeline {

namespace {

using Setter = std::function<void(const nlohmann::json&)>;

template <typename T>
Setter set(T& field) {
    return [&field](const nlohmann::json& v) { field = v.get<T>(); };
}

void apply_section(const nlohmann::json& j, const std::string& section, const std::map<std::string, Setter>& setters) {
    if (!j.is_object()) throw UsageError(fmt::format("config section '{}' must be an object", section));
    for (const auto& [key, value] : j.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw UsageError(fmt::format("unknown config key '{}.{}'", section, key));
        try {
            it->second(value);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(fmt::format("config key '{}.{}': {}", section, key, e.what()));
        }
    }
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
    seed = s;
    fit.seed = s;
    fit.init_seed = s;
    denoiser.seed = s;
    train.seed = s;
    sample.seed = s;
}

diffusion::DiffusionSchedule RunConfig::schedule() const { return diffusion::make_schedule(schedule_T, beta_min, beta_max); }

void RunConfig::validate() const {
    const double sum = split.train + split.val + split.test;
    if (split.train <= 0 || split.val < 0 || split.test < 0 || std::abs(sum - 1.0) > 1e-9) {
        throw UsageError("split ratios must be non-negative, with train > 0, and sum to 1");
    }
    fit.validate();
    if (fit_resolution < 2 || sample_resolution < 2) throw UsageError("marching-cubes resolution must be >= 2");
    if (fit_metric_points == 0 || fit_viou_samples == 0 || eval_cloud_points == 0) {
        throw UsageError("metric sample counts must be positive");
    }
    denoiser.validate();
    train.validate();
    (void)schedule();
    if (sample.ddim_steps < 1 || sample.ddim_steps > schedule_T) {
        throw UsageError(fmt::format("sample.ddim_steps must be in [1, {}]", schedule_T));
    }
    if (!(sample.eta >= 0.0 && sample.eta <= 1.0)) throw UsageError("sample.eta must be in [0, 1]");
    if (sample.count < 0) throw UsageError("sample.count must be >= 0");
    if (!parse_split(eval_reference_split)) throw UsageError("eval.reference_split must be train, val, test or none");
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    if (j.contains("seed")) {
        try {
            c.apply_seed(j["seed"].get<std::uint64_t>());
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("config key 'seed': ") + e.what());
        }
    }
    for (const auto& [section, value] : j.items()) {
        if (section == "seed") continue;
        if (section == "split") {
            apply_section(value, section,
                          {{"train", set(c.split.train)},
                           {"val", set(c.split.val)},
                           {"test", set(c.split.test)},
                           {"min_usable", set(c.min_usable)}});
        } else if (section == "fit") {
            apply_section(value, section,
                          {{"epochs", set(c.fit.epochs)},
                           {"minibatch", set(c.fit.minibatch)},
                           {"volume_points", set(c.fit.volume_points)},
                           {"surface_points", set(c.fit.surface_points)},
                           {"near_surface_sigma", set(c.fit.near_surface_sigma)},
                           {"lr", set(c.fit.adam.lr)},
                           {"resolution", set(c.fit_resolution)},
                           {"metric_points", set(c.fit_metric_points)},
                           {"viou_samples", set(c.fit_viou_samples)}});
        } else if (section == "denoiser") {
            if (value.is_object() && value.contains("preset")) {
                const auto preset = value["preset"];
                if (preset == "desk") {
                    const auto s = c.denoiser.seed;
                    c.denoiser = weightspace::DenoiserConfig::desk();
                    c.denoiser.seed = s;
                } else if (preset != "full") {
                    throw UsageError("denoiser.preset must be \"desk\" or \"full\"");
                }
            }
            std::string preset_name;
            apply_section(value, section,
                          {{"preset", set(preset_name)},
                           {"n_emb", set(c.denoiser.n_emb)},
                           {"layers", set(c.denoiser.layers)},
                           {"heads", set(c.denoiser.heads)},
                           {"mlp_ratio", set(c.denoiser.mlp_ratio)}});
        } else if (section == "schedule") {
            apply_section(value, section,
                          {{"T", set(c.schedule_T)}, {"beta_min", set(c.beta_min)}, {"beta_max", set(c.beta_max)}});
        } else if (section == "train") {
            apply_section(value, section,
                          {{"epochs", set(c.train.epochs)},
                           {"batch", set(c.train.batch)},
                           {"lr", set(c.train.adamw.lr)},
                           {"weight_decay", set(c.train.adamw.weight_decay)},
                           {"validate_every", set(c.train.validate_every)}});
        } else if (section == "sample") {
            apply_section(value, section,
                          {{"ddim_steps", set(c.sample.ddim_steps)},
                           {"eta", set(c.sample.eta)},
                           {"count", set(c.sample.count)},
                           {"resolution", set(c.sample_resolution)}});
        } else if (section == "eval") {
            apply_section(value, section,
                          {{"cloud_points", set(c.eval_cloud_points)},
                           {"reference_split", set(c.eval_reference_split)}});
        } else {
            throw UsageError(fmt::format("unknown config section '{}'", section));
        }
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

nlohmann::json to_json(const RunConfig& c) {
    return {
        {"seed", c.seed},
        {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}, {"min_usable", c.min_usable}}},
        {"fit",
         {{"epochs", c.fit.epochs},
          {"minibatch", c.fit.minibatch},
          {"volume_points", c.fit.volume_points},
          {"surface_points", c.fit.surface_points},
          {"near_surface_sigma", c.fit.near_surface_sigma},
          {"lr", c.fit.adam.lr},
          {"resolution", c.fit_resolution},
          {"metric_points", c.fit_metric_points},
          {"viou_samples", c.fit_viou_samples}}},
        {"denoiser",
         {{"n_emb", c.denoiser.n_emb},
          {"layers", c.denoiser.layers},
          {"heads", c.denoiser.heads},
          {"mlp_ratio", c.denoiser.mlp_ratio}}},
        {"schedule", {{"T", c.schedule_T}, {"beta_min", c.beta_min}, {"beta_max", c.beta_max}}},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch", c.train.batch},
          {"lr", c.train.adamw.lr},
          {"weight_decay", c.train.adamw.weight_decay},
          {"validate_every", c.train.validate_every}}},
        {"sample",
         {{"ddim_steps", c.sample.ddim_steps},
          {"eta", c.sample.eta},
          {"count", c.sample.count},
          {"resolution", c.sample_resolution}}},
        {"eval", {{"cloud_points", c.eval_cloud_points}, {"reference_split", c.eval_reference_split}}},
    };
}

std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

nlohmann::json reproducibility_block(const std::string& command, const RunConfig& c, bool deterministic) {
#if defined(__clang__)
    const std::string compiler = fmt::format("clang {}.{}.{}", __clang_major__, __clang_minor__, __clang_patchlevel__);
#elif defined(__GNUC__)
    const std::string compiler = fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__);
#else
    const std::string compiler = "unknown";
#endif
    return {{"command", command},     {"seed", c.seed},         {"deterministic", deterministic},
            {"config_hash", config_hash(c)}, {"config", to_json(c)}, {"version", ORGANDIFF_VERSION},
            {"compiler", compiler}};
}

}  // namespace organdiff::pipeline
