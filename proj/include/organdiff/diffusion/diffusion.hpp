#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "organdiff/diffusion/schedule.hpp"
#include "organdiff/geometry/mesh.hpp"
#include "organdiff/optim.hpp"
#include "organdiff/rng.hpp"
#include "organdiff/weightspace/denoiser.hpp"

namespace organdiff::diffusion {

using weightspace::FlatTheta;
using weightspace::ThetaStats;
using weightspace::X0Predictor;

/// Mean over batch and coordinates of (predict_x0(q_sample(theta0, t, noise), t) - theta0)^2.
double training_loss(const X0Predictor& model, const Eigen::MatrixXf& theta0, std::span<const int> t,
                     const Eigen::MatrixXf& noise, const DiffusionSchedule& sched);

struct TrainConfig {
    int epochs = 6000;
    int batch = 32;
    AdamConfig adamw{2e-4, 0.9, 0.999, 1e-8, 0.01};
    std::uint64_t seed = 0;
    int validate_every = 100;
    void validate() const;
};

struct TrainResult {
    weightspace::Denoiser model;
    /// Parameters at the lowest validation loss (the final ones without a validation set).
    std::vector<float> best_parameters;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    ThetaStats stats;
    std::vector<double> train_loss;
    std::vector<std::pair<int, double>> val_loss;
};

using TrainProgress = std::function<void(int epoch, double train_loss)>;

/// Standardizes with stats of `train_set`, then for every epoch runs AdamW over shuffled
/// minibatches, each element drawing t uniform in [1, T] and fresh N(0, I) noise.
/// Validation loss uses a fixed draw of (t, noise) so values are comparable across epochs.
/// Throws UsageError with fewer than 2 training thetas, NumericError on a non-finite loss.
TrainResult train(std::span<const FlatTheta> train_set, std::span<const FlatTheta> val_set, const TrainConfig& cfg,
                  const weightspace::DenoiserConfig& model_cfg, const DiffusionSchedule& sched,
                  const TrainProgress& progress = {});

/// Header fields stored alongside the denoiser parameters.
nlohmann::json checkpoint_meta(const ThetaStats& stats, const DiffusionSchedule& sched, int epoch);

struct TrainedModel {
    weightspace::Denoiser model;
    ThetaStats stats;
    DiffusionSchedule schedule;
    int epoch = 0;
};

/// Loads a denoiser checkpoint written with checkpoint_meta; DataError if the metadata is missing.
TrainedModel load_trained(const std::filesystem::path& path);

struct SampleConfig {
    int ddim_steps = 100;
    double eta = 0.0;
    int count = 1;
    std::uint64_t seed = 0;
    void validate(int T) const;
};

/// Descending timesteps floor(k T / S) for k = S..1.
std::vector<int> ddim_timesteps(int T, int steps);

/// sigma for the step t -> t_prev at the given eta.
double ddim_sigma(int t, int t_prev, double eta, const DiffusionSchedule& sched);

/// One update theta_t -> theta_{t_prev} from the clean estimate x0 and standard normal z.
std::vector<float> ddim_step(std::span<const float> theta_t, std::span<const float> x0, int t, int t_prev, double eta,
                             std::span<const float> z, const DiffusionSchedule& sched);

/// Starts from N(0, I) and walks the DDIM subsequence down to t = 0; the last clean
/// estimate is destandardized and returned. Throws NumericError naming the step on a
/// non-finite intermediate.
FlatTheta ddim_sample(const X0Predictor& model, const DiffusionSchedule& sched, const SampleConfig& cfg,
                      const ThetaStats& stats, Rng& rng);

struct GeneratedSample {
    FlatTheta theta;
    geometry::TriMesh mesh;
    bool empty_surface = false;
    std::uint64_t seed = 0;
};

/// cfg.count samples (possibly none); sample i uses seed derive_seed(cfg.seed, i).
std::vector<GeneratedSample> generate(const X0Predictor& model, const DiffusionSchedule& sched, const SampleConfig& cfg,
                                      const ThetaStats& stats, int mc_resolution = 128);

/// Writes sample_NNN.mlp / sample_NNN.obj per sample and manifest.json, a JSON array of
/// {id, theta, mesh, seed, steps, eta, empty_surface}. Empty surfaces get no mesh file.
void write_generation(const std::filesystem::path& dir, const std::vector<GeneratedSample>& samples,
                      const SampleConfig& cfg);

}  // namespace organdiff::diffusion
