#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "organdiff/geometry/marching_cubes.hpp"
#include "organdiff/inr/mlp.hpp"
#include "organdiff/optim.hpp"

namespace organdiff::inr {

struct FitConfig {
    int epochs = 1000;
    int minibatch = 2048;
    int volume_points = 20000;
    int surface_points = 20000;
    double near_surface_sigma = 0.02;
    AdamConfig adam{};
    /// Drives point sampling and per-epoch shuffling.
    std::uint64_t seed = 0;
    /// Weight initialization seed; defaults to `seed`. Fitting a whole dataset from one
    /// shared initialization keeps the resulting weight vectors comparable.
    std::optional<std::uint64_t> init_seed;

    /// Throws UsageError on epochs < 1, empty point sets or a minibatch outside
    /// [1, total points].
    void validate() const;
};

struct FitResult {
    MlpParams params;
    /// Mean training BCE of each epoch.
    std::vector<double> epoch_loss;
};

using FitProgress = std::function<void(int epoch, double loss)>;

/// Samples the labelled point set once, then runs Adam over reshuffled minibatches; one
/// epoch is one pass over all points, the last batch possibly short. Throws NumericError
/// if the loss becomes non-finite.
FitResult fit_mlp(const geometry::TriMesh& mesh, const FitConfig& cfg, const FitProgress& progress = {});

/// Raw logits at the R^3 lattice of `extent`.
geometry::OccupancyGrid evaluate_logits(const MlpParams& params, int resolution,
                                        const geometry::Aabb& extent = geometry::unit_cube_extent());

/// sigmoid(logit) at the R^3 lattice of `extent`.
geometry::OccupancyGrid evaluate_grid(const MlpParams& params, int resolution,
                                      const geometry::Aabb& extent = geometry::unit_cube_extent());

struct Reconstruction {
    geometry::TriMesh mesh;
    bool empty_surface = false;
};

/// Marching cubes on evaluate_logits at iso 0 (the occupancy-0.5 surface), with everything
/// outside `extent` counted as empty so the surface is closed where it meets the boundary.
Reconstruction reconstruct(const MlpParams& params, int resolution = 128,
                           const geometry::Aabb& extent = geometry::unit_cube_extent());

}  // namespace organdiff::inr
