#include "organdiff/inr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "organdiff/error.hpp"
#include "organdiff/geometry/sampling.hpp"
#include "organdiff/geometry/winding_number.hpp"
#include "organdiff/rng.hpp"

namespace organdiff::inr {

void FitConfig::validate() const {
    if (epochs < 1) throw UsageError("fit: epochs must be >= 1");
    if (volume_points < 0 || surface_points < 0 || volume_points + surface_points == 0) {
        throw UsageError("fit: need a positive number of sample points");
    }
    if (minibatch < 1 || minibatch > volume_points + surface_points) {
        throw UsageError("fit: minibatch must lie in [1, total points]");
    }
}

FitResult fit_mlp(const geometry::TriMesh& mesh, const FitConfig& cfg, const FitProgress& progress) {
    cfg.validate();
    mesh.validate();

    Rng rng(cfg.seed);
    std::vector<Vec3> points = geometry::sample_volume_points(static_cast<std::size_t>(cfg.volume_points), rng);
    const auto near = geometry::sample_near_surface(mesh, static_cast<std::size_t>(cfg.surface_points),
                                                    cfg.near_surface_sigma, rng);
    points.insert(points.end(), near.begin(), near.end());
    const std::vector<std::uint8_t> labels = geometry::occupancy_labels(mesh, points);

    FitResult result{MlpParams::kaiming_uniform(cfg.init_seed.value_or(cfg.seed)), {}};
    MlpParams& params = result.params;
    MlpParams grads;
    Adam adam(kParamCount, cfg.adam);

    const std::size_t total = points.size();
    const auto batch = static_cast<std::size_t>(cfg.minibatch);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Vec3> batch_points;
    std::vector<std::uint8_t> batch_labels;
    result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < total; start += batch) {
            const std::size_t end = std::min(total, start + batch);
            batch_points.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_points.push_back(points[order[i]]);
                batch_labels.push_back(labels[order[i]]);
            }
            const double loss = mlp_gradients(params, batch_points, batch_labels, grads);
            if (!std::isfinite(loss)) {
                throw NumericError(fmt::format("fit: non-finite loss at epoch {}, batch starting at {}", epoch, start));
            }
            epoch_sum += loss * static_cast<double>(end - start);
            adam.begin_step();
            std::size_t offset = 0;
            for (int t = 0; t < 8; ++t) {
                auto p = params.tensor(t);
                adam.update(p.data(), grads.tensor(t).data(), p.size(), offset);
                offset += p.size();
            }
        }
        const double mean = epoch_sum / static_cast<double>(total);
        result.epoch_loss.push_back(mean);
        if (progress) progress(epoch, mean);
        if ((epoch + 1) % 100 == 0 || epoch + 1 == cfg.epochs) spdlog::debug("fit epoch {}: bce {:.6f}", epoch + 1, mean);
    }
    return result;
}

geometry::OccupancyGrid evaluate_logits(const MlpParams& params, int resolution, const geometry::Aabb& extent) {
    geometry::OccupancyGrid grid(resolution, extent);
    grid.validate();
    const int r = resolution;
    std::vector<Vec3> slab;
    slab.reserve(static_cast<std::size_t>(r) * r);
    // One x-slab at a time keeps memory flat at large R.
    for (int ix = 0; ix < r; ++ix) {
        slab.clear();
        for (int iy = 0; iy < r; ++iy)
            for (int iz = 0; iz < r; ++iz) slab.push_back(grid.point(ix, iy, iz));
        const auto logits = mlp_forward(params, slab);
        std::copy(logits.begin(), logits.end(), grid.values.begin() + static_cast<std::ptrdiff_t>(grid.index(ix, 0, 0)));
    }
    return grid;
}

geometry::OccupancyGrid evaluate_grid(const MlpParams& params, int resolution, const geometry::Aabb& extent) {
    auto grid = evaluate_logits(params, resolution, extent);
    for (auto& v : grid.values) v = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    return grid;
}

Reconstruction reconstruct(const MlpParams& params, int resolution, const geometry::Aabb& extent) {
    // Logits rather than probabilities: a well-fitted field saturates the sigmoid between
    // lattice points, which pins interpolated vertices to edge midpoints and terraces the
    // surface. The zero level set is the same.
    const auto grid = evaluate_logits(params, resolution, extent);
    // The field is only trained inside the extent. Treating the outside as empty (one shell
    // on the same lattice, mirrored below the largest logit) closes any surface that reaches
    // the boundary.
    const int r = resolution;
    const Vec3 step = extent.extent() / static_cast<double>(r - 1);
    geometry::Aabb padded;
    padded.min = extent.min - step;
    padded.max = extent.max + step;
    const float top = *std::max_element(grid.values.begin(), grid.values.end());
    geometry::OccupancyGrid closed(r + 2, padded);
    std::fill(closed.values.begin(), closed.values.end(), -std::max(top, 1.0f));
    for (int ix = 0; ix < r; ++ix)
        for (int iy = 0; iy < r; ++iy) {
            const float* src = &grid.values[grid.index(ix, iy, 0)];
            std::copy(src, src + r, &closed.values[closed.index(ix + 1, iy + 1, 1)]);
        }
    Reconstruction out;
    out.mesh = geometry::marching_cubes(closed, 0.0);
    out.empty_surface = out.mesh.empty();
    return out;
}

}  // namespace organdiff::inr
