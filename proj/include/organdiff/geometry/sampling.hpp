#pragma once

#include <vector>

#include "organdiff/geometry/mesh.hpp"
#include "organdiff/rng.hpp"

namespace organdiff::geometry {

/// Point cloud with optional unit normals (empty `normals` means none).
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;

    std::size_t size() const { return points.size(); }
    bool has_normals() const { return !normals.empty() && normals.size() == points.size(); }
};

/// Default standard deviation of the near-surface Gaussian offset (2% of the cube side).
inline constexpr double kNearSurfaceSigma = 0.02;

/// n points i.i.d. uniform over [-0.5, 0.5]^3.
std::vector<Vec3> sample_volume_points(std::size_t n, Rng& rng);

/// Area-weighted surface points plus an isotropic N(0, sigma^2) offset per axis, clamped
/// to [-0.5, 0.5]^3.
std::vector<Vec3> sample_near_surface(const TriMesh& mesh, std::size_t n, double sigma, Rng& rng);

/// n area-weighted uniform surface points, with per-point face normals when requested.
PointCloud surface_sample(const TriMesh& mesh, std::size_t n, Rng& rng, bool with_normals = true);

}  // namespace organdiff::geometry
