#include "organdiff/geometry/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "organdiff/error.hpp"

namespace organdiff::geometry {

namespace {

// Cumulative face areas for area-weighted face selection.
std::vector<double> area_cdf(const TriMesh& mesh) {
    std::vector<double> cdf(mesh.faces.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const Vec3& a = mesh.vertices[face[0]];
        acc += 0.5 * (mesh.vertices[face[1]] - a).cross(mesh.vertices[face[2]] - a).norm();
        cdf[f] = acc;
    }
    if (!(acc > 0.0)) throw DataError("cannot sample a surface with zero area");
    return cdf;
}

std::size_t pick_face(const std::vector<double>& cdf, Rng& rng) {
    const double u = rng.uniform(0.0, cdf.back());
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

Vec3 point_on_face(const TriMesh& mesh, std::size_t f, Rng& rng) {
    const auto& face = mesh.faces[f];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    return (1.0 - r1) * mesh.vertices[face[0]] + r1 * (1.0 - r2) * mesh.vertices[face[1]] +
           r1 * r2 * mesh.vertices[face[2]];
}

}  // namespace

std::vector<Vec3> sample_volume_points(std::size_t n, Rng& rng) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) {
        for (int k = 0; k < 3; ++k) p[k] = rng.uniform(-0.5, 0.5);
    }
    return pts;
}

std::vector<Vec3> sample_near_surface(const TriMesh& mesh, std::size_t n, double sigma, Rng& rng) {
    if (mesh.empty()) throw EmptyMeshError("cannot sample near an empty mesh");
    if (!(sigma > 0.0)) throw UsageError("near-surface sigma must be positive");
    const auto cdf = area_cdf(mesh);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) {
        p = point_on_face(mesh, pick_face(cdf, rng), rng);
        for (int k = 0; k < 3; ++k) p[k] = std::clamp(p[k] + rng.normal(0.0, sigma), -0.5, 0.5);
    }
    return pts;
}

PointCloud surface_sample(const TriMesh& mesh, std::size_t n, Rng& rng, bool with_normals) {
    if (mesh.empty()) throw EmptyMeshError("cannot sample an empty mesh");
    if (n == 0) throw UsageError("surface_sample needs n > 0");
    const auto cdf = area_cdf(mesh);
    PointCloud cloud;
    cloud.points.resize(n);
    if (with_normals) cloud.normals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t f = pick_face(cdf, rng);
        cloud.points[i] = point_on_face(mesh, f, rng);
        if (with_normals) cloud.normals[i] = face_normal(mesh, f);
    }
    return cloud;
}

}  // namespace organdiff::geometry
