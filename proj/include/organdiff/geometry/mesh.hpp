#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace organdiff::geometry {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle surface. Faces are counter-clockwise when seen from outside.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    bool empty() const { return faces.empty(); }
    /// Throws DataError if a face index is out of range or a face repeats a vertex.
    void validate() const;
};

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& b) {
        min = min.cwiseMin(b.min);
        max = max.cwiseMax(b.max);
    }
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

Aabb bounding_box(const TriMesh& mesh);

/// Padding applied by normalize_to_unit_cube: the longest axis spans 0.95 of the cube.
inline constexpr double kUnitCubeFill = 0.95;

/// Centers the bounding box at the origin and scales uniformly so the longest axis spans
/// exactly `fill` (default 0.95). Throws DataError for an empty or zero-extent mesh.
TriMesh normalize_to_unit_cube(const TriMesh& mesh, double fill = kUnitCubeFill);

/// Applies p -> scale .* p + offset to every vertex. Negative scale factors flip orientation;
/// in that case face winding is reversed so the mesh stays outward-oriented.
TriMesh transformed(const TriMesh& mesh, const Vec3& scale, const Vec3& offset);

/// Appends `other` to `mesh`, reindexing its faces.
void append(TriMesh& mesh, const TriMesh& other);

double surface_area(const TriMesh& mesh);
/// Signed enclosed volume via the divergence theorem (positive for outward orientation).
double signed_volume(const TriMesh& mesh);
Vec3 face_normal(const TriMesh& mesh, std::size_t face);

// Primitive solids, outward-oriented and watertight.
TriMesh make_icosphere(int subdivisions, double radius, const Vec3& center = Vec3::Zero());
TriMesh make_ellipsoid(int subdivisions, const Vec3& semi_axes, const Vec3& center = Vec3::Zero());
TriMesh make_box(const Vec3& half_extents, const Vec3& center = Vec3::Zero());

}  // namespace organdiff::geometry
