#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::geometry {

/// Signed solid angle of triangle (a, b, c) seen from p (Van Oosterom-Strackee).
double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p);

/// Generalized winding number: sum of signed face solid angles over 4*pi. Exact O(F).
/// ~1 inside and ~0 outside a closed outward-oriented mesh; points on the surface return a
/// finite value near 0.5 that callers should treat as ambiguous.
double winding_number(const TriMesh& mesh, const Vec3& p);

/// Bounding-volume hierarchy over the faces for batched winding-number queries.
///
/// For a subtree whose box does not contain the query point, the subtree's patch is
/// replaced by a fan closing its boundary loop (apex at a patch vertex, inside the box).
/// Patch and reversed fan form a closed surface that cannot wind around an outside point,
/// so the substitution is exact up to rounding; open and holed meshes are handled too.
class WindingNumberTree {
public:
    /// Keeps a pointer to `mesh`, which must outlive the tree.
    explicit WindingNumberTree(const TriMesh& mesh, std::size_t leaf_size = 8);
    WindingNumberTree(TriMesh&&, std::size_t = 8) = delete;

    double operator()(const Vec3& p) const;
    std::vector<double> evaluate(std::span<const Vec3> points) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Aabb box;
        std::uint32_t first = 0;  // range into face_order_ (leaves)
        std::uint32_t count = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::uint32_t cap_first = 0;  // range into cap_edges_
        std::uint32_t cap_count = 0;
        bool has_cap = false;
        Vec3 apex = Vec3::Zero();
    };

    std::int32_t build(std::uint32_t first, std::uint32_t count, std::size_t leaf_size);
    void build_cap(Node& node);
    double eval_node(std::int32_t index, const Vec3& p) const;

    const TriMesh* mesh_;
    std::vector<std::uint32_t> face_order_;
    std::vector<Node> nodes_;
    std::vector<std::array<std::uint32_t, 2>> cap_edges_;
    std::vector<Vec3> centroids_;
};

/// 1 where the winding number exceeds 0.5, else 0. Logs a warning for non-watertight
/// meshes but still produces labels.
std::vector<std::uint8_t> occupancy_labels(const TriMesh& mesh, std::span<const Vec3> points);

}  // namespace organdiff::geometry
