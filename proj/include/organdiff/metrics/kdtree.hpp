#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::metrics {

using geometry::Vec3;

struct Neighbor {
    std::size_t index = 0;
    /// Squared distance, dx*dx + dy*dy + dz*dz evaluated in that order.
    double dist2 = 0.0;
};

/// Exhaustive nearest neighbor; ties go to the lowest index.
Neighbor brute_nearest(std::span<const Vec3> points, const Vec3& q);

/// Exact nearest-neighbor queries. Returns exactly what brute_nearest returns, including
/// the lowest-index tie-break: subtrees are pruned only when their splitting plane is
/// strictly farther than the current best.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 16);

    Neighbor nearest(const Vec3& q) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        std::uint32_t first = 0;
        std::uint32_t count = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        int axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t first, std::uint32_t count, std::size_t leaf_size);
    void search(std::int32_t node, const Vec3& q, Neighbor& best) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

}  // namespace organdiff::metrics
