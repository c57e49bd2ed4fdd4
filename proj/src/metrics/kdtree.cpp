#include "organdiff/metrics/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "organdiff/error.hpp"

namespace organdiff::metrics {

namespace {

double dist2(const Vec3& p, const Vec3& q) {
    const double dx = p.x() - q.x();
    const double dy = p.y() - q.y();
    const double dz = p.z() - q.z();
    return dx * dx + dy * dy + dz * dz;
}

void offer(Neighbor& best, std::size_t index, double d2) {
    if (d2 < best.dist2 || (d2 == best.dist2 && index < best.index)) best = {index, d2};
}

}  // namespace

Neighbor brute_nearest(std::span<const Vec3> points, const Vec3& q) {
    if (points.empty()) throw DataError("nearest neighbor in an empty point set");
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < points.size(); ++i) offer(best, i, dist2(points[i], q));
    return best;
}

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size) : points_(points.begin(), points.end()) {
    if (points_.empty()) throw DataError("k-d tree over an empty point set");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / std::max<std::size_t>(leaf_size, 1) + 1);
    build(0, static_cast<std::uint32_t>(points_.size()), std::max<std::size_t>(leaf_size, 1));
}

std::int32_t KdTree::build(std::uint32_t first, std::uint32_t count, std::size_t leaf_size) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({first, count, -1, -1, 0, 0.0});
    if (count <= leaf_size) return id;

    geometry::Aabb box;
    for (std::uint32_t i = first; i < first + count; ++i) box.expand(points_[order_[i]]);
    int axis = 0;
    box.extent().maxCoeff(&axis);
    if (box.extent()[axis] == 0.0) return id;  // all points coincide

    const std::uint32_t mid = count / 2;
    auto begin = order_.begin() + first;
    std::nth_element(begin, begin + mid, begin + count, [&](std::uint32_t a, std::uint32_t b) {
        const double ca = points_[a][axis], cb = points_[b][axis];
        return ca < cb || (ca == cb && a < b);
    });
    const double split = points_[order_[first + mid]][axis];
    const std::int32_t left = build(first, mid, leaf_size);
    const std::int32_t right = build(first + mid, count - mid, leaf_size);
    nodes_[static_cast<std::size_t>(id)].axis = axis;
    nodes_[static_cast<std::size_t>(id)].split = split;
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

Neighbor KdTree::nearest(const Vec3& q) const {
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    search(0, q, best);
    return best;
}

void KdTree::search(std::int32_t index, const Vec3& q, Neighbor& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(index)];
    if (node.left < 0) {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
            offer(best, order_[i], dist2(points_[order_[i]], q));
        }
        return;
    }
    // Left holds coordinates <= split, right >= split.
    const double diff = q[node.axis] - node.split;
    const std::int32_t near_side = diff < 0 ? node.left : node.right;
    const std::int32_t far_side = diff < 0 ? node.right : node.left;
    search(near_side, q, best);
    if (diff * diff <= best.dist2) search(far_side, q, best);
}

}  // namespace organdiff::metrics
