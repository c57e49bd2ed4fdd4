#include "organdiff/geometry/winding_number.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>

#include <spdlog/spdlog.h>

#include "organdiff/error.hpp"
#include "organdiff/geometry/qa.hpp"

namespace organdiff::geometry {

double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
    const Vec3 ra = a - p;
    const Vec3 rb = b - p;
    const Vec3 rc = c - p;
    const double la = ra.norm();
    const double lb = rb.norm();
    const double lc = rc.norm();
    const double det = ra.dot(rb.cross(rc));
    const double den = la * lb * lc + ra.dot(rb) * lc + ra.dot(rc) * lb + rb.dot(rc) * la;
    return 2.0 * std::atan2(det, den);
}

double winding_number(const TriMesh& mesh, const Vec3& p) {
    if (mesh.empty()) throw EmptyMeshError("winding number of an empty mesh");
    double sum = 0.0;
    for (const auto& f : mesh.faces) {
        sum += solid_angle(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]], p);
    }
    return sum / (4.0 * std::numbers::pi);
}

WindingNumberTree::WindingNumberTree(const TriMesh& mesh, std::size_t leaf_size) : mesh_(&mesh) {
    if (mesh.empty()) throw EmptyMeshError("winding number tree over an empty mesh");
    const auto nfaces = static_cast<std::uint32_t>(mesh.faces.size());
    face_order_.resize(nfaces);
    std::iota(face_order_.begin(), face_order_.end(), 0u);
    centroids_.resize(nfaces);
    for (std::uint32_t f = 0; f < nfaces; ++f) {
        const auto& face = mesh.faces[f];
        centroids_[f] = (mesh.vertices[face[0]] + mesh.vertices[face[1]] + mesh.vertices[face[2]]) / 3.0;
    }
    nodes_.reserve(2 * nfaces / std::max<std::size_t>(leaf_size, 1) + 1);
    build(0, nfaces, std::max<std::size_t>(leaf_size, 1));
}

std::int32_t WindingNumberTree::build(std::uint32_t first, std::uint32_t count, std::size_t leaf_size) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    node.first = first;
    node.count = count;
    Aabb centroid_box;
    for (std::uint32_t i = first; i < first + count; ++i) {
        const auto& face = mesh_->faces[face_order_[i]];
        for (auto v : face) node.box.expand(mesh_->vertices[v]);
        centroid_box.expand(centroids_[face_order_[i]]);
    }
    build_cap(node);

    if (count > leaf_size) {
        int axis = 0;
        centroid_box.extent().maxCoeff(&axis);
        const std::uint32_t half = count / 2;
        auto begin = face_order_.begin() + first;
        std::nth_element(begin, begin + half, begin + count, [&](std::uint32_t a, std::uint32_t b) {
            const double ca = centroids_[a][axis];
            const double cb = centroids_[b][axis];
            return ca < cb || (ca == cb && a < b);
        });
        node.left = build(first, half, leaf_size);
        node.right = build(first + half, count - half, leaf_size);
    }
    nodes_[index] = node;
    return index;
}

void WindingNumberTree::build_cap(Node& node) {
    // Net directed-edge multiplicity: interior edges cancel, the boundary loop survives.
    std::vector<std::tuple<std::uint32_t, std::uint32_t, int>> edges;
    edges.reserve(node.count * 3);
    for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const auto& f = mesh_->faces[face_order_[i]];
        for (int k = 0; k < 3; ++k) {
            const auto a = f[k];
            const auto b = f[(k + 1) % 3];
            if (a < b) edges.emplace_back(a, b, 1);
            else edges.emplace_back(b, a, -1);
        }
    }
    std::sort(edges.begin(), edges.end());
    std::vector<std::array<std::uint32_t, 2>> boundary;
    for (std::size_t i = 0; i < edges.size();) {
        const auto [a, b, s] = edges[i];
        int net = 0;
        std::size_t j = i;
        for (; j < edges.size() && std::get<0>(edges[j]) == a && std::get<1>(edges[j]) == b; ++j) net += std::get<2>(edges[j]);
        for (int r = 0; r < std::abs(net); ++r) {
            boundary.push_back(net > 0 ? std::array<std::uint32_t, 2>{a, b} : std::array<std::uint32_t, 2>{b, a});
        }
        i = j;
    }
    node.has_cap = boundary.size() < node.count;
    if (!node.has_cap) return;
    node.apex = mesh_->vertices[mesh_->faces[face_order_[node.first]][0]];
    node.cap_first = static_cast<std::uint32_t>(cap_edges_.size());
    node.cap_count = static_cast<std::uint32_t>(boundary.size());
    cap_edges_.insert(cap_edges_.end(), boundary.begin(), boundary.end());
}

double WindingNumberTree::eval_node(std::int32_t index, const Vec3& p) const {
    const Node& node = nodes_[static_cast<std::size_t>(index)];
    if (node.has_cap && !node.box.contains(p)) {
        double sum = 0.0;
        for (std::uint32_t i = node.cap_first; i < node.cap_first + node.cap_count; ++i) {
            const auto& e = cap_edges_[i];
            sum += solid_angle(node.apex, mesh_->vertices[e[0]], mesh_->vertices[e[1]], p);
        }
        return sum;
    }
    if (node.left < 0) {
        double sum = 0.0;
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
            const auto& f = mesh_->faces[face_order_[i]];
            sum += solid_angle(mesh_->vertices[f[0]], mesh_->vertices[f[1]], mesh_->vertices[f[2]], p);
        }
        return sum;
    }
    return eval_node(node.left, p) + eval_node(node.right, p);
}

double WindingNumberTree::operator()(const Vec3& p) const { return eval_node(0, p) / (4.0 * std::numbers::pi); }

std::vector<double> WindingNumberTree::evaluate(std::span<const Vec3> points) const {
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = (*this)(points[i]);
    return out;
}

std::vector<std::uint8_t> occupancy_labels(const TriMesh& mesh, std::span<const Vec3> points) {
    if (!qa_report(mesh).watertight) {
        spdlog::warn("occupancy labels requested for a non-watertight mesh; winding numbers may be fractional");
    }
    const WindingNumberTree tree(mesh);
    std::vector<std::uint8_t> labels(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) labels[i] = tree(points[i]) > 0.5 ? 1 : 0;
    return labels;
}

}  // namespace organdiff::geometry
