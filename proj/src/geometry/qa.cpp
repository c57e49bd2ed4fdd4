#include "organdiff/geometry/qa.hpp"

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

namespace organdiff::geometry {

namespace {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

std::string_view status_id(ShapeStatus s) {
    switch (s) {
        case ShapeStatus::Usable: return "Usable";
        case ShapeStatus::NoFullShape: return "NoFullShape";
        case ShapeStatus::NotUsable: return "NotUsable";
        case ShapeStatus::NotSure: return "NotSure";
        case ShapeStatus::RequiresEditing: return "RequiresEditing";
    }
    return "NotUsable";
}

std::string_view status_label(ShapeStatus s) {
    switch (s) {
        case ShapeStatus::Usable: return "Usable";
        case ShapeStatus::NoFullShape: return "No full shape";
        case ShapeStatus::NotUsable: return "Not usable";
        case ShapeStatus::NotSure: return "Not sure";
        case ShapeStatus::RequiresEditing: return "Requires editing";
    }
    return "Not usable";
}

std::optional<ShapeStatus> parse_status(std::string_view text) {
    for (auto s : kAllStatuses) {
        if (text == status_id(s) || text == status_label(s)) return s;
    }
    return std::nullopt;
}

QaReport qa_report(const TriMesh& mesh) {
    QaReport r;
    if (!mesh.vertices.empty()) r.bbox_extent = bounding_box(mesh).extent();

    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) edges.emplace_back(std::minmax(f[k], f[(k + 1) % 3]));
    }
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 0; i < edges.size();) {
        std::size_t j = i;
        while (j < edges.size() && edges[j] == edges[i]) ++j;
        ++r.edge_count;
        if (j - i != 2) ++r.boundary_edge_count;
        i = j;
    }

    UnionFind uf(mesh.vertices.size());
    std::vector<bool> used(mesh.vertices.size(), false);
    for (const auto& f : mesh.faces) {
        uf.unite(f[0], f[1]);
        uf.unite(f[1], f[2]);
        for (auto v : f) used[v] = true;
    }
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (used[v] && uf.find(v) == v) ++r.connected_components;
    }

    std::vector<std::array<double, 3>> coords;
    coords.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) coords.push_back({v.x(), v.y(), v.z()});
    std::sort(coords.begin(), coords.end());
    for (std::size_t i = 1; i < coords.size(); ++i) {
        if (coords[i] == coords[i - 1]) ++r.duplicate_vertex_count;
    }

    r.watertight = !mesh.faces.empty() && r.boundary_edge_count == 0;
    const double ratio = r.edge_count ? static_cast<double>(r.boundary_edge_count) / r.edge_count : 1.0;
    if (mesh.faces.empty() || r.connected_components > kMaxUsableComponents || ratio > kMaxBoundaryEdgeRatio) {
        r.suggested_status = ShapeStatus::NotUsable;
    } else if (r.boundary_edge_count > 0) {
        r.suggested_status = ShapeStatus::RequiresEditing;
    } else {
        r.suggested_status = ShapeStatus::Usable;
    }
    return r;
}

nlohmann::json to_json(const QaReport& r) {
    return {
        {"boundary_edge_count", r.boundary_edge_count},
        {"connected_components", r.connected_components},
        {"watertight", r.watertight},
        {"bbox_extent", {r.bbox_extent.x(), r.bbox_extent.y(), r.bbox_extent.z()}},
        {"duplicate_vertex_count", r.duplicate_vertex_count},
        {"suggested_status", std::string(status_id(r.suggested_status))},
    };
}

}  // namespace organdiff::geometry
