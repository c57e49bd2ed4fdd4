#include "organdiff/geometry/marching_cubes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "organdiff/error.hpp"

namespace organdiff::geometry {

namespace {

constexpr std::array<std::array<int, 3>, 8> kCorner = {{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

constexpr std::array<std::array<int, 2>, 12> kEdgeCorners = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

// Each cube face: outward normal and its four edges.
struct CubeFace {
    std::array<int, 3> normal;
    std::array<int, 4> edges;
};
constexpr std::array<CubeFace, 6> kFaces = {{
    {{0, 0, -1}, {0, 1, 2, 3}},
    {{0, 0, 1}, {4, 5, 6, 7}},
    {{0, -1, 0}, {0, 9, 4, 8}},
    {{0, 1, 0}, {2, 10, 6, 11}},
    {{-1, 0, 0}, {3, 11, 7, 8}},
    {{1, 0, 0}, {1, 10, 5, 9}},
}};

Vec3 corner_pos(int c) { return {double(kCorner[c][0]), double(kCorner[c][1]), double(kCorner[c][2])}; }
Vec3 edge_mid(int e) { return 0.5 * (corner_pos(kEdgeCorners[e][0]) + corner_pos(kEdgeCorners[e][1])); }

bool share_face(int e1, int e2) {
    for (const auto& face : kFaces) {
        const bool has1 = std::find(face.edges.begin(), face.edges.end(), e1) != face.edges.end();
        const bool has2 = std::find(face.edges.begin(), face.edges.end(), e2) != face.edges.end();
        if (has1 && has2) return true;
    }
    return false;
}

// Builds the triangulation of one configuration from face-local rules. On a face with two
// diagonal inside corners, each inside corner is cut off separately; the rule depends only
// on the face, so neighbouring cubes agree and the surface closes.
McCase build_case(unsigned mask) {
    auto inside = [mask](int c) { return ((mask >> c) & 1u) != 0; };
    auto crossing = [&](int e) { return inside(kEdgeCorners[e][0]) != inside(kEdgeCorners[e][1]); };

    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& face : kFaces) {
        std::vector<std::array<int, 2>> segments;
        std::vector<int> cross;
        for (int e : face.edges) {
            if (crossing(e)) cross.push_back(e);
        }
        if (cross.size() == 2) {
            segments.push_back({cross[0], cross[1]});
        } else if (cross.size() == 4) {
            for (int i = 0; i < 4; ++i) {
                const int e1 = face.edges[i];
                const int e2 = face.edges[(i + 1) % 4];
                // corner shared by consecutive face edges
                int shared = -1;
                for (int a : kEdgeCorners[e1]) {
                    for (int b : kEdgeCorners[e2]) {
                        if (a == b) shared = a;
                    }
                }
                if (inside(shared)) segments.push_back({e1, e2});
            }
        }
        const Vec3 n(face.normal[0], face.normal[1], face.normal[2]);
        for (auto seg : segments) {
            const int e1 = seg[0];
            const int c0 = kEdgeCorners[e1][0];
            const int c1 = kEdgeCorners[e1][1];
            const Vec3 in_to_out = inside(c0) ? Vec3(corner_pos(c1) - corner_pos(c0)) : Vec3(corner_pos(c0) - corner_pos(c1));
            const Vec3 d = edge_mid(seg[1]) - edge_mid(e1);
            if (in_to_out.cross(d).dot(n) > 0.0) std::swap(seg[0], seg[1]);
            if (next[seg[0]] != -1) throw std::logic_error("marching cubes table: inconsistent face segments");
            next[seg[0]] = seg[1];
        }
    }

    McCase out;
    std::array<bool, 12> visited{};
    for (int start = 0; start < 12; ++start) {
        if (next[start] < 0 || visited[start]) continue;
        std::vector<std::uint8_t> loop;
        int e = start;
        while (!visited[e]) {
            visited[e] = true;
            loop.push_back(static_cast<std::uint8_t>(e));
            e = next[e];
            if (e < 0) throw std::logic_error("marching cubes table: open loop");
        }
        const auto n = loop.size();
        // A fan diagonal between two non-adjacent loop vertices on the same cube face would
        // be shared with the neighbouring cube; pick an apex that avoids them, else fan
        // around the loop centroid.
        int apex = -1;
        for (std::size_t a = 0; a < n && apex < 0; ++a) {
            bool ok = true;
            for (std::size_t k = 2; k + 1 < n && ok; ++k) ok = !share_face(loop[a], loop[(a + k) % n]);
            if (ok) apex = static_cast<int>(a);
        }
        if (apex >= 0) {
            for (std::size_t k = 1; k + 1 < n; ++k) {
                out.triangles.push_back({loop[apex], loop[(apex + k) % n], loop[(apex + k + 1) % n]});
            }
        } else {
            const auto centroid = static_cast<std::uint8_t>(12 + out.loops.size());
            for (std::size_t k = 0; k < n; ++k) out.triangles.push_back({centroid, loop[k], loop[(k + 1) % n]});
        }
        out.loops.push_back(std::move(loop));
    }
    return out;
}

const std::array<McCase, 256>& case_table() {
    static const auto table = [] {
        std::array<McCase, 256> t;
        for (unsigned m = 0; m < 256; ++m) t[m] = build_case(m);
        return t;
    }();
    return table;
}

// Lattice edge leaving corner `c` of the cube along `axis`, for each cube edge.
constexpr std::array<std::array<int, 2>, 12> kEdgeOriginAxis = {{
    {0, 0}, {1, 1}, {3, 0}, {0, 1}, {4, 0}, {5, 1}, {7, 0}, {4, 1}, {0, 2}, {1, 2}, {2, 2}, {3, 2},
}};

}  // namespace

OccupancyGrid::OccupancyGrid(int r, const Aabb& box) : resolution(r), extent(box) {
    if (r < 2) throw DataError("occupancy grid resolution must be >= 2");
    values.assign(static_cast<std::size_t>(r) * r * r, 0.0f);
}

Vec3 OccupancyGrid::point(int ix, int iy, int iz) const {
    const double inv = 1.0 / (resolution - 1);
    return extent.min + extent.extent().cwiseProduct(Vec3(ix * inv, iy * inv, iz * inv));
}

void OccupancyGrid::validate() const {
    if (resolution < 2) throw DataError("occupancy grid resolution must be >= 2");
    const auto r = static_cast<std::size_t>(resolution);
    if (values.size() != r * r * r) throw DataError("occupancy grid value count does not equal R^3");
    if (!extent.min.allFinite() || !extent.max.allFinite() || !(extent.min.array() < extent.max.array()).all()) {
        throw DataError("occupancy grid extent must be finite with min < max");
    }
}

Aabb unit_cube_extent(double padding) {
    Aabb box;
    box.min = Vec3::Constant(-0.5 - padding);
    box.max = Vec3::Constant(0.5 + padding);
    return box;
}

const McCase& marching_cubes_case(std::uint8_t cube_index) {
    return case_table()[cube_index];
}

TriMesh marching_cubes(const OccupancyGrid& grid, double iso) {
    grid.validate();
    const auto& table = case_table();
    const int r = grid.resolution;
    TriMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

    auto vertex_on = [&](int ix, int iy, int iz, int cube_edge) -> std::uint32_t {
        const auto [corner, axis] = kEdgeOriginAxis[cube_edge];
        const int ax = ix + kCorner[corner][0];
        const int ay = iy + kCorner[corner][1];
        const int az = iz + kCorner[corner][2];
        const std::uint64_t key = static_cast<std::uint64_t>(grid.index(ax, ay, az)) * 3 + axis;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const int bx = ax + (axis == 0);
        const int by = ay + (axis == 1);
        const int bz = az + (axis == 2);
        const double va = grid.values[grid.index(ax, ay, az)];
        const double vb = grid.values[grid.index(bx, by, bz)];
        const double t = (iso - va) / (vb - va);
        const Vec3 pa = grid.point(ax, ay, az);
        const Vec3 pb = grid.point(bx, by, bz);
        const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int ix = 0; ix + 1 < r; ++ix) {
        for (int iy = 0; iy + 1 < r; ++iy) {
            for (int iz = 0; iz + 1 < r; ++iz) {
                unsigned mask = 0;
                for (int c = 0; c < 8; ++c) {
                    const float v = grid.values[grid.index(ix + kCorner[c][0], iy + kCorner[c][1], iz + kCorner[c][2])];
                    if (v > iso) mask |= 1u << c;
                }
                if (mask == 0 || mask == 255) continue;
                const McCase& c = table[mask];
                std::array<std::uint32_t, 16> ids{};
                for (const auto& loop : c.loops) {
                    for (auto e : loop) ids[e] = vertex_on(ix, iy, iz, e);
                }
                for (std::size_t l = 0; l < c.loops.size(); ++l) {
                    const bool needs_centroid = std::any_of(c.triangles.begin(), c.triangles.end(),
                                                            [&](const auto& t) { return t[0] == 12 + l; });
                    if (!needs_centroid) continue;
                    Vec3 centroid = Vec3::Zero();
                    for (auto e : c.loops[l]) centroid += mesh.vertices[ids[e]];
                    ids[12 + l] = static_cast<std::uint32_t>(mesh.vertices.size());
                    mesh.vertices.push_back(centroid / static_cast<double>(c.loops[l].size()));
                }
                for (const auto& tri : c.triangles) mesh.faces.push_back({ids[tri[0]], ids[tri[1]], ids[tri[2]]});
            }
        }
    }
    return mesh;
}

}  // namespace organdiff::geometry
