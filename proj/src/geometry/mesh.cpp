#include "organdiff/geometry/mesh.hpp"

#include <cmath>
#include <map>
#include <string>

#include "organdiff/error.hpp"

namespace organdiff::geometry {

void TriMesh::validate() const {
    const auto n = vertices.size();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& face = faces[f];
        for (auto idx : face) {
            if (idx >= n) {
                throw DataError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                " but mesh has " + std::to_string(n) + " vertices");
            }
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            throw DataError("face " + std::to_string(f) + " is degenerate (repeated vertex index)");
        }
    }
}

Aabb bounding_box(const TriMesh& mesh) {
    Aabb box;
    for (const auto& v : mesh.vertices) box.expand(v);
    return box;
}

TriMesh normalize_to_unit_cube(const TriMesh& mesh, double fill) {
    if (mesh.vertices.empty()) throw EmptyMeshError("cannot normalize an empty mesh");
    const Aabb box = bounding_box(mesh);
    const double longest = box.extent().maxCoeff();
    if (!(longest > 0.0) || !std::isfinite(longest)) {
        throw DataError("cannot normalize a zero-extent mesh (all vertices coincide)");
    }
    const Vec3 center = box.center();
    const double scale = fill / longest;
    TriMesh out = mesh;
    for (auto& v : out.vertices) v = (v - center) * scale;
    return out;
}

TriMesh transformed(const TriMesh& mesh, const Vec3& scale, const Vec3& offset) {
    TriMesh out = mesh;
    for (auto& v : out.vertices) v = scale.cwiseProduct(v) + offset;
    if (scale.prod() < 0.0) {
        for (auto& f : out.faces) std::swap(f[1], f[2]);
    }
    return out;
}

void append(TriMesh& mesh, const TriMesh& other) {
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.insert(mesh.vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const auto& f : other.faces) mesh.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
}

Vec3 face_normal(const TriMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

double surface_area(const TriMesh& mesh) {
    double area = 0.0;
    for (const auto& f : mesh.faces) {
        const Vec3& a = mesh.vertices[f[0]];
        area += 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
    }
    return area;
}

double signed_volume(const TriMesh& mesh) {
    double vol = 0.0;
    for (const auto& f : mesh.faces) {
        vol += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
    }
    return vol / 6.0;
}

TriMesh make_icosphere(int subdivisions, double radius, const Vec3& center) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                  {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
               {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& v : m.vertices) v.normalize();

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end()) return it->second;
            const auto idx = static_cast<std::uint32_t>(m.vertices.size());
            m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            const auto ab = midpoint(f[0], f[1]);
            const auto bc = midpoint(f[1], f[2]);
            const auto ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        m.faces = std::move(next);
    }
    for (auto& v : m.vertices) v = v * radius + center;
    return m;
}

TriMesh make_ellipsoid(int subdivisions, const Vec3& semi_axes, const Vec3& center) {
    return transformed(make_icosphere(subdivisions, 1.0), semi_axes, center);
}

TriMesh make_box(const Vec3& h, const Vec3& c) {
    TriMesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.emplace_back(c.x() + ((i & 1) ? h.x() : -h.x()), c.y() + ((i & 2) ? h.y() : -h.y()),
                                c.z() + ((i & 4) ? h.z() : -h.z()));
    }
    // Two outward-facing triangles per side.
    m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6},   // -z, +z
               {0, 1, 4}, {1, 5, 4}, {2, 6, 3}, {3, 6, 7},   // -y, +y
               {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};  // -x, +x
    return m;
}

}  // namespace organdiff::geometry
