#pragma once

// Small mesh corpora written to disk for the pipeline, CLI and acceptance tests.

#include <filesystem>
#include <fstream>
#include <string>

#include "organdiff/geometry/mesh.hpp"
#include "organdiff/geometry/mesh_io.hpp"

namespace fixture {

namespace fs = std::filesystem;
using organdiff::geometry::Vec3;
using organdiff::geometry::TriMesh;

inline fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("organdiff_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

/// Icosphere with its first `holes` faces removed.
inline TriMesh holed_sphere(int holes = 6) {
    auto m = organdiff::geometry::make_icosphere(3, 0.3);
    m.faces.erase(m.faces.begin(), m.faces.begin() + holes);
    return m;
}

/// Two spheres plus four loose triangles: six components.
inline TriMesh six_components() {
    using organdiff::geometry::append;
    auto m = organdiff::geometry::make_icosphere(2, 0.15, Vec3(-0.2, 0, 0));
    append(m, organdiff::geometry::make_icosphere(2, 0.15, Vec3(0.2, 0, 0)));
    for (int k = 0; k < 4; ++k) {
        TriMesh t;
        const double z = 0.3 + 0.03 * k;
        t.vertices = {Vec3(0, 0, z), Vec3(0.02, 0, z), Vec3(0, 0.02, z)};
        t.faces = {{0, 1, 2}};
        append(m, t);
    }
    return m;
}

/// closed.obj, holed.obj, multi.obj and empty.obj.
inline void write_qa_corpus(const fs::path& dir) {
    organdiff::geometry::save_obj(organdiff::geometry::make_icosphere(3, 0.3), dir / "closed.obj");
    organdiff::geometry::save_obj(holed_sphere(), dir / "holed.obj");
    organdiff::geometry::save_obj(six_components(), dir / "multi.obj");
    write_text(dir / "empty.obj", "");
}

/// `n` closed ellipsoids of varied semi-axes named shape_00.obj...
inline void write_ellipsoid_corpus(const fs::path& dir, int n) {
    for (int i = 0; i < n; ++i) {
        const Vec3 axes(0.2 + 0.02 * (i % 5), 0.15 + 0.03 * (i % 3), 0.12 + 0.02 * (i % 4));
        char name[32];
        std::snprintf(name, sizeof(name), "shape_%02d.obj", i);
        organdiff::geometry::save_obj(organdiff::geometry::make_ellipsoid(2, axes), dir / name);
    }
}

}  // namespace fixture
