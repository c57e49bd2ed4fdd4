#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::geometry {

/// R^3 scalar samples on the lattice spanning `extent`, x-major:
/// values[(ix * R + iy) * R + iz] sits at extent.min + extent.extent() .* (ix, iy, iz) / (R - 1).
struct OccupancyGrid {
    int resolution = 0;
    Aabb extent;
    std::vector<float> values;

    OccupancyGrid() = default;
    OccupancyGrid(int r, const Aabb& box);

    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * resolution + iy) * resolution + iz;
    }
    Vec3 point(int ix, int iy, int iz) const;
    /// Throws DataError unless resolution >= 2, values.size() == R^3 and the extent is finite
    /// with min < max on every axis.
    void validate() const;
};

/// Cube [-0.5 - padding, 0.5 + padding]^3.
Aabb unit_cube_extent(double padding = 0.0);

/// Triangulation of one of the 256 corner configurations. Bit c of the case index is set
/// when corner c is inside; corners are 0 (0,0,0) 1 (1,0,0) 2 (1,1,0) 3 (0,1,0) 4 (0,0,1)
/// 5 (1,0,1) 6 (1,1,1) 7 (0,1,1). Triangle indices 0-11 are cube edges; 12 + l is the
/// centroid of loops[l], used only when no loop vertex can serve as a fan apex. Triangles
/// face toward lower values.
struct McCase {
    std::vector<std::array<std::uint8_t, 3>> triangles;
    std::vector<std::vector<std::uint8_t>> loops;
};

/// The case table is generated once from face-local rules: on a face whose two inside
/// corners are diagonal, each inside corner is cut off separately. Neighbouring cubes see
/// the same face rule, so the extracted surface closes.
const McCase& marching_cubes_case(std::uint8_t cube_index);

/// Iso-surface of `grid` at `iso` (corners with value > iso are inside). Vertices are shared
/// along lattice edges, so surfaces that stay off the grid boundary come out watertight.
/// A grid with no crossing yields an empty mesh.
TriMesh marching_cubes(const OccupancyGrid& grid, double iso = 0.5);

}  // namespace organdiff::geometry
