#pragma once

#include <filesystem>
#include <string>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::geometry {

/// STL vertices closer than this are merged into one indexed vertex.
inline constexpr double kWeldTolerance = 1e-7;

/// Loads an ASCII OBJ (`v`/`f` records) or binary STL, dispatching on the file extension.
/// Throws ParseError (with line or byte offset) for malformed input and EmptyMeshError when
/// the file parses but holds no faces. Faces that collapse to fewer than three distinct
/// vertices are dropped.
TriMesh load_mesh(const std::filesystem::path& path);

TriMesh load_obj(const std::filesystem::path& path);
TriMesh parse_obj(const std::string& text, const std::string& origin = "<memory>");
TriMesh load_stl(const std::filesystem::path& path);
TriMesh parse_stl(const std::string& bytes, const std::string& origin = "<memory>");

void save_obj(const TriMesh& mesh, const std::filesystem::path& path);
std::string to_obj(const TriMesh& mesh);
std::string to_binary_stl(const TriMesh& mesh);

/// Merges vertices within `tolerance` of each other and remaps faces.
TriMesh weld_vertices(const TriMesh& mesh, double tolerance = kWeldTolerance);

}  // namespace organdiff::geometry
