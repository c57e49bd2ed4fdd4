#include "organdiff/geometry/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "organdiff/error.hpp"

namespace organdiff::geometry {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mesh file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) out.push_back(s.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end;
}

// Drops faces with repeated indices (e.g. produced by welding slivers).
void drop_degenerate(TriMesh& mesh) {
    std::erase_if(mesh.faces, [](const Face& f) { return f[0] == f[1] || f[1] == f[2] || f[0] == f[2]; });
}

template <typename T>
T read_le(const char* p) {
    T value;
    std::memcpy(&value, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&value);
        std::reverse(b, b + sizeof(T));
    }
    return value;
}

template <typename T>
void write_le(std::string& out, T value) {
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&value);
        std::reverse(b, b + sizeof(T));
    }
    out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const noexcept {
        std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
        h ^= static_cast<std::size_t>(k.y) * 19349663u;
        h ^= static_cast<std::size_t>(k.z) * 83492791u;
        return h;
    }
};

}  // namespace

TriMesh parse_obj(const std::string& text, const std::string& origin) {
    TriMesh mesh;
    struct PendingFace {
        std::vector<long long> refs;
        std::size_t line;
    };
    std::vector<PendingFace> pending;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        ++line_no;
        std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty() || line.front() == '#') continue;

        const auto tokens = split_ws(line);
        if (tokens[0] == "v") {
            if (tokens.size() < 4) throw ParseError(origin, line_no, true, "vertex record needs 3 coordinates");
            Vec3 v;
            for (int k = 0; k < 3; ++k) {
                if (!parse_number(tokens[k + 1], v[k]) || !std::isfinite(v[k])) {
                    throw ParseError(origin, line_no, true, "invalid vertex coordinate '" + std::string(tokens[k + 1]) + "'");
                }
            }
            mesh.vertices.push_back(v);
        } else if (tokens[0] == "f") {
            if (tokens.size() < 4) throw ParseError(origin, line_no, true, "face record needs at least 3 vertices");
            PendingFace face{{}, line_no};
            const auto nverts = static_cast<long long>(mesh.vertices.size());
            for (std::size_t k = 1; k < tokens.size(); ++k) {
                std::string_view ref = tokens[k].substr(0, tokens[k].find('/'));
                long long idx = 0;
                if (!parse_number(ref, idx)) {
                    throw ParseError(origin, line_no, true, "invalid face index '" + std::string(tokens[k]) + "'");
                }
                if (idx == 0) throw ParseError(origin, line_no, true, "face index 0 is invalid (OBJ indices are 1-based)");
                face.refs.push_back(idx > 0 ? idx - 1 : nverts + idx);
            }
            pending.push_back(std::move(face));
        }
        // vt, vn, o, g, s, usemtl, mtllib and other records carry nothing we use.
    }

    const auto nverts = static_cast<long long>(mesh.vertices.size());
    for (const auto& face : pending) {
        for (long long r : face.refs) {
            if (r < 0 || r >= nverts) {
                throw ParseError(origin, face.line, true, "face index out of range (" + std::to_string(nverts) + " vertices)");
            }
        }
        for (std::size_t k = 1; k + 1 < face.refs.size(); ++k) {
            mesh.faces.push_back({static_cast<std::uint32_t>(face.refs[0]), static_cast<std::uint32_t>(face.refs[k]),
                                  static_cast<std::uint32_t>(face.refs[k + 1])});
        }
    }
    drop_degenerate(mesh);
    if (mesh.faces.empty()) throw EmptyMeshError(origin + ": mesh has no faces");
    return mesh;
}

TriMesh load_obj(const std::filesystem::path& path) { return parse_obj(read_file(path), path.string()); }

TriMesh parse_stl(const std::string& bytes, const std::string& origin) {
    constexpr std::size_t kHeader = 80;
    constexpr std::size_t kRecord = 50;
    if (bytes.size() < kHeader + 4) {
        if (bytes.empty()) throw EmptyMeshError(origin + ": empty file");
        throw ParseError(origin, bytes.size(), false, "truncated STL header");
    }
    const auto count = read_le<std::uint32_t>(bytes.data() + kHeader);
    const std::size_t expected = kHeader + 4 + static_cast<std::size_t>(count) * kRecord;
    if (bytes.size() < expected) {
        const bool ascii = bytes.compare(0, 5, "solid") == 0;
        const std::size_t bad_record = (bytes.size() - kHeader - 4) / kRecord;
        throw ParseError(origin, kHeader + 4 + bad_record * kRecord, false,
                         ascii ? "ASCII STL is not supported (binary STL expected)"
                               : "truncated STL: expected " + std::to_string(count) + " triangles");
    }
    if (count == 0) throw EmptyMeshError(origin + ": STL holds no triangles");

    TriMesh soup;
    soup.vertices.reserve(count * 3);
    soup.faces.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const char* rec = bytes.data() + kHeader + 4 + static_cast<std::size_t>(t) * kRecord;
        for (int v = 0; v < 3; ++v) {
            Vec3 p;
            for (int k = 0; k < 3; ++k) p[k] = read_le<float>(rec + 12 + v * 12 + k * 4);
            if (!p.allFinite()) throw ParseError(origin, rec - bytes.data(), false, "non-finite vertex coordinate");
            soup.vertices.push_back(p);
        }
        soup.faces.push_back({3 * t, 3 * t + 1, 3 * t + 2});
    }
    TriMesh mesh = weld_vertices(soup);
    drop_degenerate(mesh);
    if (mesh.faces.empty()) throw EmptyMeshError(origin + ": all STL triangles are degenerate");
    return mesh;
}

TriMesh load_stl(const std::filesystem::path& path) { return parse_stl(read_file(path), path.string()); }

TriMesh load_mesh(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".obj") return load_obj(path);
    if (ext == ".stl") return load_stl(path);
    throw DataError("unsupported mesh format '" + ext + "' (expected .obj or .stl): " + path.string());
}

TriMesh weld_vertices(const TriMesh& mesh, double tolerance) {
    const double cell = std::max(tolerance, 1e-12) * 4.0;
    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> grid;
    std::vector<std::uint32_t> remap(mesh.vertices.size());
    TriMesh out;
    const double tol2 = tolerance * tolerance;

    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        const CellKey key{static_cast<std::int64_t>(std::floor(p.x() / cell)),
                          static_cast<std::int64_t>(std::floor(p.y() / cell)),
                          static_cast<std::int64_t>(std::floor(p.z() / cell))};
        std::int64_t found = -1;
        for (int dx = -1; dx <= 1 && found < 0; ++dx) {
            for (int dy = -1; dy <= 1 && found < 0; ++dy) {
                for (int dz = -1; dz <= 1 && found < 0; ++dz) {
                    auto it = grid.find({key.x + dx, key.y + dy, key.z + dz});
                    if (it == grid.end()) continue;
                    for (auto cand : it->second) {
                        if ((out.vertices[cand] - p).squaredNorm() <= tol2) {
                            found = cand;
                            break;
                        }
                    }
                }
            }
        }
        if (found < 0) {
            found = static_cast<std::int64_t>(out.vertices.size());
            out.vertices.push_back(p);
            grid[key].push_back(static_cast<std::uint32_t>(found));
        }
        remap[i] = static_cast<std::uint32_t>(found);
    }
    out.faces.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces) out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
    return out;
}

std::string to_obj(const TriMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
    char buf[128];
    for (const auto& v : mesh.vertices) {
        const int n = std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        out.append(buf, static_cast<std::size_t>(n));
    }
    for (const auto& f : mesh.faces) {
        const int n = std::snprintf(buf, sizeof(buf), "f %u %u %u\n", f[0] + 1, f[1] + 1, f[2] + 1);
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write mesh file: " + path.string());
    out << to_obj(mesh);
    if (!out) throw DataError("failed writing mesh file: " + path.string());
}

std::string to_binary_stl(const TriMesh& mesh) {
    std::string out(80, '\0');
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.faces.size()));
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Vec3 n = face_normal(mesh, f);
        for (int k = 0; k < 3; ++k) write_le<float>(out, static_cast<float>(n[k]));
        for (auto idx : mesh.faces[f]) {
            for (int k = 0; k < 3; ++k) write_le<float>(out, static_cast<float>(mesh.vertices[idx][k]));
        }
        write_le<std::uint16_t>(out, 0);
    }
    return out;
}

}  // namespace organdiff::geometry
