#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "organdiff/geometry/mesh.hpp"

namespace organdiff::geometry {

/// Dataset review status taxonomy. NoFullShape and NotSure are only ever assigned by humans.
enum class ShapeStatus { Usable, NoFullShape, NotUsable, NotSure, RequiresEditing };

inline constexpr std::array<ShapeStatus, 5> kAllStatuses = {ShapeStatus::Usable, ShapeStatus::NoFullShape,
                                                            ShapeStatus::NotUsable, ShapeStatus::NotSure,
                                                            ShapeStatus::RequiresEditing};

/// Machine identifier, e.g. "RequiresEditing".
std::string_view status_id(ShapeStatus s);
/// Report label, e.g. "Requires editing".
std::string_view status_label(ShapeStatus s);
/// Accepts either the identifier or the report label.
std::optional<ShapeStatus> parse_status(std::string_view text);

struct QaReport {
    std::size_t boundary_edge_count = 0;
    std::size_t edge_count = 0;
    std::size_t connected_components = 0;
    bool watertight = false;
    Vec3 bbox_extent = Vec3::Zero();
    std::size_t duplicate_vertex_count = 0;
    ShapeStatus suggested_status = ShapeStatus::NotUsable;
};

// Heuristic thresholds for suggested_status.
inline constexpr std::size_t kMaxUsableComponents = 3;
inline constexpr double kMaxBoundaryEdgeRatio = 0.2;

/// Edge incidence, union-find components and a suggested status:
/// NotUsable if components > 3 or boundary/edges > 0.2, RequiresEditing if any boundary edge
/// remains, else Usable.
QaReport qa_report(const TriMesh& mesh);

nlohmann::json to_json(const QaReport& report);

}  // namespace organdiff::geometry
