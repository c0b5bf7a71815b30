#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mvlloc/geometry.hpp"

namespace mvl {

/// Parses a 7-Scenes style pose: 16 whitespace-separated numbers forming a
/// row-major homogeneous 4x4 camera-to-world matrix. The bottom row must be
/// (0, 0, 0, 1) within 1e-6 and the rotation block must be a proper
/// rotation. Throws std::invalid_argument otherwise.
geo::Pose parse_7scenes_pose(std::string_view text);

/// Writes a pose in the same 4-line format, full round-trip precision.
std::string format_7scenes_pose(const geo::Pose& pose);

/// How quaternions in a Cambridge Landmarks index are interpreted. Positions
/// are camera centres in both cases.
enum class CambridgeConvention {
  /// Stored quaternion rotates world into camera; conjugated on ingestion.
  kWorldToCamera,
  /// Stored quaternion is already camera-to-world.
  kCameraToWorld,
};

struct CambridgeEntry {
  std::string image_path;
  geo::Pose pose;
};

/// Parses "path x y z qw qx qy qz" rows. Lines whose fields after the first
/// are not all numeric (titles, column headers, blanks) are skipped; a row
/// whose trailing fields are numeric but not exactly seven throws
/// std::invalid_argument naming the 1-based line number.
std::vector<CambridgeEntry> parse_cambridge_index(std::string_view text,
                                                  CambridgeConvention convention = CambridgeConvention::kWorldToCamera);

}  // namespace mvl
