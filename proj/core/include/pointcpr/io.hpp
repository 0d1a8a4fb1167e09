#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "pointcpr/geometry.hpp"

namespace pointcpr {

enum class CloudFormat { xyz, ply, off };

std::string to_string(CloudFormat format);
/// "xyz", "ply" or "off" (case-insensitive). Throws ArgumentError otherwise.
CloudFormat parse_format(std::string_view name);
/// Format implied by the file extension. Throws ArgumentError if unknown.
CloudFormat format_from_path(std::string_view path);

/// XYZ: one point per line, at least three numeric columns (extra columns
/// such as normals are ignored), blank lines and `#` comments skipped.
/// PLY: ascii only; the vertex element must carry scalar x, y, z properties.
/// OFF: header keyword, counts line, vertex list; faces are ignored.
/// Throws ParseError naming `source` and the offending line.
PointCloud parse_pointcloud(std::string_view text, CloudFormat format, const std::string& source = "<input>");

/// Reads `path`, inferring the format from its extension unless given.
PointCloud read_pointcloud(const std::string& path, std::optional<CloudFormat> format = std::nullopt);

/// Coordinates are written with 17 significant digits so parsing the
/// result reproduces the cloud exactly.
std::string format_pointcloud(const PointCloud& pc, CloudFormat format);
void write_pointcloud(const std::string& path, const PointCloud& pc,
                      std::optional<CloudFormat> format = std::nullopt);

}  // namespace pointcpr
