#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "transpose/geometry.hpp"

namespace transpose::geom {

struct PlyCloud {
  PointCloud cloud;
  std::optional<NormalField> normals;
};

/// ASCII PLY with a single vertex element carrying x, y, z and optionally
/// nx, ny, nz. Other vertex properties are read and ignored; other elements
/// are skipped. Malformed input throws ParseError with the offending line.
PlyCloud read_ply(std::istream& in);
PlyCloud read_ply(const std::filesystem::path& path);

/// Round-trippable (17 significant digits). Written atomically.
void write_ply(std::ostream& out, const PointCloud& cloud, const NormalField* normals = nullptr);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, const NormalField* normals = nullptr);

/// Binary P5 with maxval 65535 and little-endian samples.
DepthImage read_depth_pgm(const std::filesystem::path& path);
void write_depth_pgm(const std::filesystem::path& path, const DepthImage& image);

}  // namespace transpose::geom
