#pragma once

#include <string>

#include "transpose/geometry.hpp"

namespace transpose {

/// Rigid object with its vertices in the object frame (meters).
struct ObjectModel {
  std::string name;
  geom::PointCloud vertices;
  bool symmetric = false;
  double diameter = 0.0;

  /// Builds a model and derives its diameter; throws DataError for fewer
  /// than four vertices or a zero diameter.
  static ObjectModel make(std::string name, geom::PointCloud vertices, bool symmetric);
};

/// Largest pairwise vertex distance, exhaustive.
double max_pairwise_distance(const geom::PointCloud& points);

}  // namespace transpose
