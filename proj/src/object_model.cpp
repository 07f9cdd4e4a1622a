#include "transpose/object_model.hpp"

#include <algorithm>
#include <cmath>

#include "transpose/errors.hpp"

namespace transpose {

double max_pairwise_distance(const geom::PointCloud& points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::max(best, (points[i] - points[j]).squaredNorm());
  }
  return std::sqrt(best);
}

ObjectModel ObjectModel::make(std::string name, geom::PointCloud vertices, bool symmetric) {
  if (vertices.size() < 4) throw DataError("model '" + name + "' needs at least 4 vertices");
  const double diameter = max_pairwise_distance(vertices);
  if (!(diameter > 0.0)) throw DataError("model '" + name + "' has zero diameter");
  return {std::move(name), std::move(vertices), symmetric, diameter};
}

}  // namespace transpose
