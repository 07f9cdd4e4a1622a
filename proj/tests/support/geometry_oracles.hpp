#pragma once

// Brute-force references for sampling and neighbor queries.

#include <algorithm>
#include <limits>
#include <random>

#include "transpose/geometry.hpp"

namespace transpose::testing {

inline geom::PointCloud random_cloud(std::mt19937_64& rng, std::size_t m, bool lattice) {
  geom::PointCloud pc;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> g(-2, 2);
  for (std::size_t i = 0; i < m; ++i) {
    if (lattice) {
      pc.points.emplace_back(g(rng), g(rng), g(rng));  // many exact distance ties
    } else {
      pc.points.emplace_back(u(rng), u(rng), u(rng));
    }
  }
  return pc;
}

// Reference FPS: recompute every candidate's distance to the whole selected
// set at each step.
inline IndexList fps_oracle(const geom::PointCloud& pc, std::size_t n, std::uint64_t seed) {
  IndexList chosen{static_cast<std::size_t>(seed % pc.size())};
  while (chosen.size() < n) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) d = std::min(d, (pc[i] - pc[c]).squaredNorm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

// Reference K-NN: full stable sort on distance.
inline IndexList knn_oracle(const geom::PointCloud& ref, const geom::Vec3& q, std::size_t k) {
  IndexList idx(ref.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return (ref[a] - q).squaredNorm() < (ref[b] - q).squaredNorm(); });
  idx.resize(k);
  return idx;
}

}  // namespace transpose::testing
