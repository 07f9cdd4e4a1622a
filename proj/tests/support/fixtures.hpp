#pragma once

#include <random>

#include "transpose/geometry.hpp"
#include "transpose/net/pose_net.hpp"

namespace transpose::testing {

struct OrientedCloud {
  geom::PointCloud cloud;
  geom::NormalField normals;
};

/// Points on an ellipsoid (semi-axes in meters) around `center`, with
/// analytic outward normals.
inline OrientedCloud ellipsoid_cloud(std::mt19937_64& rng, std::size_t m, const geom::Vec3& axes,
                                     const geom::Vec3& center = geom::Vec3(0.0, 0.0, 0.8)) {
  std::normal_distribution<double> g(0.0, 1.0);
  OrientedCloud out;
  for (std::size_t i = 0; i < m; ++i) {
    const geom::Vec3 u = geom::Vec3(g(rng), g(rng), g(rng)).normalized();
    const geom::Vec3 p = u.cwiseProduct(axes);
    out.cloud.points.push_back(p + center);
    out.normals.normals.push_back(p.cwiseQuotient(axes.cwiseProduct(axes)).normalized());
  }
  return out;
}

/// Small network for exhaustive gradient checks: 16 -> 8 centers, width 16,
/// one encoder layer.
inline net::NetworkConfig tiny_network() {
  net::NetworkConfig cfg;
  cfg.embed.initial_centers = 16;
  cfg.embed.k_neighbors = {8, 4};
  cfg.embed.widths = {16, 16};
  cfg.embed.downsample = {2};
  cfg.embed.d_in = 16;
  cfg.encoder.layers = 1;
  cfg.encoder.heads = 2;
  cfg.encoder.d_model = 16;
  cfg.encoder.k_feature = 4;
  cfg.head.hidden0 = 32;
  cfg.head.hidden1 = 16;
  return cfg;
}

inline geom::Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return geom::quat_to_rot(geom::normalize_quat(Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng))));
}

}  // namespace transpose::testing
