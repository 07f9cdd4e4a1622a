#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <vector>

#include "transpose/index_matrix.hpp"

namespace transpose::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Points in meters, camera frame unless stated otherwise.
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }
};

/// Unit normals aligned with a PointCloud's indices.
struct NormalField {
  std::vector<Vec3> normals;
  /// Neighborhoods whose covariance had rank < 2; their normal is (0, 0, 1).
  std::size_t degenerate = 0;

  std::size_t size() const { return normals.size(); }
  const Vec3& operator[](std::size_t i) const { return normals[i]; }
};

/// Components (q0, q1, q2, q3) of q = q3 + q0 i + q1 j + q2 k.
struct UnitQuaternion {
  std::array<double, 4> q{0.0, 0.0, 0.0, 1.0};

  double operator[](std::size_t i) const { return q[i]; }
  UnitQuaternion operator-() const { return {{-q[0], -q[1], -q[2], -q[3]}}; }
};

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  Vec3 apply(const Vec3& p) const { return R * p + t; }
};

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  /// Meters per stored depth unit.
  double depth_scale = 0.001;

  void validate() const;
};

struct DepthImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint16_t> depth;  // row-major, 0 = invalid

  std::uint16_t at(std::size_t u, std::size_t v) const { return depth[v * width + u]; }
};

struct Mask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> valid;  // row-major, nonzero = object

  bool at(std::size_t u, std::size_t v) const { return valid[v * width + u] != 0; }
};

/// Pinhole backprojection of every masked pixel with nonzero depth, in
/// row-major pixel order. Throws GeometryError if no pixel qualifies.
PointCloud backproject(const DepthImage& depth, const Mask& mask, const CameraIntrinsics& K);

/// Pixel coordinates (u, v) of a camera-frame point.
Eigen::Vector2d project(const Vec3& p, const CameraIntrinsics& K);

/// Local-PCA normals from the k nearest neighbors (self included), oriented so
/// that n . (viewpoint - p) >= 0. Requires size() > k >= 3.
NormalField estimate_normals(const PointCloud& pc, std::size_t k, const Vec3& viewpoint);

/// Greedy farthest-point sampling starting at index seed % M; ties go to the
/// lowest index.
IndexList fps(const PointCloud& pc, std::size_t n, std::uint64_t seed);

/// For each query, indices of the k nearest reference points in ascending
/// distance, ties broken by lower index. Brute force.
IndexMatrix knn(const PointCloud& reference, const PointCloud& queries, std::size_t k);

/// K-NN where every query is a reference point (`query_index` into
/// `reference`) and that point itself is excluded from its neighborhood.
IndexMatrix knn_excluding_self(const PointCloud& reference, const IndexList& query_index, std::size_t k);

/// Point pair feature (angle(n_i, d), angle(n_j, d), angle(n_i, n_j), |d|)
/// with d = p_j - p_i. For coincident points the first two angles are 0.
Eigen::Vector4d ppf(const Vec3& p_i, const Vec3& n_i, const Vec3& p_j, const Vec3& n_j);

Vec3 barycenter(const PointCloud& pc);

inline constexpr double kQuaternionEps = 1e-8;
/// Throws GeometryError when |raw| <= 1e-8.
UnitQuaternion normalize_quat(const Eigen::Vector4d& raw);
Mat3 quat_to_rot(const UnitQuaternion& q);
UnitQuaternion rot_to_quat(const Mat3& R);

PointCloud apply_transform(const RigidTransform& T, const PointCloud& pc);
/// compose(a, b) applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& T);

/// Max |R^T R - I| entry and |det R - 1|.
double orthonormality_error(const Mat3& R);
bool is_rotation(const Mat3& R, double tol = 1e-9);

PointCloud select(const PointCloud& pc, const IndexList& idx);
NormalField select(const NormalField& normals, const IndexList& idx);

}  // namespace transpose::geom
