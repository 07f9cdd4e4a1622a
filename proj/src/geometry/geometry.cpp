#include "transpose/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "transpose/errors.hpp"

namespace transpose::geom {

namespace {

double angle_between(const Vec3& a, const Vec3& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  return std::acos(std::clamp(a.dot(b) / denom, -1.0, 1.0));
}

/// The k smallest (distance^2, index) pairs of `d2`, ascending.
void k_smallest(const std::vector<double>& d2, std::size_t k, std::vector<std::size_t>& order) {
  order.resize(d2.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&d2](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
  order.resize(k);
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera intrinsics: focal lengths must be positive");
  if (!(depth_scale > 0.0)) throw ConfigError("camera intrinsics: depth_scale must be positive");
}

PointCloud backproject(const DepthImage& depth, const Mask& mask, const CameraIntrinsics& K) {
  K.validate();
  if (depth.width != mask.width || depth.height != mask.height) {
    throw DimensionError("backproject: depth and mask dimensions differ");
  }
  PointCloud pc;
  for (std::size_t v = 0; v < depth.height; ++v) {
    for (std::size_t u = 0; u < depth.width; ++u) {
      const std::uint16_t d = depth.at(u, v);
      if (!mask.at(u, v) || d == 0) continue;
      const double z = static_cast<double>(d) * K.depth_scale;
      pc.points.emplace_back((static_cast<double>(u) - K.cx) * z / K.fx, (static_cast<double>(v) - K.cy) * z / K.fy, z);
    }
  }
  if (pc.empty()) throw GeometryError("backproject: no masked pixel carries a valid depth");
  return pc;
}

Eigen::Vector2d project(const Vec3& p, const CameraIntrinsics& K) {
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

NormalField estimate_normals(const PointCloud& pc, std::size_t k, const Vec3& viewpoint) {
  if (k < 3 || k >= pc.size()) {
    throw CountError("estimate_normals: need size() > k >= 3 (size " + std::to_string(pc.size()) + ", k " +
                     std::to_string(k) + ")");
  }
  const IndexMatrix nbrs = knn(pc, pc, k);
  NormalField field;
  field.normals.resize(pc.size());
  Eigen::SelfAdjointEigenSolver<Mat3> solver;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    Vec3 mean = Vec3::Zero();
    for (std::size_t j : nbrs.row(i)) mean += pc[j];
    mean /= static_cast<double>(k);
    Mat3 cov = Mat3::Zero();
    for (std::size_t j : nbrs.row(i)) {
      const Vec3 d = pc[j] - mean;
      cov += d * d.transpose();
    }
    solver.compute(cov);
    const Vec3 ev = solver.eigenvalues();  // ascending
    if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2]) {
      field.normals[i] = Vec3::UnitZ();
      ++field.degenerate;
      continue;
    }
    Vec3 n = solver.eigenvectors().col(0).normalized();
    if (n.dot(viewpoint - pc[i]) < 0.0) n = -n;
    field.normals[i] = n;
  }
  return field;
}

IndexList fps(const PointCloud& pc, std::size_t n, std::uint64_t seed) {
  const std::size_t m = pc.size();
  if (n == 0 || n > m) {
    throw CountError("fps: requested " + std::to_string(n) + " of " + std::to_string(m) + " points");
  }
  IndexList chosen;
  chosen.reserve(n);
  std::vector<double> min_d2(m, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(m, false);
  std::size_t current = static_cast<std::size_t>(seed % m);
  for (std::size_t step = 0; step < n; ++step) {
    chosen.push_back(current);
    taken[current] = true;
    if (step + 1 == n) break;
    std::size_t best = m;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (taken[i]) continue;
      min_d2[i] = std::min(min_d2[i], (pc[i] - pc[current]).squaredNorm());
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    current = best;
  }
  return chosen;
}

IndexMatrix knn(const PointCloud& reference, const PointCloud& queries, std::size_t k) {
  if (k == 0 || k > reference.size()) {
    throw CountError("knn: k = " + std::to_string(k) + " with " + std::to_string(reference.size()) + " reference points");
  }
  IndexMatrix out(queries.size(), k);
  std::vector<double> d2(reference.size());
  std::vector<std::size_t> order;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t i = 0; i < reference.size(); ++i) d2[i] = (reference[i] - queries[q]).squaredNorm();
    k_smallest(d2, k, order);
    std::copy(order.begin(), order.end(), &out(q, 0));
  }
  return out;
}

IndexMatrix knn_excluding_self(const PointCloud& reference, const IndexList& query_index, std::size_t k) {
  if (k == 0 || k + 1 > reference.size()) {
    throw CountError("knn: k = " + std::to_string(k) + " (self excluded) with " + std::to_string(reference.size()) +
                     " reference points");
  }
  IndexMatrix out(query_index.size(), k);
  std::vector<double> d2(reference.size());
  std::vector<std::size_t> order;
  for (std::size_t q = 0; q < query_index.size(); ++q) {
    const std::size_t self = query_index[q];
    if (self >= reference.size()) throw IndexError("knn: query index out of range");
    for (std::size_t i = 0; i < reference.size(); ++i) d2[i] = (reference[i] - reference[self]).squaredNorm();
    k_smallest(d2, k + 1, order);
    auto it = std::find(order.begin(), order.end(), self);
    if (it != order.end()) {
      order.erase(it);
    } else {
      order.pop_back();  // duplicates of the query point filled the neighborhood
    }
    std::copy(order.begin(), order.end(), &out(q, 0));
  }
  return out;
}

Eigen::Vector4d ppf(const Vec3& p_i, const Vec3& n_i, const Vec3& p_j, const Vec3& n_j) {
  const Vec3 d = p_j - p_i;
  const double dist = d.norm();
  if (dist == 0.0) return {0.0, 0.0, angle_between(n_i, n_j), 0.0};
  return {angle_between(n_i, d), angle_between(n_j, d), angle_between(n_i, n_j), dist};
}

Vec3 barycenter(const PointCloud& pc) {
  if (pc.empty()) throw GeometryError("barycenter: empty cloud");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : pc.points) sum += p;
  return sum / static_cast<double>(pc.size());
}

UnitQuaternion normalize_quat(const Eigen::Vector4d& raw) {
  const double norm = raw.norm();
  if (!(norm > kQuaternionEps)) throw GeometryError("normalize_quat: degenerate quaternion");
  return {{raw[0] / norm, raw[1] / norm, raw[2] / norm, raw[3] / norm}};
}

Mat3 quat_to_rot(const UnitQuaternion& quat) {
  const double x = quat[0], y = quat[1], z = quat[2], w = quat[3];
  // Dividing by the squared norm absorbs the rounding of the components, so
  // axis-aligned quarter turns come out exact.
  const double s = 2.0 / (x * x + y * y + z * z + w * w);
  Mat3 R;
  R << 1.0 - s * (y * y + z * z), s * (x * y - z * w), s * (x * z + y * w),
      s * (x * y + z * w), 1.0 - s * (x * x + z * z), s * (y * z - x * w),
      s * (x * z - y * w), s * (y * z + x * w), 1.0 - s * (x * x + y * y);
  return R;
}

UnitQuaternion rot_to_quat(const Mat3& R) {
  // Shepperd: pick the largest of the four squared components for stability.
  const double tr = R.trace();
  Eigen::Vector4d q;  // (x, y, z, w)
  if (tr >= R(0, 0) && tr >= R(1, 1) && tr >= R(2, 2)) {
    const double s = std::sqrt(1.0 + tr) * 2.0;
    q << (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s, 0.25 * s;
  } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
    const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
    q << 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s, (R(2, 1) - R(1, 2)) / s;
  } else if (R(1, 1) >= R(2, 2)) {
    const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
    q << (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s, (R(0, 2) - R(2, 0)) / s;
  } else {
    const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
    q << (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s, (R(1, 0) - R(0, 1)) / s;
  }
  if (q[3] < 0.0) q = -q;
  return normalize_quat(q);
}

PointCloud apply_transform(const RigidTransform& T, const PointCloud& pc) {
  PointCloud out;
  out.points.reserve(pc.size());
  for (const Vec3& p : pc.points) out.points.push_back(T.apply(p));
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) { return {a.R * b.R, a.R * b.t + a.t}; }

RigidTransform invert(const RigidTransform& T) {
  const Mat3 Rt = T.R.transpose();
  return {Rt, -(Rt * T.t)};
}

double orthonormality_error(const Mat3& R) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(R.determinant() - 1.0));
}

bool is_rotation(const Mat3& R, double tol) { return R.allFinite() && orthonormality_error(R) <= tol; }

PointCloud select(const PointCloud& pc, const IndexList& idx) {
  PointCloud out;
  out.points.reserve(idx.size());
  for (std::size_t i : idx) out.points.push_back(pc.points.at(i));
  return out;
}

NormalField select(const NormalField& normals, const IndexList& idx) {
  NormalField out;
  out.normals.reserve(idx.size());
  for (std::size_t i : idx) out.normals.push_back(normals.normals.at(i));
  return out;
}

}  // namespace transpose::geom
