#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "transpose/errors.hpp"
#include "transpose/geometry.hpp"
#include "transpose/geometry_io.hpp"
#include "support/geometry_oracles.hpp"

using namespace transpose;
using namespace transpose::geom;
using namespace transpose::testing;

namespace {

Eigen::Vector4d random_unit_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {quat_to_rot(normalize_quat(random_unit_quat(rng))), Vec3(u(rng), u(rng), u(rng))};
}

// Rotation by Hamilton conjugation q v q*, written independently of the
// closed-form matrix.
Vec3 rotate_by_conjugation(const Eigen::Vector4d& q, const Vec3& v) {
  auto mul = [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    const Vec3 av = a.head<3>(), bv = b.head<3>();
    Eigen::Vector4d out;
    out.head<3>() = a[3] * bv + b[3] * av + av.cross(bv);
    out[3] = a[3] * b[3] - av.dot(bv);
    return out;
  };
  const Eigen::Vector4d conj(-q[0], -q[1], -q[2], q[3]);
  return mul(mul(q, Eigen::Vector4d(v.x(), v.y(), v.z(), 0.0)), conj).head<3>();
}

}  // namespace

TEST_CASE("fps matches the brute-force greedy oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 20 + trial % 60;
    const PointCloud pc = random_cloud(rng, m, trial % 2 == 0);
    const std::size_t n = 1 + trial % m;
    const std::uint64_t seed = rng();
    REQUIRE(fps(pc, n, seed) == fps_oracle(pc, n, seed));
  }
}

TEST_CASE("fps covers the cloud and validates n") {
  std::mt19937_64 rng(3);
  const PointCloud pc = random_cloud(rng, 30, false);
  IndexList all = fps(pc, 30, 5);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 30; ++i) CHECK(all[i] == i);
  CHECK(fps(pc, 1, 47)[0] == 47 % 30);
  CHECK_THROWS_AS(fps(pc, 31, 0), CountError);
  CHECK_THROWS_AS(fps(pc, 0, 0), CountError);
}

TEST_CASE("knn matches the exhaustive oracle including ties") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 10 + trial % 50;
    const PointCloud ref = random_cloud(rng, m, trial % 2 == 0);
    const PointCloud queries = random_cloud(rng, 7, trial % 3 == 0);
    const std::size_t k = 1 + trial % m;
    const IndexMatrix got = knn(ref, queries, k);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const IndexList expect = knn_oracle(ref, queries[q], k);
      REQUIRE(IndexList(got.row(q).begin(), got.row(q).end()) == expect);
    }
  }
}

TEST_CASE("knn includes self; the excluding variant drops it") {
  std::mt19937_64 rng(4);
  const PointCloud pc = random_cloud(rng, 40, false);
  const IndexMatrix with_self = knn(pc, pc, 5);
  IndexList all(pc.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const IndexMatrix without = knn_excluding_self(pc, all, 4);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    CHECK(with_self(i, 0) == i);
    for (std::size_t j = 0; j < 4; ++j) CHECK(without(i, j) == with_self(i, j + 1));
  }
  CHECK_THROWS_AS(knn(pc, pc, 41), CountError);
  CHECK_THROWS_AS(knn_excluding_self(pc, all, 40), CountError);
}

TEST_CASE("knn_excluding_self with duplicated points never returns the query") {
  PointCloud pc;
  for (int i = 0; i < 5; ++i) pc.points.emplace_back(0.0, 0.0, 0.0);
  pc.points.emplace_back(1.0, 0.0, 0.0);
  const IndexMatrix nb = knn_excluding_self(pc, {3}, 4);
  CHECK(IndexList(nb.row(0).begin(), nb.row(0).end()) == IndexList{0, 1, 2, 4});
}

TEST_CASE("ppf is invariant under rigid motions") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p1(n(rng), n(rng), n(rng)), p2(n(rng), n(rng), n(rng));
    const Vec3 n1 = Vec3(n(rng), n(rng), n(rng)).normalized(), n2 = Vec3(n(rng), n(rng), n(rng)).normalized();
    const RigidTransform T = random_transform(rng);
    const Eigen::Vector4d a = ppf(p1, n1, p2, n2);
    const Eigen::Vector4d b = ppf(T.apply(p1), T.R * n1, T.apply(p2), T.R * n2);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("ppf hand cases") {
  const Vec3 z = Vec3::UnitZ(), x = Vec3::UnitX();
  const Eigen::Vector4d f = ppf(Vec3::Zero(), z, Vec3(2.0, 0.0, 0.0), x);
  CHECK(f[0] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(0.0));
  CHECK(f[2] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  CHECK(f[3] == 2.0);
  const Eigen::Vector4d same = ppf(Vec3(1, 1, 1), z, Vec3(1, 1, 1), -z);
  CHECK(same[0] == 0.0);
  CHECK(same[1] == 0.0);
  CHECK(same[2] == doctest::Approx(std::numbers::pi));
  CHECK(same[3] == 0.0);
  // Clamping keeps acos finite for parallel unit vectors.
  const Vec3 d = Vec3(0.1, 0.2, 0.3).normalized();
  const Eigen::Vector4d par = ppf(Vec3::Zero(), d, 3.0 * d, d);
  CHECK(std::isfinite(par[0]));
  CHECK(par[0] < 1e-7);
}

TEST_CASE("quaternions map to proper rotations") {
  std::mt19937_64 rng(31);
  double worst_ortho = 0.0, worst_sign = 0.0, worst_conj = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector4d raw = random_unit_quat(rng) * std::exp(std::normal_distribution<double>(0.0, 1.0)(rng));
    const UnitQuaternion q = normalize_quat(raw);
    const Mat3 R = quat_to_rot(q);
    worst_ortho = std::max(worst_ortho, orthonormality_error(R));
    worst_sign = std::max(worst_sign, (R - quat_to_rot(-q)).cwiseAbs().maxCoeff());
    const Eigen::Vector4d qv(q[0], q[1], q[2], q[3]);
    for (int c = 0; c < 3; ++c) {
      worst_conj = std::max(worst_conj, (R.col(c) - rotate_by_conjugation(qv, Vec3::Unit(c))).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst_ortho < 1e-12);
  CHECK(worst_sign == 0.0);
  CHECK(worst_conj < 1e-12);
}

TEST_CASE("quaternion special cases") {
  CHECK(quat_to_rot(UnitQuaternion{}) == Mat3::Identity());
  const double s = std::sin(std::numbers::pi / 4), c = std::cos(std::numbers::pi / 4);
  Mat3 expect;
  expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  // sin and cos of pi/4 round to different doubles, so only near-exact here.
  CHECK((quat_to_rot(UnitQuaternion{{0, 0, s, c}}) - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(quat_to_rot(normalize_quat(Eigen::Vector4d(0, 0, 1, 1))) == expect);
  Mat3 about_x;
  about_x << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK(quat_to_rot(normalize_quat(Eigen::Vector4d(1, 0, 0, 1))) == about_x);
  CHECK_THROWS_AS(normalize_quat(Eigen::Vector4d(1e-9, 0, 0, 0)), GeometryError);
  const UnitQuaternion n = normalize_quat(Eigen::Vector4d(0, 0, 0, -3));
  CHECK(n[3] == -1.0);
}

TEST_CASE("rot_to_quat inverts quat_to_rot up to sign") {
  std::mt19937_64 rng(32);
  for (int i = 0; i < 500; ++i) {
    Eigen::Vector4d q = random_unit_quat(rng);
    if (q[3] < 0) q = -q;
    const UnitQuaternion back = rot_to_quat(quat_to_rot(normalize_quat(q)));
    for (int j = 0; j < 4; ++j) CHECK(back[j] == doctest::Approx(q[j]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("compose and invert") {
  std::mt19937_64 rng(33);
  const RigidTransform a = random_transform(rng), b = random_transform(rng);
  const Vec3 p(0.3, -0.2, 0.9);
  CHECK((compose(a, b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  const RigidTransform id = compose(invert(a), a);
  CHECK((id.R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.t.norm() < 1e-12);
  CHECK(is_rotation(a.R));
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  CHECK_FALSE(is_rotation(reflect));
}

TEST_CASE("barycenter and select") {
  PointCloud pc{{Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 4, 0), Vec3(2, 4, 8)}};
  CHECK(barycenter(pc) == Vec3(1, 2, 2));
  CHECK(select(pc, {3, 1}).points == std::vector<Vec3>{Vec3(2, 4, 8), Vec3(2, 0, 0)});
  CHECK_THROWS_AS(barycenter(PointCloud{}), GeometryError);
}

TEST_CASE("backproject and project round trip") {
  const CameraIntrinsics K;
  DepthImage depth{4, 3, std::vector<std::uint16_t>(12, 0)};
  Mask mask{4, 3, std::vector<std::uint8_t>(12, 1)};
  depth.depth[1 * 4 + 2] = 800;
  depth.depth[2 * 4 + 3] = 1200;
  mask.valid[0] = 1;  // depth 0 there, so skipped
  const PointCloud pc = backproject(depth, mask, K);
  REQUIRE(pc.size() == 2);
  CHECK(pc[0].z() == doctest::Approx(0.8));
  CHECK(pc[0].x() == doctest::Approx((2.0 - 320.0) * 0.8 / 500.0));
  const Eigen::Vector2d uv = project(pc[1], K);
  CHECK(uv.x() == doctest::Approx(3.0));
  CHECK(uv.y() == doctest::Approx(2.0));
  mask.valid.assign(12, 0);
  CHECK_THROWS_AS(backproject(depth, mask, K), GeometryError);
  CameraIntrinsics bad;
  bad.fx = 0.0;
  CHECK_THROWS_AS(backproject(depth, mask, bad), ConfigError);
}

TEST_CASE("normals of a plane and a sphere") {
  PointCloud plane;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) plane.points.emplace_back(0.1 * i, 0.1 * j, 0.5);
  }
  const NormalField pn = estimate_normals(plane, 8, Vec3::Zero());
  CHECK(pn.degenerate == 0);
  for (const Vec3& n : pn.normals) CHECK((n - Vec3(0, 0, -1)).norm() < 1e-9);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  PointCloud sphere;
  for (int i = 0; i < 400; ++i) sphere.points.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
  const Vec3 outside(0.0, 0.0, 10.0);
  const NormalField sn = estimate_normals(sphere, 10, outside);
  for (std::size_t i = 0; i < sphere.size(); ++i) {
    CHECK(std::abs(sn[i].dot(sphere[i])) > 0.95);
    CHECK(sn[i].dot(outside - sphere[i]) >= 0.0);
    CHECK(sn[i].norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("collinear neighborhoods are flagged degenerate") {
  PointCloud line;
  for (int i = 0; i < 10; ++i) line.points.emplace_back(0.1 * i, 0.0, 1.0);
  const NormalField nf = estimate_normals(line, 4, Vec3::Zero());
  CHECK(nf.degenerate == 10);
  for (const Vec3& n : nf.normals) CHECK(n == Vec3::UnitZ());
  CHECK_THROWS_AS(estimate_normals(line, 10, Vec3::Zero()), CountError);
  CHECK_THROWS_AS(estimate_normals(line, 2, Vec3::Zero()), CountError);
}

TEST_CASE("PLY round trip is exact") {
  std::mt19937_64 rng(6);
  const PointCloud pc = random_cloud(rng, 25, false);
  NormalField nf;
  for (const Vec3& p : pc.points) nf.normals.push_back(p.normalized());
  std::stringstream ss;
  write_ply(ss, pc, &nf);
  const PlyCloud back = read_ply(ss);
  CHECK(back.cloud.points == pc.points);
  REQUIRE(back.normals.has_value());
  CHECK(back.normals->normals == nf.normals);

  std::stringstream plain;
  write_ply(plain, pc);
  CHECK_FALSE(read_ply(plain).normals.has_value());
}

TEST_CASE("PLY reader tolerates extra properties and elements") {
  std::istringstream in(
      "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n"
      "end_header\n1 2 3 255\n4 5 6 0\n3 0 1 1\n");
  const PlyCloud pc = read_ply(in);
  REQUIRE(pc.cloud.size() == 2);
  CHECK(pc.cloud[1] == Vec3(4, 5, 6));
}

TEST_CASE("PLY errors carry the line number") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      read_ply(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string header = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                             "property float z\nend_header\n";
  CHECK(line_of(header + "1 2 3\n4 x 6\n") == 9);
  CHECK(line_of(header + "1 2 3\n4 5\n") == 9);
  CHECK(line_of(header + "1 2 3\n") == 9);
  CHECK(line_of("plx\n") == 1);
  CHECK(line_of("ply\nformat binary_little_endian 1.0\n") == 2);
  CHECK(line_of("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n") == 5);
}

TEST_CASE("depth PGM round trip is little-endian") {
  const auto path = std::filesystem::temp_directory_path() / "transpose_test_depth.pgm";
  DepthImage img{3, 2, {0, 1, 258, 65535, 1000, 7}};
  write_depth_pgm(path, img);
  std::ifstream raw(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(raw)), {});
  const std::string header = "P5\n3 2\n65535\n";
  REQUIRE(bytes.size() == header.size() + 12);
  CHECK(static_cast<unsigned char>(bytes[header.size() + 4]) == 0x02);  // 258 low byte first
  CHECK(static_cast<unsigned char>(bytes[header.size() + 5]) == 0x01);
  const DepthImage back = read_depth_pgm(path);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.depth == img.depth);
  std::filesystem::remove(path);
}
