#include <cmath>
#include <numbers>
#include <random>

#include "transpose/data/dataset.hpp"
#include "transpose/errors.hpp"
#include "transpose/util/rng.hpp"

namespace transpose::data {

namespace {

using geom::Vec3;

constexpr std::size_t kModelPoints = 1024;

struct Box {
  Vec3 lo, hi;

  bool strictly_inside(const Vec3& p) const {
    return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
  }
};

/// Area-weighted samples on the union surface of axis-aligned boxes; points
/// buried inside another box are rejected.
geom::PointCloud sample_boxes(const std::vector<Box>& boxes, std::size_t n, std::mt19937_64& rng) {
  struct Face {
    std::size_t box;
    int axis;
    bool high;
    double area;
  };
  std::vector<Face> faces;
  std::vector<double> areas;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const Vec3 ext = boxes[b].hi - boxes[b].lo;
    for (int axis = 0; axis < 3; ++axis) {
      const double area = ext[(axis + 1) % 3] * ext[(axis + 2) % 3];
      for (bool high : {false, true}) {
        faces.push_back({b, axis, high, area});
        areas.push_back(area);
      }
    }
  }
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  geom::PointCloud pc;
  while (pc.size() < n) {
    const Face& f = faces[pick(rng)];
    const Box& box = boxes[f.box];
    Vec3 p;
    for (int c = 0; c < 3; ++c) p[c] = box.lo[c] + unit(rng) * (box.hi[c] - box.lo[c]);
    p[f.axis] = f.high ? box.hi[f.axis] : box.lo[f.axis];
    bool buried = false;
    for (std::size_t other = 0; other < boxes.size(); ++other) {
      if (other != f.box && boxes[other].strictly_inside(p)) buried = true;
    }
    if (!buried) pc.points.push_back(p);
  }
  return pc;
}

geom::PointCloud centered(geom::PointCloud pc) {
  const Vec3 c = geom::barycenter(pc);
  for (Vec3& p : pc.points) p -= c;
  return pc;
}

double signed_pow(double base, double exponent) {
  return std::copysign(std::pow(std::abs(base), exponent), base);
}

geom::PointCloud make_lbracket() {
  std::mt19937_64 rng(util::hash_string("Lbracket"));
  const std::vector<Box> boxes{{Vec3(0.0, 0.0, 0.0), Vec3(0.12, 0.03, 0.04)},
                               {Vec3(0.0, 0.03, 0.0), Vec3(0.03, 0.08, 0.04)}};
  return centered(sample_boxes(boxes, kModelPoints, rng));
}

/// Superellipsoid with distinct semi-axes; invariant under half turns about
/// each coordinate axis.
geom::PointCloud make_eggboxoid() {
  std::mt19937_64 rng(util::hash_string("eggboxoid"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double a = 0.06, b = 0.04, c = 0.025, e1 = 0.5, e2 = 0.8;
  geom::PointCloud pc;
  for (std::size_t i = 0; i < kModelPoints; ++i) {
    const double eta = std::asin(2.0 * unit(rng) - 1.0);
    const double omega = 2.0 * std::numbers::pi * unit(rng);
    const double ce = std::cos(eta), se = std::sin(eta);
    pc.points.emplace_back(a * signed_pow(ce, e1) * signed_pow(std::cos(omega), e2),
                           b * signed_pow(ce, e1) * signed_pow(std::sin(omega), e2), c * signed_pow(se, e1));
  }
  return pc;  // centered by symmetry; re-centering would break exact symmetry
}

/// Open cylinder with a half-torus handle.
geom::PointCloud make_mug() {
  std::mt19937_64 rng(util::hash_string("mug-like"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = 0.04, height = 0.09, handle_major = 0.025, handle_minor = 0.006;
  const double body_area = 2.0 * std::numbers::pi * radius * height;
  const double handle_area = std::numbers::pi * handle_major * 2.0 * std::numbers::pi * handle_minor;
  const double body_share = body_area / (body_area + handle_area);
  geom::PointCloud pc;
  while (pc.size() < kModelPoints) {
    if (unit(rng) < body_share) {
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      pc.points.emplace_back(radius * std::cos(phi), radius * std::sin(phi), height * unit(rng));
    } else {
      const double theta = std::numbers::pi * (unit(rng) - 0.5);  // half ring, outside the body
      const double psi = 2.0 * std::numbers::pi * unit(rng);
      const double ring = handle_major + handle_minor * std::cos(psi);
      pc.points.emplace_back(radius + ring * std::cos(theta), handle_minor * std::sin(psi),
                             0.5 * height + ring * std::sin(theta));
    }
  }
  return centered(pc);
}

}  // namespace

std::vector<ObjectModel> builtin_models() {
  return {ObjectModel::make("Lbracket", make_lbracket(), false), ObjectModel::make("eggboxoid", make_eggboxoid(), true),
          ObjectModel::make("mug-like", make_mug(), false)};
}

ObjectModel builtin_model(const std::string& name) {
  for (ObjectModel& m : builtin_models()) {
    if (m.name == name) return std::move(m);
  }
  throw ConfigError("unknown model '" + name + "' (expected Lbracket, eggboxoid or mug-like)");
}

}  // namespace transpose::data
