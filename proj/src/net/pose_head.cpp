#include "transpose/net/pose_head.hpp"

#include "transpose/errors.hpp"

namespace transpose::net {

void HeadConfig::validate() const {
  if (hidden0 == 0 || hidden1 == 0) throw ConfigError("pose head: widths must be positive");
}

PoseEstimate to_estimate(const PoseTensors& pose) {
  const auto q = pose.quaternion.data();
  const auto t = pose.translation.data();
  return {geom::UnitQuaternion{{q[0], q[1], q[2], q[3]}}, geom::Vec3(t[0], t[1], t[2])};
}

PoseHead::PoseHead(ad::ParamStore& store, std::size_t d_model, const HeadConfig& cfg)
    : translation_(store, "head.translation", {d_model, cfg.hidden0, cfg.hidden1, 3}),
      rotation_(store, "head.rotation", {d_model, cfg.hidden0, cfg.hidden1, 4}) {
  cfg.validate();
  ad::Tensor bias = rotation_.layers().back().bias();
  bias.mutable_data()[3] = 1.0;
}

PoseTensors PoseHead::operator()(const ad::Tensor& global_feature, const geom::Vec3& barycenter,
                                 double length_scale) const {
  const std::size_t d = global_feature.numel();
  const ad::Tensor row = ad::reshape(global_feature, {1, d});
  const ad::Tensor delta = ad::reshape(translation_(row), {3});
  const ad::Tensor center = ad::Tensor::vector({barycenter.x(), barycenter.y(), barycenter.z()});
  PoseTensors out;
  out.translation = ad::add(ad::scale(delta, 1.0 / length_scale), center);
  out.quaternion = ad::l2_normalize(ad::reshape(rotation_(row), {4}));
  out.rotation = ad::quaternion_to_rotation(out.quaternion);
  return out;
}

LossModel LossModel::from(const ObjectModel& model, std::size_t n_points) {
  const std::size_t total = model.vertices.size();
  if (n_points == 0 || n_points > total) {
    throw CountError("loss: " + std::to_string(n_points) + " loss points requested from " + std::to_string(total) +
                     " vertices");
  }
  LossModel out;
  out.symmetric = model.symmetric;
  out.points = ad::Tensor({n_points, 3});
  auto data = out.points.mutable_data();
  for (std::size_t i = 0; i < n_points; ++i) {
    const geom::Vec3& v = model.vertices[i * total / n_points];
    data[3 * i] = v.x();
    data[3 * i + 1] = v.y();
    data[3 * i + 2] = v.z();
  }
  return out;
}

ad::Tensor pose_loss(const PoseTensors& pred, const geom::RigidTransform& gt, const LossModel& model) {
  const std::size_t n = model.points.dim(0);
  const ad::Tensor predicted = ad::add(ad::matmul(model.points, ad::transpose(pred.rotation)), pred.translation);
  ad::Tensor truth({n, 3});
  {
    auto src = model.points.data();
    auto dst = truth.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      const geom::Vec3 p = gt.apply(geom::Vec3(src[3 * i], src[3 * i + 1], src[3 * i + 2]));
      dst[3 * i] = p.x();
      dst[3 * i + 1] = p.y();
      dst[3 * i + 2] = p.z();
    }
  }
  if (!model.symmetric) return ad::mean(ad::row_norm(ad::sub(predicted, truth)));
  // pairs(i, j, :) = predicted_i - truth_j
  IndexMatrix rows(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) rows(i, j) = i;
  }
  const ad::Tensor pairs = ad::sub(ad::gather_rows(predicted, rows), truth);
  return ad::mean(ad::row_min(ad::row_norm(pairs)));
}

}  // namespace transpose::net
