#pragma once

#include <span>

#include "transpose/autodiff/ops.hpp"
#include "transpose/geometry.hpp"
#include "transpose/net/layers.hpp"
#include "transpose/object_model.hpp"

namespace transpose::net {

struct HeadConfig {
  std::size_t hidden0 = 128;
  std::size_t hidden1 = 64;

  void validate() const;
};

/// Differentiable pose: unit quaternion [4], rotation [3, 3], translation [3]
/// in meters.
struct PoseTensors {
  ad::Tensor quaternion;
  ad::Tensor rotation;
  ad::Tensor translation;
};

struct PoseEstimate {
  geom::UnitQuaternion rotation;
  geom::Vec3 translation = geom::Vec3::Zero();

  geom::Mat3 rotation_matrix() const { return geom::quat_to_rot(rotation); }
  geom::RigidTransform transform() const { return {rotation_matrix(), translation}; }
};

PoseEstimate to_estimate(const PoseTensors& pose);

/// Decoupled translation and rotation branches on the pooled feature.
/// Translation: t = barycenter + delta / length_scale. Rotation: raw
/// quaternion, normalized, mapped to R(q). The rotation branch's output bias
/// starts at the identity quaternion.
class PoseHead {
 public:
  PoseHead() = default;
  PoseHead(ad::ParamStore& store, std::size_t d_model, const HeadConfig& cfg);

  PoseTensors operator()(const ad::Tensor& global_feature, const geom::Vec3& barycenter, double length_scale) const;

 private:
  Mlp translation_, rotation_;
};

/// Vertices used by the training loss: a fixed, evenly strided subset of the
/// model, as a [P, 3] constant.
struct LossModel {
  ad::Tensor points;
  bool symmetric = false;

  static LossModel from(const ObjectModel& model, std::size_t n_points);
};

inline constexpr std::size_t kLossPoints = 64;

/// Average distance between predicted and ground-truth transformed vertices;
/// for symmetric models each predicted vertex is matched to its closest
/// ground-truth vertex instead.
ad::Tensor pose_loss(const PoseTensors& pred, const geom::RigidTransform& gt, const LossModel& model);

}  // namespace transpose::net
