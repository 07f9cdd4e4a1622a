#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "transpose/data/dataset.hpp"
#include "transpose/errors.hpp"
#include "transpose/metrics.hpp"
#include "transpose/net/pose_net.hpp"

namespace transpose::train {

struct TrainOptions {
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double lr = 1e-3;
  /// Cosine decay of the learning rate over `steps`.
  bool cosine_decay = true;
  /// Each batch item is spun by a fresh random rotation about its
  /// barycenter, with the ground truth rotated to match.
  bool rotation_augmentation = false;
  /// Largest spin angle in radians; pi or more samples SO(3) uniformly,
  /// smaller values draw a uniform axis and an angle uniform in [0, max].
  double augmentation_max_angle = 3.141592653589793;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossRow {
  std::size_t step = 0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

/// Thrown when the loss stops being finite; names the step.
class DivergenceError : public StateError {
 public:
  DivergenceError(std::size_t step, double loss);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Trains on the dataset's train split. Batches walk a fresh permutation per
/// epoch; every random choice derives from options.seed, so reruns are
/// bit-identical. `on_step` sees each row as it is produced.
std::vector<LossRow> fit(net::PoseNet& net, const data::Dataset& dataset, const TrainOptions& options,
                         const std::function<void(const LossRow&)>& on_step = {});

/// Ground truth after the observation is rotated by `spin` about `center`.
geom::RigidTransform spin_about(const geom::RigidTransform& gt, const geom::Mat3& spin, const geom::Vec3& center);

geom::RigidTransform predict_pose(const net::PoseNet& net, const data::Sample& sample);

metrics::MetricReport evaluate_network(const net::PoseNet& net, const data::Dataset& dataset,
                                       const std::string& split);

}  // namespace transpose::train
