#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "transpose/autodiff/optimizer.hpp"
#include "transpose/autodiff/param_store.hpp"
#include "transpose/net/embed.hpp"
#include "transpose/net/encoder.hpp"
#include "transpose/net/pose_head.hpp"

namespace transpose::net {

struct NetworkConfig {
  EmbedConfig embed;
  EncoderConfig encoder;
  HeadConfig head;
  /// Input lengths are multiplied by this after centering, so a 0.1 m
  /// object spans about 3 units and neighbor offsets are O(0.3).
  double length_scale = 30.0;

  void validate() const;
};

/// Embedding, encoder and pose head sharing one ParamStore.
class PoseNet {
 public:
  PoseNet(const NetworkConfig& cfg, std::uint64_t seed);
  PoseNet(const PoseNet&) = delete;
  PoseNet& operator=(const PoseNet&) = delete;

  const NetworkConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  EmbedPlan plan(const geom::PointCloud& cloud, const geom::NormalField& normals) const;
  PoseTensors forward(const EmbedPlan& plan, ad::Mode mode) const;
  /// Untaped evaluation-mode inference.
  PoseEstimate predict(const EmbedPlan& plan) const;

  const Embedder& embedder() const { return embed_; }
  const Encoder& encoder() const { return encoder_; }

 private:
  NetworkConfig cfg_;
  ad::ParamStore store_;
  Embedder embed_;
  Encoder encoder_;
  PoseHead head_;
};

struct TrainItem {
  const EmbedPlan* plan = nullptr;
  geom::RigidTransform gt;
  const LossModel* model = nullptr;
};

/// Mean pose loss over the batch (training mode), without updating weights.
ad::Tensor batch_loss(const PoseNet& net, std::span<const TrainItem> batch);

/// Mean loss, backward pass and one optimizer update. Returns the loss.
double train_step(PoseNet& net, ad::Adam& optimizer, std::span<const TrainItem> batch);

}  // namespace transpose::net
