#include "transpose/net/pose_net.hpp"

#include "transpose/errors.hpp"

namespace transpose::net {

void NetworkConfig::validate() const {
  embed.validate();
  encoder.validate();
  head.validate();
  if (embed.d_in != encoder.d_model) throw ConfigError("network: embed d_in must equal encoder d_model");
  if (encoder.geometry_aware && encoder.layers > 0 && encoder.k_feature >= embed.final_centers()) {
    throw ConfigError("network: k_feature must be smaller than the number of tokens (" +
                      std::to_string(embed.final_centers()) + ")");
  }
  if (embed.final_centers() < 2) throw ConfigError("network: at least two tokens are required");
  if (!(length_scale > 0.0)) throw ConfigError("network: length_scale must be positive");
}

PoseNet::PoseNet(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg), store_(seed) {
  cfg_.validate();
  embed_ = Embedder(store_, cfg_.embed);
  encoder_ = Encoder(store_, cfg_.encoder);
  head_ = PoseHead(store_, cfg_.encoder.d_model, cfg_.head);
}

EmbedPlan PoseNet::plan(const geom::PointCloud& cloud, const geom::NormalField& normals) const {
  return make_plan(cloud, normals, cfg_.embed, cfg_.length_scale);
}

PoseTensors PoseNet::forward(const EmbedPlan& plan, ad::Mode mode) const {
  const ad::Tensor tokens = embed_(plan, mode);
  return head_(global_pool(encoder_(tokens)), plan.barycenter, plan.length_scale);
}

PoseEstimate PoseNet::predict(const EmbedPlan& plan) const { return to_estimate(forward(plan, ad::Mode::eval)); }

ad::Tensor batch_loss(const PoseNet& net, std::span<const TrainItem> batch) {
  if (batch.empty()) throw CountError("train: empty batch");
  ad::Tensor total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainItem& item = batch[i];
    const ad::Tensor loss = pose_loss(net.forward(*item.plan, ad::Mode::train), item.gt, *item.model);
    total = i == 0 ? loss : ad::add(total, loss);
  }
  return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
}

double train_step(PoseNet& net, ad::Adam& optimizer, std::span<const TrainItem> batch) {
  ad::Tape tape;
  double value = 0.0;
  {
    ad::TapeScope scope(tape);
    const ad::Tensor loss = batch_loss(net, batch);
    value = loss.item();
    tape.backward(loss);
  }
  optimizer.step(net.params());
  return value;
}

}  // namespace transpose::net
