#pragma once

#include <vector>

#include "transpose/autodiff/ops.hpp"
#include "transpose/net/layers.hpp"

namespace transpose::net {

struct EncoderConfig {
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t d_model = 64;
  /// Feature-space neighbors of the geometry-aware branch.
  std::size_t k_feature = 8;
  /// Feedforward hidden width as a multiple of d_model.
  std::size_t ffn_multiplier = 4;
  bool geometry_aware = true;

  void validate() const;
};

/// Scaled dot-product self-attention with `heads` heads and Q/K/V/output
/// projections ("<name>.q", ".k", ".v", ".out").
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ad::ParamStore& store, const std::string& name, std::size_t d_model, std::size_t heads);

  /// x: [N, d] -> [N, d]. `weights`, when given, receives one [N, N]
  /// row-stochastic matrix per head.
  ad::Tensor operator()(const ad::Tensor& x, std::vector<ad::Tensor>* weights = nullptr) const;

 private:
  Linear q_, k_, v_, out_;
  std::size_t heads_ = 1;
};

/// Indices of the k nearest rows of x (Euclidean, self excluded), ascending
/// distance with ties to the lower row.
IndexMatrix feature_knn(const ad::Tensor& x, std::size_t k);

/// Graph convolution over the feature-space K-NN graph: edge [x_i, x_j - x_i],
/// shared Linear 2d -> d with relu, max over neighbors.
class GeometryAwareModule {
 public:
  GeometryAwareModule() = default;
  GeometryAwareModule(ad::ParamStore& store, const std::string& name, std::size_t d_model, std::size_t k);

  ad::Tensor operator()(const ad::Tensor& x) const;

 private:
  Linear edge_;
  std::size_t k_ = 1;
};

/// Pre-norm block:
///   y = x + W_r [MHA(LN x), GEO(LN x)]
///   z = y + FFN(LN y)
/// Without the geometry-aware branch W_r maps d -> d from MHA alone.
class EncoderBlock {
 public:
  EncoderBlock() = default;
  EncoderBlock(ad::ParamStore& store, const std::string& name, const EncoderConfig& cfg);

  ad::Tensor operator()(const ad::Tensor& x, std::vector<ad::Tensor>* attention = nullptr) const;

 private:
  LayerNorm ln_attn_, ln_ffn_;
  MultiHeadAttention attn_;
  GeometryAwareModule geo_;
  Linear reduce_;
  Mlp ffn_;
  bool geometry_aware_ = true;
};

/// Stack of encoder blocks, parameters under "encoder.*".
class Encoder {
 public:
  Encoder() = default;
  Encoder(ad::ParamStore& store, EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }

  /// [N, d] -> [N, d]; requires N >= 2 and k_feature < N when layers > 0.
  ad::Tensor operator()(const ad::Tensor& tokens, std::vector<ad::Tensor>* attention = nullptr) const;

 private:
  EncoderConfig cfg_;
  std::vector<EncoderBlock> blocks_;
};

/// Max over tokens: [N, d] -> [d].
ad::Tensor global_pool(const ad::Tensor& x);

}  // namespace transpose::net
