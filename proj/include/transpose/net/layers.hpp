#pragma once

#include <string>
#include <vector>

#include "transpose/autodiff/ops.hpp"
#include "transpose/autodiff/param_store.hpp"

namespace transpose::net {

/// Affine map y = x W + b over the last axis. Weights live in a ParamStore
/// under "<name>.w" ([in, out], Glorot) and "<name>.b" ([out], zeros).
class Linear {
 public:
  Linear() = default;
  Linear(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out);

  ad::Tensor operator()(const ad::Tensor& x) const { return ad::linear(x, weight_, bias_); }

  const ad::Tensor& weight() const { return weight_; }
  const ad::Tensor& bias() const { return bias_; }
  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

 private:
  ad::Tensor weight_;
  ad::Tensor bias_;
};

/// Linear layers with relu between them (none after the last).
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; layers are named "<name>.fc<i>".
  Mlp(ad::ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths);

  ad::Tensor operator()(const ad::Tensor& x) const;
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

/// Gain/bias pair for layer normalization over the last axis.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ad::ParamStore& store, const std::string& name, std::size_t width);

  ad::Tensor operator()(const ad::Tensor& x) const { return ad::layer_norm(x, gain_, bias_); }

 private:
  ad::Tensor gain_;
  ad::Tensor bias_;
};

/// Batch normalization over rows with running statistics kept as
/// non-trainable ParamStore buffers, so they travel with checkpoints.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ad::ParamStore& store, const std::string& name, std::size_t width);

  ad::Tensor operator()(const ad::Tensor& x, ad::Mode mode) const;

 private:
  ad::Tensor gain_;
  ad::Tensor bias_;
  mutable ad::BatchNormStats stats_;
};

}  // namespace transpose::net
