#include "transpose/net/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "transpose/errors.hpp"

namespace transpose::net {

void EncoderConfig::validate() const {
  if (heads == 0 || d_model == 0) throw ConfigError("encoder: heads and d_model must be positive");
  if (d_model % heads != 0) {
    throw ConfigError("encoder: d_model " + std::to_string(d_model) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (geometry_aware && k_feature == 0) throw ConfigError("encoder: k_feature must be positive");
  if (ffn_multiplier == 0) throw ConfigError("encoder: ffn_multiplier must be positive");
}

MultiHeadAttention::MultiHeadAttention(ad::ParamStore& store, const std::string& name, std::size_t d_model,
                                       std::size_t heads)
    : q_(store, name + ".q", d_model, d_model),
      k_(store, name + ".k", d_model, d_model),
      v_(store, name + ".v", d_model, d_model),
      out_(store, name + ".out", d_model, d_model),
      heads_(heads) {
  if (heads == 0 || d_model % heads != 0) throw ConfigError("attention: d_model must be divisible by heads");
}

ad::Tensor MultiHeadAttention::operator()(const ad::Tensor& x, std::vector<ad::Tensor>* weights) const {
  if (x.rank() != 2) throw DimensionError("attention: expected [N, d]");
  const std::size_t d = x.dim(1);
  const std::size_t dh = d / heads_;
  const ad::Tensor q = q_(x), k = k_(x), v = v_(x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (weights != nullptr) weights->clear();
  ad::Tensor merged;
  for (std::size_t h = 0; h < heads_; ++h) {
    const ad::Tensor qh = ad::slice_last(q, h * dh, dh);
    const ad::Tensor kh = ad::slice_last(k, h * dh, dh);
    const ad::Tensor vh = ad::slice_last(v, h * dh, dh);
    const ad::Tensor attn = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), scale));
    if (weights != nullptr) weights->push_back(attn);
    const ad::Tensor head = ad::matmul(attn, vh);
    merged = h == 0 ? head : ad::concat(merged, head);
  }
  return out_(merged);
}

IndexMatrix feature_knn(const ad::Tensor& x, std::size_t k) {
  if (x.rank() != 2) throw DimensionError("feature_knn: expected [N, d]");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (k == 0 || k >= n) {
    throw CountError("feature_knn: k = " + std::to_string(k) + " needs k < N = " + std::to_string(n));
  }
  const auto data = x.data();
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = data[i * d + c] - data[j * d + c];
        s += diff * diff;
      }
      d2[i * n + j] = d2[j * n + i] = s;
    }
  }
  IndexMatrix out(n, k);
  std::vector<std::size_t> order(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t pos = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order[pos++] = j;
    }
    const double* row = &d2[i * n];
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [row](std::size_t a, std::size_t b) { return row[a] < row[b] || (row[a] == row[b] && a < b); });
    std::copy(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), &out(i, 0));
  }
  return out;
}

GeometryAwareModule::GeometryAwareModule(ad::ParamStore& store, const std::string& name, std::size_t d_model,
                                         std::size_t k)
    : edge_(store, name + ".edge", 2 * d_model, d_model), k_(k) {}

ad::Tensor GeometryAwareModule::operator()(const ad::Tensor& x) const {
  const IndexMatrix neighbors = feature_knn(x, k_);
  IndexMatrix self(neighbors.rows(), neighbors.cols());
  for (std::size_t i = 0; i < self.rows(); ++i) {
    for (std::size_t j = 0; j < self.cols(); ++j) self(i, j) = i;
  }
  const ad::Tensor center = ad::gather_rows(x, self);
  const ad::Tensor edge = ad::concat(center, ad::sub(ad::gather_rows(x, neighbors), center));
  return ad::pool(ad::relu(edge_(edge)), ad::PoolKind::max);
}

EncoderBlock::EncoderBlock(ad::ParamStore& store, const std::string& name, const EncoderConfig& cfg)
    : ln_attn_(store, name + ".ln_attn", cfg.d_model),
      ln_ffn_(store, name + ".ln_ffn", cfg.d_model),
      attn_(store, name + ".attn", cfg.d_model, cfg.heads),
      reduce_(store, name + ".reduce", (cfg.geometry_aware ? 2 : 1) * cfg.d_model, cfg.d_model),
      ffn_(store, name + ".ffn", {cfg.d_model, cfg.ffn_multiplier * cfg.d_model, cfg.d_model}),
      geometry_aware_(cfg.geometry_aware) {
  if (geometry_aware_) geo_ = GeometryAwareModule(store, name + ".geo", cfg.d_model, cfg.k_feature);
}

ad::Tensor EncoderBlock::operator()(const ad::Tensor& x, std::vector<ad::Tensor>* attention) const {
  const ad::Tensor h = ln_attn_(x);
  ad::Tensor fused = attn_(h, attention);
  if (geometry_aware_) fused = ad::concat(fused, geo_(h));
  const ad::Tensor y = ad::add(x, reduce_(fused));
  return ad::add(y, ffn_(ln_ffn_(y)));
}

Encoder::Encoder(ad::ParamStore& store, EncoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t l = 0; l < cfg_.layers; ++l) blocks_.emplace_back(store, "encoder.layer" + std::to_string(l), cfg_);
}

ad::Tensor Encoder::operator()(const ad::Tensor& tokens, std::vector<ad::Tensor>* attention) const {
  if (tokens.rank() != 2 || tokens.dim(1) != cfg_.d_model) {
    throw DimensionError("encoder: expected [N, " + std::to_string(cfg_.d_model) + "] tokens, got " +
                         ad::to_string(tokens.shape()));
  }
  if (tokens.dim(0) < 2) throw CountError("encoder: at least two tokens are required");
  if (attention != nullptr) attention->clear();
  ad::Tensor x = tokens;
  std::vector<ad::Tensor> layer_attention;
  for (const EncoderBlock& block : blocks_) {
    x = block(x, attention != nullptr ? &layer_attention : nullptr);
    if (attention != nullptr) attention->insert(attention->end(), layer_attention.begin(), layer_attention.end());
  }
  return x;
}

ad::Tensor global_pool(const ad::Tensor& x) {
  if (x.rank() != 2 || x.dim(0) == 0) throw DimensionError("global_pool: expected [N, d] with N >= 1");
  const std::size_t n = x.dim(0), d = x.dim(1);
  return ad::reshape(ad::pool(ad::reshape(x, {1, n, d}), ad::PoolKind::max), {d});
}

}  // namespace transpose::net
