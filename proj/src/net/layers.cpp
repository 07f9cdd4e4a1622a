#include "transpose/net/layers.hpp"

#include "transpose/errors.hpp"

namespace transpose::net {

Linear::Linear(ad::ParamStore& store, const std::string& name, std::size_t in, std::size_t out)
    : weight_(store.create(name + ".w", {in, out})), bias_(store.create(name + ".b", {out}, ad::Init::zeros)) {}

Mlp::Mlp(ad::ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw ConfigError("mlp '" + name + "' needs at least an input and an output width");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(store, name + ".fc" + std::to_string(i), widths[i], widths[i + 1]);
  }
}

ad::Tensor Mlp::operator()(const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = ad::relu(h);
  }
  return h;
}

LayerNorm::LayerNorm(ad::ParamStore& store, const std::string& name, std::size_t width)
    : gain_(store.create(name + ".gain", {width}, ad::Init::ones)),
      bias_(store.create(name + ".bias", {width}, ad::Init::zeros)) {}

BatchNorm::BatchNorm(ad::ParamStore& store, const std::string& name, std::size_t width)
    : gain_(store.create(name + ".gain", {width}, ad::Init::ones)),
      bias_(store.create(name + ".bias", {width}, ad::Init::zeros)) {
  stats_.running_mean = store.create_buffer(name + ".running_mean", {width}, 0.0);
  stats_.running_var = store.create_buffer(name + ".running_var", {width}, 1.0);
}

ad::Tensor BatchNorm::operator()(const ad::Tensor& x, ad::Mode mode) const {
  return ad::batch_norm(x, gain_, bias_, stats_, mode);
}

}  // namespace transpose::net
