#include "transpose/autodiff/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "transpose/errors.hpp"

namespace transpose::ad {

double Adam::current_lr() const {
  if (options_.total_steps == 0) return options_.lr;
  const double t = std::min(static_cast<double>(step_), static_cast<double>(options_.total_steps));
  return options_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(options_.total_steps)));
}

void Adam::step(ParamStore& params) {
  for (const auto& [name, entry] : params.entries()) {
    if (entry.trainable && !entry.tensor.has_grad()) {
      throw StateError("optimizer step: parameter '" + name + "' has no gradient");
    }
  }
  const double lr = current_lr();
  ++step_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (const auto& [name, entry] : params.entries()) {
    if (!entry.trainable) continue;
    Tensor param = entry.tensor;
    auto values = param.mutable_data();
    const auto grad = param.grad();
    Moments& mom = moments_[name];
    if (mom.m.size() != values.size()) {
      mom.m.assign(values.size(), 0.0);
      mom.v.assign(values.size(), 0.0);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      mom.m[i] = options_.beta1 * mom.m[i] + (1.0 - options_.beta1) * grad[i];
      mom.v[i] = options_.beta2 * mom.v[i] + (1.0 - options_.beta2) * grad[i] * grad[i];
      const double m_hat = mom.m[i] / bias1;
      const double v_hat = mom.v[i] / bias2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
  params.zero_grad();
}

}  // namespace transpose::ad
