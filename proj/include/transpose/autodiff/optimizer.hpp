#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "transpose/autodiff/param_store.hpp"

namespace transpose::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Length of the cosine decay schedule; 0 keeps the rate constant.
  std::size_t total_steps = 0;
};

/// Adam with optional cosine learning-rate decay:
///   lr_t = lr * (1 + cos(pi * t / total_steps)) / 2, t = 0, 1, ...
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update to every trainable entry, then clears gradients.
  /// Throws StateError if a trainable entry has no gradient buffer.
  void step(ParamStore& params);

  std::size_t steps() const { return step_; }
  double current_lr() const;
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  AdamOptions options_;
  std::size_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace transpose::ad
