#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace transpose::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Shared storage behind a Tensor handle. Gradients are allocated lazily.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  // Instrumentation: how many backward passes reached this leaf.
  std::uint64_t visit_epoch = 0;
  std::size_t visit_count = 0;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

/// Dense row-major f64 tensor with reference semantics (copies share storage).
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  /// Direct write access; only valid for leaves that are not on a live tape.
  std::span<double> mutable_data() { return impl_->data; }

  double item() const;
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const { return impl_->leaf; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }
  std::size_t backward_visits() const { return impl_->visit_count; }

  /// Deep copy detached from any tape.
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_tensor(std::shared_ptr<TensorImpl> impl);

  std::shared_ptr<TensorImpl> impl_;
};

Tensor make_tensor(std::shared_ptr<TensorImpl> impl);

using BackwardFn = std::function<void(TensorImpl& out)>;

/// Ordered record of differentiable operations. Nodes are appended in
/// execution order, so reverse iteration is a valid topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::shared_ptr<TensorImpl> out, std::vector<std::shared_ptr<TensorImpl>> inputs,
              BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor.
  /// Consumes the tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  /// Nodes whose backward rule ran during the last backward() call.
  std::size_t last_visits() const { return last_visits_; }

 private:
  struct Node {
    std::shared_ptr<TensorImpl> out;
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

/// Makes `tape` the active tape of the calling thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// NaN/Inf detection on op outputs. Enabled by default in debug builds.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

}  // namespace transpose::ad
