#include "transpose/autodiff/tensor.hpp"

#include <atomic>
#include <sstream>

#include "transpose/errors.hpp"

namespace transpose::ad {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_backward_epoch{0};

#ifdef NDEBUG
std::atomic<bool> g_finite_checks{false};
#else
std::atomic<bool> g_finite_checks{true};
#endif

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) { impl_->data.assign(1, 0.0); }

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(ad::numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : impl_(std::make_shared<TensorImpl>()) {
  if (ad::numel(shape) != values.size()) {
    throw DimensionError("tensor: shape " + ad::to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item(): tensor of shape " + ad::to_string(shape()) + " is not scalar");
  return impl_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw DimensionError("at(i, j) requires a rank-2 tensor");
  return impl_->data[i * impl_->shape[1] + j];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data); }

Tensor make_tensor(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

void Tape::record(std::shared_ptr<TensorImpl> out, std::vector<std::shared_ptr<TensorImpl>> inputs,
                  BackwardFn fn) {
  nodes_.push_back(Node{std::move(out), std::move(inputs), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward: loss must be scalar, got shape " + ad::to_string(loss.shape()));
  }
  if (!loss.requires_grad()) throw StateError("backward: loss does not depend on any trainable tensor");

  const std::uint64_t epoch = ++g_backward_epoch;
  auto mark_leaf = [epoch](TensorImpl& t) {
    if (t.leaf && t.requires_grad && t.visit_epoch != epoch) {
      t.visit_epoch = epoch;
      ++t.visit_count;
    }
  };

  TensorImpl& root = *loss.impl();
  root.grad_buffer()[0] += 1.0;
  mark_leaf(root);

  last_visits_ = 0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // unreachable from loss
    it->fn(*it->out);
    ++last_visits_;
    for (const auto& input : it->inputs) {
      if (input->requires_grad) mark_leaf(*input);
    }
  }
  nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }

bool finite_checks_enabled() { return g_finite_checks; }

}  // namespace transpose::ad
