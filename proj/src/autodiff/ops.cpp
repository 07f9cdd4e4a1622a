#include "transpose/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "transpose/errors.hpp"

namespace transpose::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void check_finite(const std::vector<double>& data, const char* op) {
  for (double v : data) {
    if (!std::isfinite(v)) throw StateError(std::string(op) + ": non-finite value produced");
  }
}

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

/// Wraps freshly computed values into a tensor and records `fn` on the active
/// tape when any input participates in differentiation.
Tensor finish(const char* op, Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
              BackwardFn fn) {
  if (finite_checks_enabled()) check_finite(data, op);
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (wants_grad(inputs)) {
    impl->requires_grad = true;
    impl->leaf = false;
    std::vector<std::shared_ptr<TensorImpl>> ins;
    ins.reserve(inputs.size());
    for (const Tensor* t : inputs) ins.push_back(t->impl());
    active_tape()->record(impl, std::move(ins), std::move(fn));
  }
  return make_tensor(std::move(impl));
}

std::size_t last_extent(const Tensor& x) {
  if (x.rank() == 0) return 1;
  return x.shape().back();
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + to_string(a.shape()) + " by " + to_string(b.shape()));
  }
  const Eigen::Index m = static_cast<Eigen::Index>(a.dim(0));
  const Eigen::Index k = static_cast<Eigen::Index>(a.dim(1));
  const Eigen::Index n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  if (m > 0 && n > 0 && k > 0) {
    MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return finish("matmul", {a.dim(0), b.dim(1)}, std::move(out), {&a, &b}, [ai, bi, m, k, n](TensorImpl& o) {
    if (m == 0 || n == 0 || k == 0) return;
    ConstMap dc(o.grad.data(), m, n);
    if (ai->requires_grad) {
      MutMap(ai->grad_buffer().data(), m, k).noalias() += dc * ConstMap(bi->data.data(), k, n).transpose();
    }
    if (bi->requires_grad) {
      MutMap(bi->grad_buffer().data(), k, n).noalias() += ConstMap(ai->data.data(), m, k).transpose() * dc;
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose: expected rank 2, got " + to_string(a.shape()));
  const std::size_t r = a.dim(0);
  const std::size_t c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  auto ai = a.impl();
  return finish("transpose", {c, r}, std::move(out), {&a}, [ai, r, c](TensorImpl& o) {
    auto& g = ai->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += o.grad[j * r + i];
  });
}

Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise kind) {
  const bool a_big = a.rank() >= b.rank();
  const Shape& big = a_big ? a.shape() : b.shape();
  const Shape& small = a_big ? b.shape() : a.shape();
  if (!std::equal(small.rbegin(), small.rend(), big.rbegin())) {
    throw DimensionError("elementwise: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " are not broadcastable");
  }
  const std::size_t n = numel(big);
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  std::vector<double> out(n);
  // Loop over repetitions of the smaller operand so no modulo is needed per element.
  const std::size_t period = a_big ? nb : na;
  const std::size_t reps = period == 0 ? 0 : n / period;
  for (std::size_t r = 0; r < reps; ++r) {
    const double* x = pa + (a_big ? r * period : 0);
    const double* y = pb + (a_big ? 0 : r * period);
    double* z = out.data() + r * period;
    switch (kind) {
      case Elementwise::add: for (std::size_t i = 0; i < period; ++i) z[i] = x[i] + y[i]; break;
      case Elementwise::sub: for (std::size_t i = 0; i < period; ++i) z[i] = x[i] - y[i]; break;
      case Elementwise::mul: for (std::size_t i = 0; i < period; ++i) z[i] = x[i] * y[i]; break;
    }
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return finish("elementwise", big, std::move(out), {&a, &b}, [ai, bi, kind, a_big, period, reps](TensorImpl& o) {
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t a_off = a_big ? r * period : 0;
      const std::size_t b_off = a_big ? 0 : r * period;
      const double* dz = o.grad.data() + r * period;
      if (ai->requires_grad) {
        double* ga = ai->grad_buffer().data() + a_off;
        if (kind == Elementwise::mul) {
          const double* y = bi->data.data() + b_off;
          for (std::size_t i = 0; i < period; ++i) ga[i] += dz[i] * y[i];
        } else {
          for (std::size_t i = 0; i < period; ++i) ga[i] += dz[i];
        }
      }
      if (bi->requires_grad) {
        double* gb = bi->grad_buffer().data() + b_off;
        if (kind == Elementwise::mul) {
          const double* x = ai->data.data() + a_off;
          for (std::size_t i = 0; i < period; ++i) gb[i] += dz[i] * x[i];
        } else if (kind == Elementwise::sub) {
          for (std::size_t i = 0; i < period; ++i) gb[i] -= dz[i];
        } else {
          for (std::size_t i = 0; i < period; ++i) gb[i] += dz[i];
        }
      }
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v *= factor;
  auto xi = x.impl();
  return finish("scale", x.shape(), std::move(out), {&x}, [xi, factor](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * o.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  auto xi = x.impl();
  return finish("relu", x.shape(), std::move(out), {&x}, [xi](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xi->data[i] > 0.0) g[i] += o.grad[i];
    }
  });
}

Tensor softmax(const Tensor& x) {
  const std::size_t n = last_extent(x);
  if (n == 0) throw CountError("softmax: last axis is empty");
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel());
  const double* px = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = px + r * n;
    double* dst = out.data() + r * n;
    const double peak = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - peak);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  auto xi = x.impl();
  return finish("softmax", x.shape(), std::move(out), {&x}, [xi, n, rows](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = o.data.data() + r * n;
      const double* dy = o.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[r * n + j] += y[j] * (dy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = last_extent(x);
  if (d == 0) throw CountError("layer_norm: feature axis is empty");
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.numel());
  const double* px = x.data().data();
  const double* pg = gain.data().data();
  const double* pb = bias.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = px + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * pg[j] + pb[j];
    }
  }
  auto xi = x.impl();
  auto gi = gain.impl();
  auto bi = bias.impl();
  return finish("layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                [xi, gi, bi, d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl& o) {
                  if (gi->requires_grad || bi->requires_grad) {
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < d; ++j) {
                        const double dy = o.grad[r * d + j];
                        if (gi->requires_grad) gi->grad_buffer()[j] += dy * xhat[r * d + j];
                        if (bi->requires_grad) bi->grad_buffer()[j] += dy;
                      }
                    }
                  }
                  if (!xi->requires_grad) return;
                  auto& g = xi->grad_buffer();
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dxhat = 0.0;
                    double mean_dxhat_xhat = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dxhat = o.grad[r * d + j] * gi->data[j];
                      mean_dxhat += dxhat;
                      mean_dxhat_xhat += dxhat * xhat[r * d + j];
                    }
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                      const double dxhat = o.grad[r * d + j] * gi->data[j];
                      g[r * d + j] += inv_std[r] * (dxhat - mean_dxhat - xhat[r * d + j] * mean_dxhat_xhat);
                    }
                  }
                });
}

Tensor batch_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, BatchNormStats& stats, Mode mode) {
  if (x.rank() != 2) throw DimensionError("batch_norm: expected [n, d], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  if (gain.numel() != d || bias.numel() != d || stats.running_mean.numel() != d || stats.running_var.numel() != d) {
    throw DimensionError("batch_norm: parameter extents do not match feature width " + std::to_string(d));
  }
  if (mode == Mode::train && n < 2) throw CountError("batch_norm: train mode needs a batch of at least 2 rows");

  const double* px = x.data().data();
  std::vector<double> mu(d, 0.0);
  std::vector<double> var(d, 0.0);
  if (mode == Mode::train) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mu[j] += px[i * d + j];
    for (double& m : mu) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) var[j] += (px[i * d + j] - mu[j]) * (px[i * d + j] - mu[j]);
    for (double& v : var) v /= static_cast<double>(n);
    auto rm = stats.running_mean.mutable_data();
    auto rv = stats.running_var.mutable_data();
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < d; ++j) {
      rm[j] = (1.0 - stats.momentum) * rm[j] + stats.momentum * mu[j];
      rv[j] = (1.0 - stats.momentum) * rv[j] + stats.momentum * var[j] * unbias;
    }
  } else {
    std::copy(stats.running_mean.data().begin(), stats.running_mean.data().end(), mu.begin());
    std::copy(stats.running_var.data().begin(), stats.running_var.data().end(), var.begin());
  }

  std::vector<double> inv_std(d);
  for (std::size_t j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + stats.eps);
  std::vector<double> xhat(n * d);
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (px[i * d + j] - mu[j]) * inv_std[j];
      out[i * d + j] = xhat[i * d + j] * gain.data()[j] + bias.data()[j];
    }
  }
  auto xi = x.impl();
  auto gi = gain.impl();
  auto bi = bias.impl();
  const bool batch_stats = mode == Mode::train;
  return finish("batch_norm", x.shape(), std::move(out), {&x, &gain, &bias},
                [xi, gi, bi, n, d, batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorImpl& o) {
                  std::vector<double> sum_dy(d, 0.0);
                  std::vector<double> sum_dy_xhat(d, 0.0);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) {
                      sum_dy[j] += o.grad[i * d + j];
                      sum_dy_xhat[j] += o.grad[i * d + j] * xhat[i * d + j];
                    }
                  }
                  if (gi->requires_grad) {
                    auto& g = gi->grad_buffer();
                    for (std::size_t j = 0; j < d; ++j) g[j] += sum_dy_xhat[j];
                  }
                  if (bi->requires_grad) {
                    auto& g = bi->grad_buffer();
                    for (std::size_t j = 0; j < d; ++j) g[j] += sum_dy[j];
                  }
                  if (!xi->requires_grad) return;
                  auto& g = xi->grad_buffer();
                  const double inv_n = 1.0 / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) {
                      const double scale_j = gi->data[j] * inv_std[j];
                      if (batch_stats) {
                        g[i * d + j] += scale_j * (o.grad[i * d + j] - sum_dy[j] * inv_n -
                                                   xhat[i * d + j] * sum_dy_xhat[j] * inv_n);
                      } else {
                        g[i * d + j] += scale_j * o.grad[i * d + j];
                      }
                    }
                  }
                });
}

Tensor pool(const Tensor& x, PoolKind kind) {
  if (x.rank() != 3) throw DimensionError("pool: expected [n, k, d], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0);
  const std::size_t k = x.dim(1);
  const std::size_t d = x.dim(2);
  if (k == 0) throw CountError("pool: empty neighborhood (k == 0)");
  const double* px = x.data().data();
  std::vector<double> out(n * d);
  std::vector<std::size_t> arg;
  if (kind == PoolKind::max) {
    arg.assign(n * d, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(px + (i * k) * d, d, out.data() + i * d);
      for (std::size_t m = 1; m < k; ++m) {
        const double* row = px + (i * k + m) * d;
        for (std::size_t j = 0; j < d; ++j) {
          if (row[j] > out[i * d + j]) {
            out[i * d + j] = row[j];
            arg[i * d + j] = m;
          }
        }
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t m = 0; m < k; ++m)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] += px[(i * k + m) * d + j];
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= static_cast<double>(k);
    }
  }
  auto xi = x.impl();
  return finish("pool", {n, d}, std::move(out), {&x}, [xi, kind, n, k, d, arg = std::move(arg)](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    if (kind == PoolKind::max) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) g[(i * k + arg[i * d + j]) * d + j] += o.grad[i * d + j];
    } else {
      const double inv_k = 1.0 / static_cast<double>(k);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < k; ++m)
          for (std::size_t j = 0; j < d; ++j) g[(i * k + m) * d + j] += o.grad[i * d + j] * inv_k;
    }
  });
}

Tensor gather_rows(const Tensor& x, const IndexMatrix& idx) {
  if (x.rank() != 2) throw DimensionError("gather_rows: expected [n, d], got " + to_string(x.shape()));
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  for (std::size_t v : idx.data()) {
    if (v >= n) {
      throw IndexError("gather_rows: index " + std::to_string(v) + " out of range for " + std::to_string(n) + " rows");
    }
  }
  const std::size_t total = idx.rows() * idx.cols();
  std::vector<double> out(total * d);
  const double* px = x.data().data();
  for (std::size_t e = 0; e < total; ++e) std::copy_n(px + idx.data()[e] * d, d, out.data() + e * d);
  auto xi = x.impl();
  return finish("gather_rows", {idx.rows(), idx.cols(), d}, std::move(out), {&x}, [xi, idx, d, total](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t e = 0; e < total; ++e) {
      double* dst = g.data() + idx.data()[e] * d;
      const double* src = o.grad.data() + e * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw DimensionError("concat: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " disagree");
  }
  const std::size_t da = a.shape().back();
  const std::size_t db = b.shape().back();
  const std::size_t rows = numel(Shape(a.shape().begin(), a.shape().end() - 1));
  const std::size_t dc = da + db;
  std::vector<double> out(rows * dc);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * da, da, out.data() + r * dc);
    std::copy_n(b.data().data() + r * db, db, out.data() + r * dc + da);
  }
  Shape shape = a.shape();
  shape.back() = dc;
  auto ai = a.impl();
  auto bi = b.impl();
  return finish("concat", std::move(shape), std::move(out), {&a, &b}, [ai, bi, rows, da, db, dc](TensorImpl& o) {
    if (ai->requires_grad) {
      auto& g = ai->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < da; ++j) g[r * da + j] += o.grad[r * dc + j];
    }
    if (bi->requires_grad) {
      auto& g = bi->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < db; ++j) g[r * db + j] += o.grad[r * dc + da + j];
    }
  });
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t count) {
  const std::size_t d = last_extent(x);
  if (x.rank() == 0 || start + count > d) {
    throw DimensionError("slice_last: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") exceeds extent " + std::to_string(d));
  }
  const std::size_t rows = d == 0 ? 0 : x.numel() / d;
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data().data() + r * d + start, count, out.data() + r * count);
  Shape shape = x.shape();
  shape.back() = count;
  auto xi = x.impl();
  return finish("slice_last", std::move(shape), std::move(out), {&x}, [xi, rows, d, start, count](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) g[r * d + start + j] += o.grad[r * count + j];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape) + " changes element count");
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto xi = x.impl();
  return finish("reshape", std::move(shape), std::move(out), {&x}, [xi](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto xi = x.impl();
  return finish("sum", {}, {total}, {&x}, [xi](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (double& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw CountError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor row_norm(const Tensor& x) {
  const std::size_t d = last_extent(x);
  if (x.rank() == 0 || d == 0) throw DimensionError("row_norm: needs a non-empty last axis");
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x.data()[r * d + j] * x.data()[r * d + j];
    out[r] = std::sqrt(s);
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  auto xi = x.impl();
  return finish("row_norm", std::move(shape), std::move(out), {&x}, [xi, rows, d](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      if (o.data[r] == 0.0) continue;
      const double f = o.grad[r] / o.data[r];
      for (std::size_t j = 0; j < d; ++j) g[r * d + j] += f * xi->data[r * d + j];
    }
  });
}

Tensor row_min(const Tensor& x) {
  const std::size_t d = last_extent(x);
  if (x.rank() == 0 || d == 0) throw DimensionError("row_min: needs a non-empty last axis");
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(rows);
  std::vector<std::size_t> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x.data().data() + r * d;
    arg[r] = static_cast<std::size_t>(std::min_element(row, row + d) - row);
    out[r] = row[arg[r]];
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  auto xi = x.impl();
  return finish("row_min", std::move(shape), std::move(out), {&x}, [xi, d, arg = std::move(arg)](TensorImpl& o) {
    auto& g = xi->grad_buffer();
    for (std::size_t r = 0; r < arg.size(); ++r) g[r * d + arg[r]] += o.grad[r];
  });
}

Tensor l2_normalize(const Tensor& x, double eps) {
  const std::size_t d = last_extent(x);
  if (x.rank() == 0 || d == 0) throw DimensionError("l2_normalize: needs a non-empty last axis");
  const std::size_t rows = x.numel() / d;
  std::vector<double> norms(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x.data()[r * d + j] * x.data()[r * d + j];
    norms[r] = std::sqrt(s);
    if (!(norms[r] > eps)) throw GeometryError("l2_normalize: degenerate vector, norm below threshold");
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = x.data()[r * d + j] / norms[r];
  }
  auto xi = x.impl();
  return finish("l2_normalize", x.shape(), std::move(out), {&x},
                [xi, rows, d, norms = std::move(norms)](TensorImpl& o) {
                  auto& g = xi->grad_buffer();
                  for (std::size_t r = 0; r < rows; ++r) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < d; ++j) dot += o.data[r * d + j] * o.grad[r * d + j];
                    for (std::size_t j = 0; j < d; ++j) {
                      g[r * d + j] += (o.grad[r * d + j] - o.data[r * d + j] * dot) / norms[r];
                    }
                  }
                });
}

Tensor quaternion_to_rotation(const Tensor& q) {
  if (q.numel() != 4) {
    throw DimensionError("quaternion_to_rotation: expected 4 components, got " + to_string(q.shape()));
  }
  // R = I + s A(q) with s = 2 / |q|^2, matching geom::quat_to_rot bit for bit.
  const double x = q[0], y = q[1], z = q[2], w = q[3];
  const double s = 2.0 / (x * x + y * y + z * z + w * w);
  std::vector<double> r = {
      1.0 - s * (y * y + z * z), s * (x * y - z * w),       s * (x * z + y * w),
      s * (x * y + z * w),       1.0 - s * (x * x + z * z), s * (y * z - x * w),
      s * (x * z - y * w),       s * (y * z + x * w),       1.0 - s * (x * x + y * y),
  };
  auto qi = q.impl();
  return finish("quaternion_to_rotation", {3, 3}, std::move(r), {&q}, [qi](TensorImpl& o) {
    const double x = qi->data[0], y = qi->data[1], z = qi->data[2], w = qi->data[3];
    const double n = x * x + y * y + z * z + w * w;
    const double s = 2.0 / n;
    const double* G = o.grad.data();
    const double a[9] = {-(y * y + z * z), x * y - z * w,    x * z + y * w,  x * y + z * w, -(x * x + z * z),
                         y * z - x * w,    x * z - y * w,    y * z + x * w,  -(x * x + y * y)};
    double ga = 0.0;
    for (int i = 0; i < 9; ++i) ga += G[i] * a[i];
    // d/dq_k of s A: s dA/dq_k plus the scale term -(2 q_k s / n) A.
    const double radial = 2.0 * s / n * ga;
    auto& g = qi->grad_buffer();
    g[0] += s * (y * G[1] + z * G[2] + y * G[3] - 2.0 * x * G[4] - w * G[5] + z * G[6] + w * G[7] - 2.0 * x * G[8]) -
            radial * x;
    g[1] += s * (-2.0 * y * G[0] + x * G[1] + w * G[2] + x * G[3] + z * G[5] - w * G[6] + z * G[7] - 2.0 * y * G[8]) -
            radial * y;
    g[2] += s * (-2.0 * z * G[0] - w * G[1] + x * G[2] + w * G[3] - 2.0 * z * G[4] + y * G[5] + x * G[6] + y * G[7]) -
            radial * z;
    g[3] += s * (-z * G[1] + y * G[2] + z * G[3] - x * G[5] - y * G[6] + x * G[7]) - radial * w;
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (w.rank() != 2 || x.rank() == 0 || x.shape().back() != w.dim(0)) {
    throw DimensionError("linear: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
  }
  const std::size_t in = w.dim(0);
  const std::size_t rows = in == 0 ? 0 : x.numel() / in;
  if (x.rank() == 2) return add(matmul(x, w), b);
  Tensor y = add(matmul(reshape(x, {rows, in}), w), b);
  Shape shape = x.shape();
  shape.back() = w.dim(1);
  return reshape(y, std::move(shape));
}

}  // namespace transpose::ad
