#pragma once

#include <cstddef>

#include "transpose/autodiff/tensor.hpp"
#include "transpose/index_matrix.hpp"

namespace transpose::ad {

// Differentiable operations. Each records a backward rule on the active tape
// when at least one input requires a gradient; otherwise it is a pure value
// computation.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

enum class Elementwise { add, sub, mul };

/// Pointwise binary op. The smaller operand may broadcast along leading axes,
/// i.e. its shape must equal a suffix of the larger operand's shape.
Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise kind);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::add); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::sub); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::mul); }

Tensor scale(const Tensor& x, double factor);
Tensor relu(const Tensor& x);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);

inline constexpr double kLayerNormEps = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

enum class Mode { train, eval };

struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// x: [n, d]. Train mode normalizes with batch statistics and updates the
/// running statistics in place; eval mode is a fixed affine map.
Tensor batch_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, BatchNormStats& stats, Mode mode);

enum class PoolKind { max, mean };

/// x: [n, k, d] -> [n, d], reducing the neighborhood axis. Max pooling routes
/// the gradient to the first maximal index.
Tensor pool(const Tensor& x, PoolKind kind);

/// x: [n, d], idx: [m, k] -> [m, k, d] with out[i, j, :] = x[idx(i, j), :].
Tensor gather_rows(const Tensor& x, const IndexMatrix& idx);

/// Juxtaposition along the last axis.
Tensor concat(const Tensor& a, const Tensor& b);

/// Columns [start, start + count) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t start, std::size_t count);

Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Euclidean norm over the last axis; the subgradient at zero is zero.
Tensor row_norm(const Tensor& x);

/// Per-row minimum over the last axis with gradient to the first argmin.
Tensor row_min(const Tensor& x);

inline constexpr double kNormalizeEps = 1e-8;
/// x / ||x|| over the last axis. Throws GeometryError when a norm is <= eps.
Tensor l2_normalize(const Tensor& x, double eps = kNormalizeEps);

/// q: [4] in (q0, q1, q2, q3) order with q3 the scalar part -> [3, 3].
/// Scale invariant: any nonzero q is treated as its normalized direction.
Tensor quaternion_to_rotation(const Tensor& q);

/// x: [..., in] * w: [in, out] + b: [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace transpose::ad
