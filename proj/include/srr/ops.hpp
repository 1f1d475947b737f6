#pragma once

#include <span>
#include <vector>

#include "srr/tensor.hpp"

namespace srr {

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& x);

/// a[..., m, k] x b[..., k, n] -> [..., m, n]; batch extents broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[..., m, k] x b[..., n, k]^T -> [..., m, n].
Tensor matmul_transposed(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, const Shape& shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor transpose(const Tensor& x, int axis0, int axis1);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, int axis);

/// y = x W^T + b over the last axis. w is [out, in]; bias may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

/// Normalizes over the last axis, then applies gamma/beta of that extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);

/// x[B,C,H,W], w[O,C,k,k], bias[O] (may be undefined). Output extent per axis
/// is floor((H + 2 pad - k) / stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride, std::size_t padding);
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride, std::size_t padding);

Tensor concat(std::span<const Tensor> parts, int axis);
inline Tensor concat(std::initializer_list<Tensor> parts, int axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);

/// Bilinear resampling of x[B,C,H,W] with half-pixel centres and clamped
/// edges: source = (dst + 0.5) * in / out - 0.5.
Tensor bilinear_resize(const Tensor& x, std::size_t height, std::size_t width);
/// Non-overlapping k x k mean pooling of x[B,C,H,W]; H and W must divide by k.
Tensor avg_pool2d(const Tensor& x, std::size_t k);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of max(x,0) - x t + log(1 + exp(-|x|)).
Tensor bce_with_logits(const Tensor& logits, const Tensor& target);
/// Mean squared difference.
Tensor mse(const Tensor& prediction, const Tensor& target);

// Token/map layout helpers: [B,C,H,W] <-> [B,H*W,C].
Tensor map_to_tokens(const Tensor& map);
Tensor tokens_to_map(const Tensor& tokens, std::size_t height, std::size_t width);

}  // namespace srr
