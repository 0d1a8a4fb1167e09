#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pointcpr/tensor.hpp"

namespace pointcpr {

// Elementwise. `b` may equal `a` in shape or be a trailing suffix of it
// (broadcast over leading axes), and vice versa.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// Matrix product over the last two axes with numpy-style broadcasting
/// of the leading (batch) axes. Rank-1 operands are not promoted.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, std::span<const std::size_t> order);
Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1);

Tensor relu(const Tensor& a);
/// Exact (erf-based) GELU.
Tensor gelu(const Tensor& a);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

/// Normalizes over the last axis; gamma and beta have the last extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Rows of `a` (axis 0) at `indices`; repeated indices are allowed.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);

/// Max over an axis (removed from the shape). Ties route the gradient to
/// the lowest index.
Tensor max_along(const Tensor& a, std::size_t axis);
Tensor mean_along(const Tensor& a, std::size_t axis);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Mean negative log-likelihood of `labels` under row-wise softmax of
/// `logits` [B, C].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace pointcpr
