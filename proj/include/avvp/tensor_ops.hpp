#pragma once

#include "avvp/tensor.hpp"

namespace avvp::kernels {

/// Splits a shape around `axis` into (outer, axis length, inner) so that
/// flat index = (o * len + i) * inner + k.
struct AxisView {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};
AxisView axis_view(const Shape& shape, std::size_t axis);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// Adds a length-n vector to every row of an m x n matrix.
Tensor add_rows(const Tensor& a, const Tensor& row);

/// Reduces `axis`, removing it from the shape.
Tensor sum_along_axis(const Tensor& x, std::size_t axis);
/// Inverse of sum_along_axis for gradients: repeats x `len` times along a new `axis`.
Tensor expand_along_axis(const Tensor& x, std::size_t axis, std::size_t len);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
/// Elementwise logistic function, saturating one ulp inside (0, 1).
Tensor sigmoid(const Tensor& x);

/// Stacks equally shaped tensors along a new axis.
Tensor stack(std::span<const Tensor> parts, std::size_t axis);
/// Slice `index` of `axis`, with the axis removed.
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);

}  // namespace avvp::kernels
