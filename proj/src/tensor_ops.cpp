#include "avvp/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace avvp::kernels {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
  }
}

Shape remove_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

}  // namespace

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape));
  }
  AxisView v{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out({n, m});
  auto o = out.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      const double* brow = bd.data() + p * m;
      double* orow = o.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t n = a.dim(0), m = a.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = a(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

Tensor add_rows(const Tensor& a, const Tensor& row) {
  require_rank(a, 2, "add_rows");
  require_rank(row, 1, "add_rows");
  if (row.dim(0) != a.dim(1)) {
    throw DimensionError("add_rows: row " + shape_string(row.shape()) + " does not fit matrix " +
                         shape_string(a.shape()));
  }
  Tensor out = a;
  const std::size_t m = a.dim(1);
  auto o = out.data();
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] += row[j];
  return out;
}

Tensor sum_along_axis(const Tensor& x, std::size_t axis) {
  const auto v = axis_view(x.shape(), axis);
  Tensor out(remove_axis(x.shape(), axis));
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t a = 0; a < v.outer; ++a)
    for (std::size_t i = 0; i < v.len; ++i)
      for (std::size_t k = 0; k < v.inner; ++k) o[a * v.inner + k] += xd[(a * v.len + i) * v.inner + k];
  return out;
}

Tensor expand_along_axis(const Tensor& x, std::size_t axis, std::size_t len) {
  Shape shape = x.shape();
  if (axis > shape.size()) throw DimensionError("expand_along_axis: axis out of range");
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), len);
  const auto v = axis_view(shape, axis);
  Tensor out(std::move(shape));
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t a = 0; a < v.outer; ++a)
    for (std::size_t i = 0; i < v.len; ++i)
      for (std::size_t k = 0; k < v.inner; ++k) o[(a * v.len + i) * v.inner + k] = xd[a * v.inner + k];
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto v = axis_view(x.shape(), axis);
  Tensor out(x.shape());
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t a = 0; a < v.outer; ++a) {
    for (std::size_t k = 0; k < v.inner; ++k) {
      const auto at = [&](std::size_t i) { return (a * v.len + i) * v.inner + k; };
      double mx = xd[at(0)];
      for (std::size_t i = 1; i < v.len; ++i) mx = std::max(mx, xd[at(i)]);
      double total = 0.0;
      for (std::size_t i = 0; i < v.len; ++i) {
        o[at(i)] = std::exp(xd[at(i)] - mx);
        total += o[at(i)];
      }
      for (std::size_t i = 0; i < v.len; ++i) o[at(i)] /= total;
    }
  }
  return out;
}

namespace {
const double kSigmoidLow = std::numeric_limits<double>::denorm_min();
const double kSigmoidHigh = std::nextafter(1.0, 0.0);
}  // namespace

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    // Branch on sign so exp never overflows.
    const double z = xd[i];
    if (z >= 0) {
      o[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);
      o[i] = e / (1.0 + e);
    }
    // Keep the result inside the open interval once it saturates.
    o[i] = std::clamp(o[i], kSigmoidLow, kSigmoidHigh);
  }
  return out;
}

Tensor stack(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  const Shape& base = parts[0].shape();
  for (const auto& p : parts) {
    if (p.shape() != base) {
      throw DimensionError("stack: shape mismatch " + shape_string(base) + " vs " + shape_string(p.shape()));
    }
  }
  if (axis > base.size()) throw DimensionError("stack: axis out of range");
  Shape shape = base;
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), parts.size());
  const auto v = axis_view(shape, axis);
  Tensor out(std::move(shape));
  auto o = out.data();
  for (std::size_t i = 0; i < v.len; ++i) {
    auto pd = parts[i].data();
    for (std::size_t a = 0; a < v.outer; ++a)
      for (std::size_t k = 0; k < v.inner; ++k) o[(a * v.len + i) * v.inner + k] = pd[a * v.inner + k];
  }
  return out;
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  const auto v = axis_view(x.shape(), axis);
  if (index >= v.len) {
    throw DimensionError("select: index " + std::to_string(index) + " out of range for axis " +
                         std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  Tensor out(remove_axis(x.shape(), axis));
  auto o = out.data();
  auto xd = x.data();
  for (std::size_t a = 0; a < v.outer; ++a)
    for (std::size_t k = 0; k < v.inner; ++k) o[a * v.inner + k] = xd[(a * v.len + index) * v.inner + k];
  return out;
}

}  // namespace avvp::kernels
