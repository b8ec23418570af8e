// SPDX-License-Identifier: Apache-2.0
#include "m2g2/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "m2g2/errors.hpp"

namespace m2g2 {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) +
                     " values cannot fill shape " + m2g2::shape_str(rows, cols));
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw ShapeError("Tensor::from_rows: ragged rows");
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const { return m2g2::shape_str(rows_, cols_); }

void Tensor::fill(double v) noexcept { std::fill(values_.begin(), values_.end(), v); }

std::string shape_str(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + a.shape_str() + " * " + b.shape_str());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn: row counts differ " + a.shape_str() + "^T * " + b.shape_str());
  }
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  Tensor out(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = pa + p * n;
    const double* brow = pb + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: column counts differ " + a.shape_str() + " * " + b.shape_str() +
                     "^T");
  }
  return matmul(a, transpose(b));
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  add_in_place(out, b);
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return out;
}

Tensor scaled(const Tensor& a, double s) {
  Tensor out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

void add_in_place(Tensor& dst, const Tensor& src) {
  require_same_shape(dst, src, "add_in_place");
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Tensor block_left_mul(const Tensor& op, const Tensor& x) {
  const std::size_t n = op.cols();
  if (n == 0 || x.rows() % n != 0) {
    throw ShapeError("block_left_mul: operator " + op.shape_str() +
                     " does not tile operand rows " + x.shape_str());
  }
  const std::size_t blocks = x.rows() / n;
  const std::size_t r = op.rows(), c = x.cols();
  Tensor out(blocks * r, c);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double* xb = x.data() + b * n * c;
    double* ob = out.data() + b * r * c;
    for (std::size_t i = 0; i < r; ++i) {
      double* orow = ob + i * c;
      for (std::size_t p = 0; p < n; ++p) {
        const double w = op(i, p);
        if (w == 0.0) continue;
        const double* xrow = xb + p * c;
        for (std::size_t j = 0; j < c; ++j) orow[j] += w * xrow[j];
      }
    }
  }
  return out;
}

Tensor block_left_mul_t(const Tensor& op, const Tensor& x) {
  const std::size_t r = op.rows();
  if (r == 0 || x.rows() % r != 0) {
    throw ShapeError("block_left_mul_t: operator " + op.shape_str() +
                     "^T does not tile operand rows " + x.shape_str());
  }
  const std::size_t blocks = x.rows() / r;
  const std::size_t n = op.cols(), c = x.cols();
  Tensor out(blocks * n, c);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double* xb = x.data() + b * r * c;
    double* ob = out.data() + b * n * c;
    for (std::size_t i = 0; i < r; ++i) {
      const double* xrow = xb + i * c;
      for (std::size_t p = 0; p < n; ++p) {
        const double w = op(i, p);
        if (w == 0.0) continue;
        double* orow = ob + p * c;
        for (std::size_t j = 0; j < c; ++j) orow[j] += w * xrow[j];
      }
    }
  }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace m2g2
