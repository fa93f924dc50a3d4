#include "xattn/linalg.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace xattn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  if (m.cols() != v.size()) {
    throw std::invalid_argument("matvec: dimension mismatch (" + std::to_string(m.cols()) +
                                " vs " + std::to_string(v.size()) + ")");
  }
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v);
  return out;
}

Vector transpose_matvec(const Matrix& m, std::span<const double> v) {
  if (m.rows() != v.size()) {
    throw std::invalid_argument("transpose_matvec: dimension mismatch (" +
                                std::to_string(m.rows()) + " vs " + std::to_string(v.size()) +
                                ")");
  }
  Vector out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(v[r], m.row(r), out);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void axpy(double scale, std::span<const double> b, std::span<double> a) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

Vector cholesky_solve(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) {
    throw std::invalid_argument("cholesky_solve: dimension mismatch");
  }
  // Relative pivot floor; anything below is treated as rank deficient.
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
  const double floor = 1e-13 * std::max(scale, 1e-300);

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > floor)) {
      throw std::runtime_error("singular system; increase lambda or samples");
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = a(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / l(j, j);
    }
  }
  Vector x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= l(i, k) * x[k];
    x[i] /= l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= l(k, i) * x[k];
    x[i] /= l(i, i);
  }
  return x;
}

Vector weighted_ridge(const Matrix& z_aug, std::span<const double> y,
                      std::span<const double> pi, double lambda) {
  const std::size_t n = z_aug.rows();
  const std::size_t p = z_aug.cols();
  if (y.size() != n || pi.size() != n) {
    throw std::invalid_argument("weighted_ridge: y/pi length must equal row count");
  }
  if (lambda < 0.0) throw std::invalid_argument("weighted_ridge: lambda must be >= 0");

  Matrix normal(p, p);
  Vector rhs(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto z = z_aug.row(i);
    const double w = pi[i];
    for (std::size_t a = 0; a < p; ++a) {
      if (z[a] == 0.0) continue;
      const double wz = w * z[a];
      rhs[a] += wz * y[i];
      for (std::size_t b = 0; b <= a; ++b) normal(a, b) += wz * z[b];
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    normal(a, a) += lambda;
    for (std::size_t b = 0; b < a; ++b) normal(b, a) = normal(a, b);
  }
  return cholesky_solve(normal, rhs);
}

}  // namespace xattn
