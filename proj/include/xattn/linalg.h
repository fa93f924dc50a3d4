// Dense linear algebra used by the model, the explainers and the LIME
// surrogate. Everything is 64-bit and row-major.

#ifndef XATTN_LINALG_H_
#define XATTN_LINALG_H_

#include <cstddef>
#include <span>
#include <vector>

namespace xattn {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  // Throws std::invalid_argument when data.size() != rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// M v. Throws std::invalid_argument on dimension mismatch.
Vector matvec(const Matrix& m, std::span<const double> v);
// M^T v.
Vector transpose_matvec(const Matrix& m, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
// a += scale * b
void axpy(double scale, std::span<const double> b, std::span<double> a);

// Max-subtracted softmax. Throws std::invalid_argument("empty logits").
Vector softmax(std::span<const double> logits);

// Minimizes sum_i pi_i (y_i - beta . z_i)^2 + lambda |beta|^2 through the
// normal equations and a Cholesky factorization. `z_aug` carries the
// intercept column. Throws std::runtime_error when the normal matrix is not
// positive definite.
Vector weighted_ridge(const Matrix& z_aug, std::span<const double> y,
                      std::span<const double> pi, double lambda);

// Solves A x = b for symmetric positive definite A.
Vector cholesky_solve(const Matrix& a, std::span<const double> b);

}  // namespace xattn

#endif  // XATTN_LINALG_H_
