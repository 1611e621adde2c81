#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mscea/errors.hpp"

namespace mscea {

/// Small dense symmetric/general matrix, row major. Dimensions here are the
/// number of regression coefficients, so everything is O(p^2) with tiny p.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

/// Cholesky factor (lower) of a symmetric positive-definite matrix.
/// Throws FitError when the matrix is not positive definite.
inline Matrix cholesky(const Matrix& m, const char* context = "matrix") {
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw FitError(std::string(context) + ": not positive definite (singular or collinear design)");
    }
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

/// Solves m x = b for symmetric positive-definite m via Cholesky.
inline std::vector<double> solve_spd(const Matrix& m, const std::vector<double>& b,
                                     const char* context = "matrix") {
  const Matrix l = cholesky(m, context);
  const std::size_t n = m.rows();
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
inline Matrix invert_spd(const Matrix& m, const char* context = "matrix") {
  const std::size_t n = m.rows();
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    std::vector<double> col = solve_spd(m, e, context);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    e[j] = 0.0;
  }
  // Symmetrize to remove rounding skew.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  return inv;
}

}  // namespace mscea
