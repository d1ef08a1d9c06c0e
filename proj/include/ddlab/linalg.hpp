#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace ddlab {

// Small dense row-major matrix. Token alphabets are tiny, so nothing fancy.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  Matrix& operator*=(double a) {
    for (auto& v : data_) v *= a;
    return *this;
  }
  Matrix& operator+=(const Matrix& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  // Max absolute row sum.
  double norm_inf() const {
    double m = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) s += std::abs((*this)(r, c));
      m = std::max(m, s);
    }
    return m;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DomainError("matrix shape mismatch");
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  friend Matrix operator-(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    for (std::size_t k = 0; k < out.data_.size(); ++k) out.data_[k] -= b.data_[k];
    return out;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// exp(A) by scaling and squaring with a Taylor core. The truncation stops once the
// next term drops below tol relative to the running sum.
inline Matrix expm(const Matrix& a, double tol = 1e-13) {
  if (a.rows() != a.cols()) throw DomainError("expm needs a square matrix");
  const std::size_t n = a.rows();
  double nrm = a.norm_inf();
  int squarings = 0;
  while (nrm > 0.5) {
    nrm *= 0.5;
    ++squarings;
  }
  Matrix scaled = a;
  scaled *= std::ldexp(1.0, -squarings);

  Matrix sum = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k < 60; ++k) {
    term = term * scaled;
    term *= 1.0 / k;
    sum += term;
    if (term.max_abs() <= tol * 1e-3 * std::max(1.0, sum.max_abs())) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

}  // namespace ddlab
