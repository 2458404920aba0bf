#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace skcov {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  double* row(std::size_t i) { return a_.data() + i * cols_; }
  const double* row(std::size_t i) const { return a_.data() + i * cols_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

// Symmetric n x n matrix. Both triangles are stored for fast row access;
// set() writes the two mirrored slots, so (i,j) and (j,i) always hold the
// same value and symmetry cannot be violated through the public surface.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}

  static SymMatrix identity(std::size_t n) {
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
  }

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

  void set(std::size_t i, std::size_t j, double v) {
    a_[i * n_ + j] = v;
    a_[j * n_ + i] = v;
  }

  const double* row(std::size_t i) const { return a_.data() + i * n_; }

  Matrix dense() const {
    Matrix m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  bool operator==(const SymMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

inline void matvec(const SymMatrix& m, const double* x, double* y) {
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += r[j] * x[j];
    y[i] = s;
  }
}

// out = a * b, cache-friendly i-k-j order.
inline Matrix multiply(const SymMatrix& a, const SymMatrix& b) {
  const std::size_t n = a.size();
  if (b.size() != n) throw std::invalid_argument("multiply: dimension mismatch");
  Matrix out(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.row(i);
    double* outr = out.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = ar[k];
      const double* br = b.row(k);
      for (std::size_t j = 0; j < n; ++j) outr[j] += aik * br[j];
    }
  }
  return out;
}

inline double trace(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("trace: non-square matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, i);
  return s;
}

}  // namespace skcov
