#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "skcov/matrix.hpp"
#include "skcov/rng.hpp"
#include "skcov/stats.hpp"

namespace skcov {

struct Spectrum {
  std::vector<double> eigenvalues;       // descending
  std::optional<Matrix> eigenvectors;    // column k pairs with eigenvalues[k]
  bool converged = true;
  double offdiag_mass = 0.0;             // Frobenius mass left off-diagonal at exit
  int sweeps_used = 0;
};

inline double frobenius_norm(const Matrix& m) {
  KahanSum s;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s.add(r[j] * r[j]);
  }
  return std::sqrt(s.value());
}

inline double frobenius_norm(const SymMatrix& m) {
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.size(); ++j) s.add(r[j] * r[j]);
  }
  return std::sqrt(s.value());
}

// Cyclic-by-rows Jacobi eigensolver. Rotates until the off-diagonal
// Frobenius mass drops below tol * ||M||_F or the sweep cap is hit, in which
// case `converged` is false and `offdiag_mass` reports what was achieved.
inline Spectrum jacobi_eigen(const SymMatrix& m, double tol = 1e-12,
                             bool want_vectors = false) {
  constexpr int kMaxSweeps = 100;
  const std::size_t n = m.size();
  if (n == 0) throw std::invalid_argument("jacobi_eigen: empty matrix");

  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = m(i, j);
  std::vector<double> v;
  if (want_vectors) {
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  }

  const double norm = frobenius_norm(m);
  auto offdiag = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
    return std::sqrt(2.0 * s);
  };

  Spectrum out;
  double off = offdiag();
  int sweep = 0;
  while (off > tol * norm && norm > 0.0 && sweep < kMaxSweeps) {
    ++sweep;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        a[p * n + p] = app - t * apq;
        a[q * n + q] = aqq + t * apq;
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a[r * n + p];
          const double arq = a[r * n + q];
          a[r * n + p] = c * arp - s * arq;
          a[p * n + r] = a[r * n + p];
          a[r * n + q] = s * arp + c * arq;
          a[q * n + r] = a[r * n + q];
        }
        if (want_vectors) {
          for (std::size_t r = 0; r < n; ++r) {
            const double vrp = v[r * n + p];
            const double vrq = v[r * n + q];
            v[r * n + p] = c * vrp - s * vrq;
            v[r * n + q] = s * vrp + c * vrq;
          }
        }
      }
    }
    off = offdiag();
  }
  out.converged = (off <= tol * norm || norm == 0.0);
  out.offdiag_mass = off;
  out.sweeps_used = sweep;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x * n + x] > a[y * n + y];
  });
  out.eigenvalues.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.eigenvalues[k] = a[order[k] * n + order[k]];
  if (want_vectors) {
    Matrix vec(n, n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t r = 0; r < n; ++r) vec(r, k) = v[r * n + order[k]];
    out.eigenvectors = std::move(vec);
  }
  return out;
}

// Dense-overload that checks symmetry before delegating.
inline Spectrum jacobi_eigen(const Matrix& m, double tol = 1e-12,
                             bool want_vectors = false) {
  if (m.rows() != m.cols()) throw std::invalid_argument("jacobi_eigen: non-square matrix");
  SymMatrix sym(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i))
        throw std::invalid_argument("jacobi_eigen: non-symmetric input");
      sym.set(i, j, m(i, j));
    }
  return jacobi_eigen(sym, tol, want_vectors);
}

struct OpNormInfo {
  int iterations = 0;
  bool used_fallback = false;
};

// max |eigenvalue| by power iteration on M^2 (so sign of the extreme
// eigenvalue does not matter), deterministic start vector, relative
// tolerance 1e-10, iteration cap 10 n log n; falls back to the Jacobi
// solver if the iteration stalls.
inline double operator_norm(const SymMatrix& m, OpNormInfo* info = nullptr) {
  const std::size_t n = m.size();
  if (n == 0) throw std::invalid_argument("operator_norm: empty matrix");
  if (info) *info = OpNormInfo{};
  if (n == 1) return std::abs(m(0, 0));
  if (frobenius_norm(m) == 0.0) return 0.0;

  Rng rng(0x0b5e55edULL);  // fixed stream: deterministic start vector
  std::vector<double> vcur(n), w(n), u(n);
  double norm0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vcur[i] = rng.uniform01() - 0.5;
    norm0 += vcur[i] * vcur[i];
  }
  norm0 = std::sqrt(norm0);
  for (double& x : vcur) x /= norm0;

  const int cap = std::max(100, static_cast<int>(10.0 * static_cast<double>(n) *
                                                 std::log(static_cast<double>(n))));
  constexpr double kRelTol = 1e-10;
  double est_prev = -1.0;
  for (int it = 0; it < cap; ++it) {
    matvec(m, vcur.data(), w.data());
    double est = 0.0;
    for (std::size_t i = 0; i < n; ++i) est += w[i] * w[i];
    est = std::sqrt(est);  // ||M v||, v unit
    if (info) info->iterations = it + 1;
    if (est == 0.0) break;  // v landed in the kernel; fall back
    matvec(m, w.data(), u.data());
    double un = 0.0;
    for (std::size_t i = 0; i < n; ++i) un += u[i] * u[i];
    un = std::sqrt(un);
    if (un == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) vcur[i] = u[i] / un;
    if (est_prev >= 0.0 && std::abs(est - est_prev) <= kRelTol * est) return est;
    est_prev = est;
  }
  if (info) info->used_fallback = true;
  const Spectrum sp = jacobi_eigen(m);
  return std::max(std::abs(sp.eigenvalues.front()), std::abs(sp.eigenvalues.back()));
}

// Largest (signed) eigenvalue via a spectral shift: A + sI is PSD for
// s = ||A||_op, so ||A + sI||_op = lambda_max(A) + s.
inline double max_eigenvalue(const SymMatrix& m) {
  const std::size_t n = m.size();
  if (n == 1) return m(0, 0);
  const double s = operator_norm(m);
  if (s == 0.0) return 0.0;
  SymMatrix shifted(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      shifted.set(i, j, m(i, j) + (i == j ? s : 0.0));
  return operator_norm(shifted) - s;
}

}  // namespace skcov
