#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "skcov/matrix.hpp"
#include "skcov/rng.hpp"

namespace skcov {

// One quenched disorder instance: the symmetric coupling matrix g with
// i.i.d. N(0,1) entries on and above the diagonal, mirrored below.
//
// The Hamiltonian sums only i<j, so every Gibbs quantity is independent of
// the diagonal; g_ii is still sampled because it enters the scaled
// interaction matrix A = g/sqrt(n), and a unit-variance diagonal keeps the
// disorder-averaged trace/Frobenius identities exact.
struct Couplings {
  std::size_t n = 0;
  SymMatrix g;
};

inline Couplings sample_couplings(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_couplings: n must be >= 1");
  Rng rng(seed);
  SymMatrix g(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) g.set(i, j, rng.normal());
  return Couplings{n, std::move(g)};
}

inline Couplings with_zero_diagonal(Couplings c) {
  for (std::size_t i = 0; i < c.n; ++i) c.g.set(i, i, 0.0);
  return c;
}

// A = g / sqrt(n), diagonal included.
inline SymMatrix interaction_matrix(const Couplings& c) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(c.n));
  SymMatrix a(c.n);
  for (std::size_t i = 0; i < c.n; ++i)
    for (std::size_t j = i; j < c.n; ++j) a.set(i, j, c.g(i, j) * inv);
  return a;
}

// (1 + beta^2) I - beta A
inline SymMatrix tap_shift_operator(double beta, const SymMatrix& a) {
  const std::size_t n = a.size();
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = -beta * a(i, j);
      if (i == j) v += 1.0 + beta * beta;
      m.set(i, j, v);
    }
  }
  return m;
}

// CSV dump of the upper triangle (diagonal included), row-major, one matrix
// row per line, %.17g so values round-trip bit-exactly. First line is n.
inline void write_couplings_csv(const Couplings& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_couplings_csv: cannot open " + path);
  out << c.n << "\n";
  char buf[32];
  for (std::size_t i = 0; i < c.n; ++i) {
    for (std::size_t j = i; j < c.n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", c.g(i, j));
      out << buf << (j + 1 < c.n ? "," : "");
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_couplings_csv: write failed: " + path);
}

inline Couplings read_couplings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_couplings_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_couplings_csv: empty file: " + path);
  const std::size_t n = std::stoul(line);
  if (n == 0) throw std::runtime_error("read_couplings_csv: bad size in " + path);
  SymMatrix g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("read_couplings_csv: truncated file: " + path);
    std::istringstream row(line);
    std::string cell;
    for (std::size_t j = i; j < n; ++j) {
      if (!std::getline(row, cell, ','))
        throw std::runtime_error("read_couplings_csv: truncated row in " + path);
      g.set(i, j, std::stod(cell));
    }
  }
  return Couplings{n, std::move(g)};
}

}  // namespace skcov
