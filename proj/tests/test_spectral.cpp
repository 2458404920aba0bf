#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "skcov/disorder.hpp"
#include "skcov/gibbs_exact.hpp"
#include "skcov/rng.hpp"
#include "skcov/spectral.hpp"

using namespace skcov;

namespace {

SymMatrix random_sym(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m.set(i, j, 2.0 * rng.uniform01() - 1.0);
  return m;
}

}  // namespace

TEST_CASE("diagonal input: eigenvalues are the sorted diagonal") {
  SymMatrix m(4);
  m.set(0, 0, 3.0);
  m.set(1, 1, -1.0);
  m.set(2, 2, 7.0);
  m.set(3, 3, 0.5);
  const Spectrum sp = jacobi_eigen(m);
  REQUIRE(sp.converged);
  const std::vector<double> want{7.0, 3.0, 0.5, -1.0};
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(sp.eigenvalues[i] == Catch::Approx(want[i]).margin(1e-14));
}

TEST_CASE("2x2 closed form") {
  const double c = 0.3;
  SymMatrix m(2);
  m.set(0, 0, 1.0);
  m.set(1, 1, 1.0);
  m.set(0, 1, c);
  const Spectrum sp = jacobi_eigen(m);
  CHECK(sp.eigenvalues[0] == Catch::Approx(1.0 + c).margin(1e-13));
  CHECK(sp.eigenvalues[1] == Catch::Approx(1.0 - c).margin(1e-13));
}

TEST_CASE("trace identities on a random 50x50 matrix") {
  const SymMatrix m = random_sym(50, 99);
  const Spectrum sp = jacobi_eigen(m);
  REQUIRE(sp.converged);
  double tr = 0.0, frob_sq = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    tr += m(i, i);
    for (std::size_t j = 0; j < 50; ++j) frob_sq += m(i, j) * m(i, j);
  }
  double sum = 0.0, sq = 0.0;
  for (double v : sp.eigenvalues) {
    sum += v;
    sq += v * v;
  }
  CHECK(sum == Catch::Approx(tr).margin(1e-9));
  CHECK(sq == Catch::Approx(frob_sq).margin(1e-9));
}

TEST_CASE("eigenvector reconstruction and orthonormality") {
  const std::size_t n = 20;
  const SymMatrix m = random_sym(n, 7);
  const Spectrum sp = jacobi_eigen(m, 1e-12, true);
  REQUIRE(sp.converged);
  REQUIRE(sp.eigenvectors.has_value());
  const Matrix& v = *sp.eigenvectors;
  const double norm = frobenius_norm(m);

  Matrix recon(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        recon(i, j) += v(i, k) * sp.eigenvalues[k] * v(j, k);
  double resid = 0.0, ortho = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = recon(i, j) - m(i, j);
      resid += d * d;
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += v(k, i) * v(k, j);
      const double e = dot - (i == j ? 1.0 : 0.0);
      ortho += e * e;
    }
  CHECK(std::sqrt(resid) <= 1e-10 * norm);
  CHECK(std::sqrt(ortho) <= 1e-10);
}

TEST_CASE("non-symmetric dense input is rejected") {
  Matrix m(2, 2, 0.0);
  m(0, 1) = 1.0;
  m(1, 0) = 2.0;
  CHECK_THROWS_AS(jacobi_eigen(m), std::invalid_argument);
  Matrix rect(2, 3, 0.0);
  CHECK_THROWS_AS(jacobi_eigen(rect), std::invalid_argument);
}

TEST_CASE("operator norm") {
  CHECK(operator_norm(SymMatrix::identity(5)) == Catch::Approx(1.0).margin(1e-12));

  SymMatrix m(2);
  m.set(0, 0, 1.0);
  m.set(1, 1, 1.0);
  m.set(0, 1, 0.3395);
  CHECK(operator_norm(m) == Catch::Approx(1.3395).margin(1e-9));

  // dominant eigenvalue can be negative
  SymMatrix neg(2);
  neg.set(0, 0, -5.0);
  neg.set(1, 1, 1.0);
  CHECK(operator_norm(neg) == Catch::Approx(5.0).margin(1e-9));

  CHECK(operator_norm(SymMatrix(3)) == 0.0);
  CHECK(operator_norm(random_sym(1, 1)) == std::abs(random_sym(1, 1)(0, 0)));
}

TEST_CASE("operator norm agrees with jacobi on 20 random matrices") {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k) * 2;
    const SymMatrix m = random_sym(n, 1000 + k);
    const Spectrum sp = jacobi_eigen(m);
    const double want =
        std::max(std::abs(sp.eigenvalues.front()), std::abs(sp.eigenvalues.back()));
    CHECK(operator_norm(m) == Catch::Approx(want).margin(1e-9));
    CHECK(max_eigenvalue(m) == Catch::Approx(sp.eigenvalues.front()).margin(1e-8));
  }
}

TEST_CASE("frobenius norm") {
  CHECK(frobenius_norm(SymMatrix::identity(4)) == Catch::Approx(2.0).margin(1e-14));
  CHECK(frobenius_norm(Matrix(3, 5, 0.0)) == 0.0);
  const SymMatrix m = random_sym(12, 55);
  const Matrix m2 = multiply(m, m);
  CHECK(frobenius_norm(m) * frobenius_norm(m) ==
        Catch::Approx(trace(m2)).margin(1e-12));
}

TEST_CASE("gibbs covariance is PSD with matching norms") {
  const Couplings c = sample_couplings(8, 31);
  const SymMatrix cov = exact_summary(c, 0.9, false).c;
  const Spectrum sp = jacobi_eigen(cov);
  CHECK(sp.eigenvalues.back() >= -1e-10);
  CHECK(operator_norm(cov) == Catch::Approx(sp.eigenvalues.front()).margin(1e-9));
}
