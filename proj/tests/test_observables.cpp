#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "skcov/disorder.hpp"
#include "skcov/gibbs_exact.hpp"
#include "skcov/observables.hpp"
#include "skcov/spectral.hpp"
#include "skcov/stats.hpp"

using namespace skcov;

TEST_CASE("tap report at beta = 0 reduces to C") {
  const Couplings c = sample_couplings(5, 21);
  const ExactSummary s = exact_summary(c, 0.0);
  const TapReport tap = tap_report(s.c, interaction_matrix(c), 0.0);
  double want = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(tap.p(i, j) == Catch::Approx(s.c(i, j)).margin(1e-14));
      const double d = s.c(i, j) - (i == j ? 1.0 : 0.0);
      want += d * d;
    }
  CHECK(tap.resid_frob_sq == Catch::Approx(want).margin(1e-14));
}

TEST_CASE("tap report scalar case") {
  Couplings one{1, SymMatrix(1)};
  one.g.set(0, 0, 1.7);
  const double beta = 0.6;
  const TapReport tap =
      tap_report(SymMatrix::identity(1), interaction_matrix(one), beta);
  const double p = (1.0 + beta * beta) - beta * 1.7;
  CHECK(tap.p(0, 0) == Catch::Approx(p).margin(1e-14));
  CHECK(tap.resid_frob_sq == Catch::Approx((p - 1.0) * (p - 1.0)).margin(1e-14));
  CHECK(tap.cov_opnorm == 1.0);
}

TEST_CASE("tap report two-spin closed form") {
  Couplings c{2, SymMatrix(2)};
  const double g12 = 0.8, beta = 0.9;
  c.g.set(0, 1, g12);
  const ExactSummary s = exact_summary(c, beta);
  const double cc = std::tanh(beta * g12 / std::sqrt(2.0));
  const double b2 = 1.0 + beta * beta;
  const double a = g12 / std::sqrt(2.0);
  // P = [[b2, -ba],[-ba, b2]] * [[1, c],[c, 1]] by hand
  const TapReport tap = tap_report(s.c, interaction_matrix(c), beta, true);
  CHECK(tap.p(0, 0) == Catch::Approx(b2 - beta * a * cc).margin(1e-12));
  CHECK(tap.p(0, 1) == Catch::Approx(b2 * cc - beta * a).margin(1e-12));
  CHECK(tap.p(1, 0) == Catch::Approx(b2 * cc - beta * a).margin(1e-12));
  CHECK(tap.trace_p == Catch::Approx(2.0 * (b2 - beta * a * cc)).margin(1e-12));

  // row residuals are the squared off-diagonal entries of P
  REQUIRE(tap.row_resid.has_value());
  CHECK((*tap.row_resid)(0, 1) ==
        Catch::Approx(tap.p(0, 1) * tap.p(0, 1)).margin(1e-14));
  CHECK((*tap.row_resid)(0, 0) == 0.0);
}

TEST_CASE("row residual matches its defining formula") {
  const Couplings c = sample_couplings(7, 4);
  const double beta = 0.7;
  const ExactSummary s = exact_summary(c, beta);
  const TapReport tap =
      tap_report(s.c, interaction_matrix(c), beta, true);
  const double invsqrt = 1.0 / std::sqrt(7.0);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 7; ++j) {
      if (i == j) continue;
      double conv = 0.0;
      for (std::size_t k = 0; k < 7; ++k) conv += c.g(i, k) * s.c(k, j);
      const double resid =
          (1.0 + beta * beta) * s.c(i, j) - beta * invsqrt * conv;
      CHECK((*tap.row_resid)(i, j) == Catch::Approx(resid * resid).margin(1e-12));
    }
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(tap_report(SymMatrix::identity(3), SymMatrix(4), 0.5),
                  std::invalid_argument);
}

TEST_CASE("frobenius norm squared equals n^2 m2") {
  const ExactSummary s = exact_summary(sample_couplings(11, 8), 0.85);
  const double f = frobenius_norm(s.c);
  const double viaM2 = 121.0 * overlap_m2(s.c);
  CHECK(f * f == Catch::Approx(viaM2).epsilon(1e-10));
}

TEST_CASE("norm chain inequalities") {
  const ExactSummary s = exact_summary(sample_couplings(9, 12), 1.1);
  const TapReport tap = tap_report(s.c, interaction_matrix(sample_couplings(9, 12)), 1.1);
  CHECK(tap.cov_opnorm >= tap.cov_frob / 3.0 - 1e-12);
  CHECK(tap.cov_frob <= 3.0 * tap.cov_opnorm + 1e-12);
  CHECK(tap.cov_opnorm >= 1.0 - 1e-10);
}

namespace {

std::vector<InstanceObservables> build_ensemble(std::size_t n, double beta,
                                                std::size_t count,
                                                std::uint64_t master) {
  std::vector<InstanceObservables> obs;
  obs.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const Couplings c = sample_couplings(n, derive_seed(master, {{"instance", k}}));
    const ExactSummary s = exact_summary(c, beta, true);
    obs.push_back({overlap_moments_exact(s),
                   tap_report(s.c, interaction_matrix(c), beta)});
  }
  return obs;
}

}  // namespace

TEST_CASE("trace and frobenius identities hold in disorder expectation") {
  const std::size_t n = 6;
  const double beta = 0.5;
  const auto obs = build_ensemble(n, beta, 300, 2026);
  const IdentityCheck tc = identity_trace_check(obs, n, beta);
  const IdentityCheck fc = identity_frobenius_check(obs, n, beta);
  CHECK(tc.count == 300);
  CHECK(std::abs(tc.z_score) <= 4.0);
  CHECK(std::abs(fc.z_score) <= 4.0);
  CHECK(tc.lhs_stderr > 0.0);
  CHECK(fc.diff_stderr > 0.0);
}

TEST_CASE("identities are degenerate but exact at beta = 0") {
  const auto obs = build_ensemble(5, 0.0, 10, 7);
  const IdentityCheck tc = identity_trace_check(obs, 5, 0.0);
  CHECK(tc.diff_mean == 0.0);
  CHECK(tc.z_score == 0.0);
  const IdentityCheck fc = identity_frobenius_check(obs, 5, 0.0);
  CHECK(fc.diff_mean == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("single-site identities across disorder") {
  // n = 1: Tr(P) = 1 + b^2 - b g11, rhs = 1 + b^2; E||P||_F^2 = (1+b^2)^2 + b^2
  const double beta = 0.8;
  const auto obs = build_ensemble(1, beta, 2000, 99);
  const IdentityCheck tc = identity_trace_check(obs, 1, beta);
  const IdentityCheck fc = identity_frobenius_check(obs, 1, beta);
  CHECK(std::abs(tc.z_score) <= 4.0);
  CHECK(std::abs(fc.z_score) <= 4.0);
  CHECK(tc.rhs_mean == Catch::Approx(1.0 + beta * beta).margin(1e-12));
}

TEST_CASE("identity checks reject degenerate ensembles") {
  const auto obs = build_ensemble(3, 0.5, 2, 1);
  CHECK_NOTHROW(identity_trace_check(obs, 3, 0.5));
  const std::vector<InstanceObservables> empty;
  CHECK_THROWS_AS(identity_trace_check(empty, 3, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(identity_frobenius_check(empty, 3, 0.5), std::invalid_argument);
}

TEST_CASE("predicted moments") {
  const PredictedMoments p = predicted_moments(100, 0.5);
  CHECK(100.0 * p.m2 ==
        Catch::Approx(4.0 / 3.0 - 0.9876543209876543 / 100.0).epsilon(1e-12));
  CHECK(p.m3 == Catch::Approx(1.0 / (1e4 * std::pow(0.75, 3))).epsilon(1e-12));
  CHECK(p.m4 == Catch::Approx(3.0 / (1e4 * 0.5625)).epsilon(1e-12));
  CHECK(p.m22 == Catch::Approx(1.0 / (1e4 * 0.5625)).epsilon(1e-12));
  CHECK(p.m_cycle == 0.0);

  const PredictedMoments z = predicted_moments(10, 0.0);
  CHECK(z.m2 == Catch::Approx(0.1).margin(1e-15));
  CHECK(z.m3 == Catch::Approx(0.01).margin(1e-15));
  CHECK(z.m4 == Catch::Approx(0.03).margin(1e-15));
  CHECK(z.m22 == Catch::Approx(0.01).margin(1e-15));

  CHECK_THROWS_AS(predicted_moments(10, 1.0), std::invalid_argument);
}

TEST_CASE("predicted residual constant") {
  CHECK(predicted_residual_constant(0.0) == 0.0);
  CHECK(predicted_residual_constant(0.5) == Catch::Approx(5.0 / 9.0).epsilon(1e-12));
  CHECK(predicted_residual_constant(0.5) == Catch::Approx(0.55556).margin(5e-6));
  CHECK(predicted_residual_constant(0.8) == Catch::Approx(8.098765432).margin(1e-6));
  CHECK_THROWS_AS(predicted_residual_constant(1.0), std::invalid_argument);
}

TEST_CASE("high-temperature operator norm lower bound") {
  CHECK(hightemp_opnorm_lower(0.0) == Catch::Approx(0.7978845608).margin(1e-9));
  CHECK(hightemp_opnorm_lower(0.8) == Catch::Approx(1.3298).margin(1e-4));
  CHECK(hightemp_opnorm_lower(0.95) > hightemp_opnorm_lower(0.9));
  CHECK_THROWS_AS(hightemp_opnorm_lower(1.0), std::invalid_argument);
}

TEST_CASE("residual constant agrees with the combined identity predictors") {
  // limit of frobenius_rhs(predicted moments) - 2 predicted_trace + n
  for (double beta : {0.3, 0.5, 0.7}) {
    const std::size_t n = 64;
    const PredictedMoments p = predicted_moments(n, beta);
    OverlapMoments m;
    m.m2 = p.m2;
    m.m3 = p.m3;
    m.m4 = p.m4;
    m.m22 = p.m22;
    m.m_cycle = p.m_cycle;
    const double combined = frobenius_rhs(n, beta, m) -
                            2.0 * predicted_trace(n, beta) + static_cast<double>(n);
    CHECK(combined == Catch::Approx(predicted_residual_constant(beta)).margin(1e-9));
  }
}

TEST_CASE("integration-by-parts derivative check") {
  const Couplings c = sample_couplings(6, 64);

  SECTION("k = l is exactly flat") {
    const DerivativeCheck d =
        ibp_derivative_check(c, 0.7, {1, 4, 2, 2}, 1e-5);
    CHECK(d.finite_diff == 0.0);
    CHECK(d.formula == 0.0);
  }

  SECTION("(i,j) = (k,l) is the variance form") {
    const DerivativeCheck d = ibp_derivative_check(c, 0.7, {1, 3, 1, 3}, 1e-5);
    CHECK(d.formula >= 0.0);
    CHECK(d.abs_diff <= 1e-6);
  }

  SECTION("random tuples at several temperatures") {
    Rng rng(17);
    for (double beta : {0.2, 0.7, 1.1}) {
      for (int t = 0; t < 10; ++t) {
        const std::array<std::size_t, 4> ijkl{
            static_cast<std::size_t>(rng.below(6)),
            static_cast<std::size_t>(rng.below(6)),
            static_cast<std::size_t>(rng.below(6)),
            static_cast<std::size_t>(rng.below(6))};
        const DerivativeCheck d = ibp_derivative_check(c, beta, ijkl, 1e-5);
        CHECK(d.abs_diff <= 1e-6);
      }
    }
  }

  SECTION("bad arguments") {
    CHECK_THROWS_AS(ibp_derivative_check(c, 0.5, {0, 1, 2, 6}, 1e-5),
                    std::invalid_argument);
    CHECK_THROWS_AS(ibp_derivative_check(c, 0.5, {0, 1, 2, 3}, 0.0),
                    std::invalid_argument);
  }
}
