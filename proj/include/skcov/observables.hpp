#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "skcov/disorder.hpp"
#include "skcov/gibbs_exact.hpp"
#include "skcov/matrix.hpp"
#include "skcov/spectral.hpp"
#include "skcov/stats.hpp"

namespace skcov {

// TAP residual operator P = ((1+beta^2) I - beta A) C and the norms used by
// the experiments. P is generally non-symmetric. row_resid, when requested,
// holds the squared per-pair residual ((1+b^2)C_ij - (b/sqrt(n)) sum_k
// g_ik C_kj)^2 for i != j, which is P_ij^2 off the diagonal.
struct TapReport {
  Matrix p;
  double trace_p = 0.0;
  double resid_frob_sq = 0.0;  // ||P - I||_F^2
  double cov_opnorm = 0.0;
  double cov_frob = 0.0;
  std::optional<Matrix> row_resid;
};

inline TapReport tap_report(const SymMatrix& c, const SymMatrix& a, double beta,
                            bool want_row_resid = false) {
  const std::size_t n = c.size();
  if (a.size() != n) throw std::invalid_argument("tap_report: dimension mismatch");
  TapReport r;
  r.p = multiply(tap_shift_operator(beta, a), c);
  r.trace_p = trace(r.p);
  KahanSum resid;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = r.p(i, j) - (i == j ? 1.0 : 0.0);
      resid.add(d * d);
    }
  r.resid_frob_sq = resid.value();
  r.cov_opnorm = operator_norm(c);
  r.cov_frob = frobenius_norm(c);
  if (want_row_resid) {
    Matrix rr(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) rr(i, j) = r.p(i, j) * r.p(i, j);
    r.row_resid = std::move(rr);
  }
  return r;
}

// Per-instance right-hand sides of the two disorder-expectation identities.
inline double trace_rhs(std::size_t n, double beta, double m2) {
  const double nd = static_cast<double>(n);
  return nd + nd * beta * beta * m2;
}

inline double frobenius_rhs(std::size_t n, double beta, const OverlapMoments& m) {
  const double nd = static_cast<double>(n);
  const double n2 = nd * nd;
  const double b2 = beta * beta;
  const double b4 = b2 * b2;
  return (1.0 - b2) * n2 * m.m2 + (4.0 * b2 * (1.0 + b2) - 6.0 * b4) * n2 * m.m3 +
         b4 * n2 * m.m4 - 4.0 * b4 * n2 * m.m22 + 6.0 * b4 * n2 * m.m_cycle;
}

// Ensemble z-test of an identity that holds exactly in disorder
// expectation: both sides fluctuate per instance, their difference has mean
// zero.
struct IdentityCheck {
  std::size_t count = 0;
  double lhs_mean = 0.0, lhs_stderr = 0.0;
  double rhs_mean = 0.0, rhs_stderr = 0.0;
  double diff_mean = 0.0, diff_stderr = 0.0;
  double z_score = 0.0;
};

struct InstanceObservables {
  OverlapMoments moments;
  TapReport tap;
};

namespace detail {

template <class Lhs, class Rhs>
inline IdentityCheck identity_check(std::span<const InstanceObservables> ensemble,
                                    Lhs&& lhs_of, Rhs&& rhs_of) {
  if (ensemble.size() < 2)
    throw std::invalid_argument("identity check: need at least 2 instances");
  EnsembleStat lhs, rhs, diff;
  for (const InstanceObservables& io : ensemble) {
    const double l = lhs_of(io);
    const double r = rhs_of(io);
    lhs.add(l);
    rhs.add(r);
    diff.add(l - r);
  }
  IdentityCheck out;
  out.count = lhs.count;
  out.lhs_mean = lhs.mean;
  out.lhs_stderr = lhs.se();
  out.rhs_mean = rhs.mean;
  out.rhs_stderr = rhs.se();
  out.diff_mean = diff.mean;
  out.diff_stderr = diff.se();
  out.z_score = (out.diff_stderr > 0.0) ? out.diff_mean / out.diff_stderr
                                        : (out.diff_mean == 0.0 ? 0.0 : INFINITY);
  return out;
}

}  // namespace detail

// E Tr(P) = n + n beta^2 E<R12^2>, exact at every n.
inline IdentityCheck identity_trace_check(std::span<const InstanceObservables> ensemble,
                                          std::size_t n, double beta) {
  return detail::identity_check(
      ensemble, [](const InstanceObservables& io) { return io.tap.trace_p; },
      [&](const InstanceObservables& io) { return trace_rhs(n, beta, io.moments.m2); });
}

// E||P||_F^2 equals the five-overlap combination, exact at every n.
inline IdentityCheck identity_frobenius_check(
    std::span<const InstanceObservables> ensemble, std::size_t n, double beta) {
  for (const InstanceObservables& io : ensemble)
    if (!std::isfinite(io.moments.m4) || !std::isfinite(io.moments.m22) ||
        !std::isfinite(io.moments.m_cycle))
      throw std::invalid_argument(
          "identity_frobenius_check: four-point overlap moments missing");
  return detail::identity_check(
      ensemble,
      [](const InstanceObservables& io) {
        const double f = frobenius_norm(io.tap.p);
        return f * f;
      },
      [&](const InstanceObservables& io) { return frobenius_rhs(n, beta, io.moments); });
}

// High-temperature expansions of the overlap moments, valid for beta < 1 up
// to O(n^{-5/2}). No expansion is available for the cycle term at this
// order, so its predictor is 0.
struct PredictedMoments {
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  double m22 = 0.0;
  double m_cycle = 0.0;
};

inline PredictedMoments predicted_moments(std::size_t n, double beta) {
  if (beta >= 1.0)
    throw std::invalid_argument("predicted_moments: requires beta < 1");
  const double nd = static_cast<double>(n);
  const double b2 = beta * beta;
  const double u = 1.0 - b2;
  PredictedMoments p;
  p.m2 = 1.0 / (nd * u) - b2 * (1.0 + b2) / (nd * nd * u * u * u * u);
  p.m3 = 1.0 / (nd * nd * u * u * u);
  p.m4 = 3.0 / (nd * nd * u * u);
  p.m22 = 1.0 / (nd * nd * u * u);
  p.m_cycle = 0.0;
  return p;
}

// n + beta^2/(1-beta^2): the large-n form of E Tr(P) at beta < 1.
inline double predicted_trace(std::size_t n, double beta) {
  if (beta >= 1.0) throw std::invalid_argument("predicted_trace: requires beta < 1");
  const double b2 = beta * beta;
  return static_cast<double>(n) + b2 / (1.0 - b2);
}

// beta^2 (1+beta^2) / (1-beta^2)^2: the large-n limit of E||P - I||_F^2.
inline double predicted_residual_constant(double beta) {
  if (beta >= 1.0)
    throw std::invalid_argument("predicted_residual_constant: requires beta < 1");
  const double b2 = beta * beta;
  const double u = 1.0 - b2;
  return b2 * (1.0 + b2) / (u * u);
}

// sqrt(2 / (pi (1-beta^2))): asymptotic lower bound on E||C||_op at beta < 1.
inline double hightemp_opnorm_lower(double beta) {
  if (beta >= 1.0)
    throw std::invalid_argument("hightemp_opnorm_lower: requires beta < 1");
  constexpr double kPi = 3.14159265358979323846;
  return std::sqrt(2.0 / (kPi * (1.0 - beta * beta)));
}

// Central-difference check of d<\s_i s_j>/d g_kl against
// (beta/sqrt(n)) (<s_i s_j s_k s_l> - <s_i s_j><s_k s_l>). The Hamiltonian
// reads each unordered pair once, so the perturbation writes the single
// stored coupling (both mirrored slots carry the same value).
struct DerivativeCheck {
  double finite_diff = 0.0;
  double formula = 0.0;
  double abs_diff = 0.0;
};

inline DerivativeCheck ibp_derivative_check(const Couplings& c, double beta,
                                            std::array<std::size_t, 4> ijkl,
                                            double step) {
  const auto [i, j, k, l] = ijkl;
  if (i >= c.n || j >= c.n || k >= c.n || l >= c.n)
    throw std::invalid_argument("ibp_derivative_check: index out of range");
  if (!(step > 0.0)) throw std::invalid_argument("ibp_derivative_check: step must be > 0");

  Couplings plus = c, minus = c;
  plus.g.set(k, l, c.g(k, l) + step);
  minus.g.set(k, l, c.g(k, l) - step);
  const ExactSummary sp = exact_summary(plus, beta, false);
  const ExactSummary sm = exact_summary(minus, beta, false);

  DerivativeCheck out;
  out.finite_diff = (sp.c(i, j) - sm.c(i, j)) / (2.0 * step);
  const ExactSummary s0 = exact_summary(c, beta, true);
  out.formula = beta / std::sqrt(static_cast<double>(c.n)) *
                (four_point_value(s0, i, j, k, l) - s0.c(i, j) * s0.c(k, l));
  out.abs_diff = std::abs(out.finite_diff - out.formula);
  return out;
}

}  // namespace skcov
