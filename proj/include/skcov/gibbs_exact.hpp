#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "skcov/disorder.hpp"
#include "skcov/matrix.hpp"
#include "skcov/stats.hpp"

namespace skcov {

// Enumeration caps. Full enumeration is O(2^n * n); the four-point tensor
// adds O(2^n * n^4/24) accumulation, and the overlap pmf enumerates state
// pairs, hence the tighter caps.
inline constexpr std::size_t kMaxExactN = 24;
inline constexpr std::size_t kMaxFourPointN = 14;
inline constexpr std::size_t kMaxPairEnumN = 13;

// (beta / sqrt(n)) * sum_{i<j} g_ij sigma_i sigma_j
inline double log_weight(const Couplings& c, double beta, std::span<const int> sigma) {
  if (sigma.size() != c.n) throw std::invalid_argument("log_weight: sigma length != n");
  for (int s : sigma)
    if (s != 1 && s != -1) throw std::invalid_argument("log_weight: sigma entries must be +-1");
  double sum = 0.0;
  for (std::size_t i = 0; i < c.n; ++i)
    for (std::size_t j = i + 1; j < c.n; ++j)
      sum += c.g(i, j) * sigma[i] * sigma[j];
  return beta * sum / std::sqrt(static_cast<double>(c.n));
}

namespace detail {

inline double log_weight_signs(const Couplings& c, double beta, const double* sig) {
  double sum = 0.0;
  for (std::size_t i = 0; i < c.n; ++i) {
    const double* row = c.g.row(i);
    double acc = 0.0;
    for (std::size_t j = i + 1; j < c.n; ++j) acc += row[j] * sig[j];
    sum += sig[i] * acc;
  }
  return beta * sum / std::sqrt(static_cast<double>(c.n));
}

}  // namespace detail

// Walk all 2^n spin states in Gray-code order, maintaining the local fields
// h_k = (1/sqrt(n)) sum_{j != k} g_kj sigma_j so each step costs O(n); the
// single-flip log-weight update is -2 beta sigma_k h_k. The incremental
// log-weight is re-anchored against a from-scratch evaluation every 2^16
// steps, which also traps nonfinite weights.
//
// visit(state_bits, sigma, logw) is called once per state; bit i of
// state_bits is set iff sigma[i] == +1.
template <class Visitor>
inline void gray_code_walk(const Couplings& c, double beta, Visitor&& visit) {
  const std::size_t n = c.n;
  if (n > 30) throw std::invalid_argument("gray_code_walk: n too large for state bits");
  const double invsqrt = 1.0 / std::sqrt(static_cast<double>(n));

  std::vector<double> sig(n, -1.0), h(n, 0.0);
  auto recompute_fields = [&]() {
    for (std::size_t k = 0; k < n; ++k) {
      const double* row = c.g.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += row[j] * sig[j];
      h[k] = (acc - row[k] * sig[k]) * invsqrt;
    }
  };
  recompute_fields();
  double ell = detail::log_weight_signs(c, beta, sig.data());

  const std::uint32_t total = std::uint32_t{1} << n;
  std::uint32_t bits = 0;
  for (std::uint32_t s = 0;; ++s) {
    if ((s & 0xFFFFu) == 0u && s != 0u) {
      recompute_fields();
      ell = detail::log_weight_signs(c, beta, sig.data());
      if (!std::isfinite(ell))
        throw std::runtime_error("gray_code_walk: nonfinite log-weight");
    }
    visit(bits, static_cast<const double*>(sig.data()), ell);
    if (s + 1 == total) break;
    const unsigned k = static_cast<unsigned>(std::countr_zero(s + 1));
    ell += -2.0 * beta * sig[k] * h[k];
    sig[k] = -sig[k];
    bits ^= (std::uint32_t{1} << k);
    const double upd = 2.0 * sig[k] * invsqrt;
    const double* row = c.g.row(k);
    const double hk = h[k];
    for (std::size_t j = 0; j < n; ++j) h[j] += upd * row[j];
    h[k] = hk;  // the local field at k excludes sigma_k
  }
}

// Fully symmetric four-point tensor <s_i s_j s_k s_l>, stored packed over
// sorted quadruples i<j<k<l in colexicographic order.
struct FourPointTensor {
  std::size_t n = 0;
  std::vector<double> packed;

  static std::size_t rank(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return i + j * (j - 1) / 2 + k * (k - 1) * (k - 2) / 6 +
           l * (l - 1) * (l - 2) * (l - 3) / 24;
  }

  static std::size_t packed_size(std::size_t n) {
    return n < 4 ? 0 : n * (n - 1) * (n - 2) * (n - 3) / 24;
  }

  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return packed[rank(i, j, k, l)];
  }
};

// Exact Gibbs summary for one disorder instance: log Z, the two-point
// matrix C_ij = <s_i s_j>, the per-spin means (zero up to roundoff at zero
// field), and optionally the distinct-index four-point tensor.
struct ExactSummary {
  std::size_t n = 0;
  double beta = 0.0;
  double log_z = 0.0;
  SymMatrix c;
  std::vector<double> spin_mean;
  std::optional<FourPointTensor> t;
};

// Full enumeration. Weights are accumulated as exp(l - l_ref) with l_ref
// maintained as the running maximum; on a new maximum every accumulator is
// rescaled, so no weight ever exceeds 1. All accumulation is compensated
// and the walk order is fixed, so results are reproducible bit-for-bit.
inline ExactSummary exact_summary(const Couplings& c, double beta,
                                  bool want_four_point = false, std::size_t n_cap = 0) {
  const std::size_t n = c.n;
  if (beta < 0.0) throw std::invalid_argument("exact_summary: beta must be >= 0");
  const std::size_t cap =
      n_cap > 0 ? n_cap : (want_four_point ? kMaxFourPointN : kMaxExactN);
  if (n > cap) throw std::invalid_argument("exact_summary: n exceeds enumeration cap");

  const std::size_t npairs = n * (n - 1) / 2;
  KahanSum zsum;
  std::vector<KahanSum> csum(npairs), msum(n);
  std::vector<KahanSum> tsum;
  if (want_four_point) tsum.assign(FourPointTensor::packed_size(n), KahanSum{});

  double ref = 0.0;
  bool ref_set = false;
  auto rescale_all = [&](double r) {
    zsum.scale(r);
    for (auto& a : csum) a.scale(r);
    for (auto& a : msum) a.scale(r);
    for (auto& a : tsum) a.scale(r);
  };

  gray_code_walk(c, beta, [&](std::uint32_t, const double* sig, double ell) {
    double w;
    if (!ref_set) {
      ref = ell;
      ref_set = true;
      w = 1.0;
    } else if (ell > ref) {
      rescale_all(std::exp(ref - ell));
      ref = ell;
      w = 1.0;
    } else {
      w = std::exp(ell - ref);
    }
    zsum.add(w);
    std::size_t q = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = w * sig[i];
      msum[i].add(wi);
      for (std::size_t j = i + 1; j < n; ++j) csum[q++].add(wi * sig[j]);
    }
    if (!tsum.empty()) {
      std::size_t t = 0;
      for (std::size_t l = 3; l < n; ++l) {
        const double pl = w * sig[l];
        for (std::size_t k = 2; k < l; ++k) {
          const double plk = pl * sig[k];
          for (std::size_t j = 1; j < k; ++j) {
            const double plkj = plk * sig[j];
            for (std::size_t i = 0; i < j; ++i) tsum[t++].add(plkj * sig[i]);
          }
        }
      }
    }
  });

  const double z = zsum.value();
  if (!(z > 0.0) || !std::isfinite(z))
    throw std::runtime_error("exact_summary: nonfinite weight accumulation");

  ExactSummary out;
  out.n = n;
  out.beta = beta;
  out.log_z = ref + std::log(z);
  out.c = SymMatrix(n);
  auto clamp1 = [](double v) { return std::clamp(v, -1.0, 1.0); };
  std::size_t q = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.c.set(i, i, 1.0);
    for (std::size_t j = i + 1; j < n; ++j) out.c.set(i, j, clamp1(csum[q++].value() / z));
  }
  out.spin_mean.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.spin_mean[i] = msum[i].value() / z;
  if (want_four_point) {
    FourPointTensor t;
    t.n = n;
    t.packed.resize(tsum.size());
    for (std::size_t k = 0; k < tsum.size(); ++k) t.packed[k] = clamp1(tsum[k].value() / z);
    out.t = std::move(t);
  }
  return out;
}

// <s_i s_j s_k s_l> for arbitrary indices: repeated indices collapse in
// pairs (s^2 = 1), leaving 1, a two-point value, or a stored four-point
// entry.
inline double four_point_value(const ExactSummary& s, std::size_t i, std::size_t j,
                               std::size_t k, std::size_t l) {
  std::array<std::size_t, 4> idx{i, j, k, l};
  std::sort(idx.begin(), idx.end());
  std::array<std::size_t, 4> odd{};
  std::size_t nodd = 0;
  for (std::size_t p = 0; p < 4;) {
    std::size_t run = p + 1;
    while (run < 4 && idx[run] == idx[p]) ++run;
    if ((run - p) % 2 == 1) odd[nodd++] = idx[p];
    p = run;
  }
  if (nodd == 0) return 1.0;
  if (nodd == 2) return s.c(odd[0], odd[1]);
  if (!s.t) throw std::invalid_argument("four_point_value: four-point tensor not computed");
  return s.t->at(odd[0], odd[1], odd[2], odd[3]);
}

// Single-instance Gibbs expectations of the replica overlap monomials.
struct OverlapMoments {
  double m2 = 0.0;       // <R12^2>
  double m3 = 0.0;       // <R12 R13 R23>
  double m4 = 0.0;       // <R12^4>
  double m22 = 0.0;      // <R12^2 R23^2>
  double m_cycle = 0.0;  // <R12 R23 R34 R14>
  double m_multi = 0.0;  // <R12 R34 R1234>
};

inline double overlap_m2(const SymMatrix& c) {
  const std::size_t n = c.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += c(i, j) * c(i, j);
  const double nd = static_cast<double>(n);
  return s / (nd * nd);
}

inline double overlap_m3(const SymMatrix& c) {
  const std::size_t n = c.size();
  const Matrix c2 = multiply(c, c);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += c2(i, j) * c(i, j);
  const double nd = static_cast<double>(n);
  return s / (nd * nd * nd);
}

inline double overlap_m_cycle(const SymMatrix& c) {
  const std::size_t n = c.size();
  const Matrix c2 = multiply(c, c);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += c2(i, j) * c2(i, j);
  const double nd = static_cast<double>(n);
  return s / (nd * nd * nd * nd);
}

inline double overlap_m_multi(const SymMatrix& c) {
  const std::size_t n = c.size();
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += c(i, k) * c(i, k);
    s += col * col;
  }
  const double nd = static_cast<double>(n);
  return s / (nd * nd * nd);
}

// Closed-form reductions of the six overlap expectations to traces of C
// powers and collapse-aware four-point sums; each is validated against
// direct multi-replica enumeration in the tests. The four-index sums run
// over all n^4 logical tuples, with repeated indices resolved by the
// collapse rules.
inline OverlapMoments overlap_moments_exact(const ExactSummary& s) {
  if (!s.t)
    throw std::invalid_argument("overlap_moments_exact: four-point tensor required");
  const std::size_t n = s.n;
  const double nd = static_cast<double>(n);
  OverlapMoments m;
  m.m2 = overlap_m2(s.c);
  m.m3 = overlap_m3(s.c);
  m.m_cycle = overlap_m_cycle(s.c);
  m.m_multi = overlap_m_multi(s.c);
  KahanSum s4, s22;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          const double t = four_point_value(s, i, j, k, l);
          s4.add(t * t);
          s22.add(s.c(i, j) * s.c(k, l) * t);
        }
  const double n4 = nd * nd * nd * nd;
  m.m4 = s4.value() / n4;
  m.m22 = s22.value() / n4;
  return m;
}

// Exact pmf of the overlap R12 of two independent draws from the Gibbs
// measure; mass[k] sits at r = -1 + 2k/n for k = 0..n.
struct OverlapPmf {
  std::size_t n = 0;
  std::vector<double> mass;

  double overlap(std::size_t k) const {
    return -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(n);
  }

  double moment(int power) const {
    double s = 0.0;
    for (std::size_t k = 0; k < mass.size(); ++k)
      s += std::pow(overlap(k), power) * mass[k];
    return s;
  }

  double mean_abs() const {
    double s = 0.0;
    for (std::size_t k = 0; k < mass.size(); ++k) s += std::abs(overlap(k)) * mass[k];
    return s;
  }
};

namespace detail {

// In-place Walsh-Hadamard butterfly (unnormalized, self-inverse up to 2^n).
inline void fwht(std::vector<double>& a) {
  for (std::size_t len = 1; len < a.size(); len <<= 1)
    for (std::size_t i = 0; i < a.size(); i += len << 1)
      for (std::size_t j = i; j < i + len; ++j) {
        const double x = a[j];
        const double y = a[j + len];
        a[j] = x + y;
        a[j + len] = x - y;
      }
}

}  // namespace detail

// The overlap pmf equals the XOR autocorrelation of the state probabilities
// bucketed by Hamming weight, computed with the Walsh-Hadamard transform in
// O(n 2^n) instead of enumerating the 2^{2n} state pairs directly.
inline OverlapPmf overlap_distribution_small(const Couplings& c, double beta) {
  const std::size_t n = c.n;
  if (beta < 0.0) throw std::invalid_argument("overlap_distribution_small: beta must be >= 0");
  if (n > kMaxPairEnumN)
    throw std::invalid_argument("overlap_distribution_small: n exceeds pair-enumeration cap");
  const std::size_t total = std::size_t{1} << n;

  std::vector<double> ell(total);
  gray_code_walk(c, beta, [&](std::uint32_t bits, const double*, double lw) {
    ell[bits] = lw;
  });
  const double ref = *std::max_element(ell.begin(), ell.end());
  std::vector<double> p(total);
  KahanSum z;
  for (std::size_t s = 0; s < total; ++s) {
    p[s] = std::exp(ell[s] - ref);
    z.add(p[s]);
  }
  const double zv = z.value();
  for (double& x : p) x /= zv;

  detail::fwht(p);
  for (double& x : p) x *= x;
  detail::fwht(p);
  const double scale = 1.0 / static_cast<double>(total);

  OverlapPmf pmf;
  pmf.n = n;
  pmf.mass.assign(n + 1, 0.0);
  for (std::size_t x = 0; x < total; ++x) {
    const std::size_t d = static_cast<std::size_t>(std::popcount(x));
    pmf.mass[n - d] += p[x] * scale;
  }
  return pmf;
}

}  // namespace skcov
