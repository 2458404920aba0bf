#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skcov/disorder.hpp"
#include "skcov/gibbs_exact.hpp"
#include "skcov/matrix.hpp"
#include "skcov/rng.hpp"
#include "skcov/stats.hpp"

namespace skcov {

struct ChainConfig {
  std::size_t sweeps = 0;
  std::size_t burn_in_sweeps = 0;
  std::size_t thin = 1;              // record every thin-th sweep
  std::size_t replicas = 4;          // independent chains (>= 4 enables m3/m_cycle)
  std::vector<double> ladder;        // ascending inverse temperatures; empty = single rung
  std::uint64_t seed = 0;
  std::size_t batches = 20;          // batch-means stderr batches
  bool keep_series = false;          // retain per-pair overlap series for dumping

  static ChainConfig defaults_for(std::size_t sweeps, std::uint64_t seed) {
    ChainConfig cfg;
    cfg.sweeps = sweeps;
    cfg.burn_in_sweeps = sweeps / 10;
    cfg.seed = seed;
    return cfg;
  }
};

struct McmcEstimate {
  SymMatrix c_hat;                   // unit diagonal by construction
  SymMatrix c_se;                    // batch-means stderr per off-diagonal entry
  OverlapMoments moments_hat;        // NaN for estimators needing more replicas
  OverlapMoments moments_se;
  double abs_r_hat = 0.0;            // <|R12|> estimate
  double abs_r_se = 0.0;
  std::vector<double> swap_acceptance;  // per adjacent ladder pair, pooled
  std::size_t samples_used = 0;      // recorded sweeps per replica
  double accept_rate = 0.0;          // pooled single-flip acceptance
  bool ladder_warning = false;       // some swap rate outside (0.05, 0.95)
  std::vector<std::uint64_t> state_visits;  // recorded-state histogram, n <= 4 only
  std::vector<std::string> series_names;
  std::vector<std::vector<double>> overlap_series;  // one series per replica pair
};

// Standard error of the series mean by the method of batch means: split
// into batch_count equal batches (remainder tail dropped) and take the
// stderr of the batch means.
inline double batch_means_stderr(std::span<const double> series, std::size_t batch_count) {
  if (batch_count < 10)
    throw std::invalid_argument("batch_means_stderr: batch_count must be >= 10");
  if (series.size() < 10 * batch_count)
    throw std::invalid_argument("batch_means_stderr: series too short");
  const std::size_t len = series.size() / batch_count;
  EnsembleStat batches;
  for (std::size_t b = 0; b < batch_count; ++b) {
    double s = 0.0;
    for (std::size_t t = b * len; t < (b + 1) * len; ++t) s += series[t];
    batches.add(s / static_cast<double>(len));
  }
  return batches.se();
}

namespace detail {

struct Rung {
  double beta = 0.0;
  std::vector<double> sig;  // +-1 spins as doubles
  std::vector<double> h;    // local fields
  double energy = 0.0;      // unit-beta log-weight
  Rng rng;
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;

  Rung(const Couplings& c, double b, std::uint64_t seed) : beta(b), rng(seed) {
    sig.resize(c.n);
    for (std::size_t i = 0; i < c.n; ++i) sig[i] = (rng.next_u64() & 1u) ? 1.0 : -1.0;
    h.resize(c.n);
    refresh(c);
  }

  void refresh(const Couplings& c) {
    const double invsqrt = 1.0 / std::sqrt(static_cast<double>(c.n));
    for (std::size_t k = 0; k < c.n; ++k) {
      const double* row = c.g.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < c.n; ++j) acc += row[j] * sig[j];
      h[k] = (acc - row[k] * sig[k]) * invsqrt;
    }
    energy = log_weight_signs(c, 1.0, sig.data());
    if (!std::isfinite(energy))
      throw std::runtime_error("mcmc: nonfinite chain log-weight");
  }

  // One sweep = n Metropolis single-spin-flip proposals at inverse
  // temperature beta; uniform site proposal, accept with min(1, exp(dl)).
  void sweep(const Couplings& c) {
    const std::size_t n = c.n;
    const double invsqrt = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t k = static_cast<std::size_t>(rng.below(n));
      const double d_energy = -2.0 * sig[k] * h[k];
      const double dl = beta * d_energy;
      ++proposals;
      bool accept = dl >= 0.0;
      if (!accept) accept = rng.uniform01() < std::exp(dl);
      if (!accept) continue;
      ++accepted;
      sig[k] = -sig[k];
      energy += d_energy;
      const double upd = 2.0 * sig[k] * invsqrt;
      const double* row = c.g.row(k);
      const double hk = h[k];
      for (std::size_t j = 0; j < n; ++j) h[j] += upd * row[j];
      h[k] = hk;
    }
  }
};

inline std::size_t ladder_target_index(const std::vector<double>& ladder, double beta) {
  for (std::size_t t = 0; t < ladder.size(); ++t)
    if (std::abs(ladder[t] - beta) <= 1e-12) return t;
  throw std::invalid_argument("run_tempered: ladder does not contain the target beta");
}

inline void validate_chain_config(const Couplings& c, double beta,
                                  const ChainConfig& cfg,
                                  const std::vector<double>& ladder) {
  if (c.n < 2) throw std::invalid_argument("mcmc: n must be >= 2");
  if (beta < 0.0) throw std::invalid_argument("mcmc: beta must be >= 0");
  if (cfg.sweeps == 0) throw std::invalid_argument("mcmc: sweeps must be >= 1");
  if (cfg.burn_in_sweeps >= cfg.sweeps)
    throw std::invalid_argument("mcmc: burn-in must be < sweeps");
  if (cfg.thin == 0) throw std::invalid_argument("mcmc: thin must be >= 1");
  if (cfg.replicas < 2) throw std::invalid_argument("mcmc: replicas must be >= 2");
  if (cfg.batches < 10) throw std::invalid_argument("mcmc: batches must be >= 10");
  for (std::size_t t = 0; t + 1 < ladder.size(); ++t)
    if (!(ladder[t] < ladder[t + 1]))
      throw std::invalid_argument("mcmc: ladder must be strictly ascending");
  for (double b : ladder)
    if (b < 0.0) throw std::invalid_argument("mcmc: ladder betas must be >= 0");
  const std::size_t records = (cfg.sweeps - cfg.burn_in_sweeps) / cfg.thin;
  if (records < 10 * cfg.batches)
    throw std::invalid_argument(
        "mcmc: too few recorded sweeps for batch-means stderr (need >= 10 * batches)");
}

// Replica-exchange engine. `replicas` independent ladders run side by side;
// adjacent-rung swaps are attempted every sweep with acceptance
// min(1, exp((b_a - b_b)(l_b - l_a))) on the stored unit-beta log-weights;
// estimates are read from the target rung of each ladder, and replica pairs
// at the target rung supply the overlap estimators.
inline McmcEstimate run_ladder(const Couplings& c, double beta, const ChainConfig& cfg,
                               std::vector<double> ladder) {
  validate_chain_config(c, beta, cfg, ladder);
  const std::size_t ti = ladder_target_index(ladder, beta);
  const std::size_t n = c.n;
  const std::size_t nrungs = ladder.size();
  const std::size_t nrep = cfg.replicas;
  const std::size_t npairs = n * (n - 1) / 2;
  const std::size_t total_records = (cfg.sweeps - cfg.burn_in_sweeps) / cfg.thin;
  const std::size_t nbatch = cfg.batches;
  const std::size_t batch_len = total_records / nbatch;

  std::vector<std::vector<Rung>> chains(nrep);
  std::vector<Rng> swap_rng;
  for (std::size_t r = 0; r < nrep; ++r) {
    for (std::size_t t = 0; t < nrungs; ++t)
      chains[r].emplace_back(
          c, ladder[t], derive_seed(cfg.seed, {{"replica", r}, {"rung", t}}));
    swap_rng.emplace_back(derive_seed(cfg.seed, {{"replica", r}, {"swap", 0}}));
  }

  std::vector<double> c_acc(npairs, 0.0), c_batch(nbatch * npairs, 0.0);
  const std::size_t rpairs = nrep * (nrep - 1) / 2;
  std::vector<double> x2, x4, xabs, x3, x22, xcy, xmulti;
  x2.reserve(total_records);
  x4.reserve(total_records);
  xabs.reserve(total_records);
  if (nrep >= 3) {
    x3.reserve(total_records);
    x22.reserve(total_records);
  }
  if (nrep >= 4) {
    xcy.reserve(total_records);
    xmulti.reserve(total_records);
  }
  std::vector<std::vector<double>> pair_series;
  std::vector<std::string> pair_names;
  if (cfg.keep_series) {
    pair_series.resize(rpairs);
    for (auto& s : pair_series) s.reserve(total_records);
    for (std::size_t a = 0; a < nrep; ++a)
      for (std::size_t b = a + 1; b < nrep; ++b)
        pair_names.push_back("r" + std::to_string(a + 1) + std::to_string(b + 1));
  }
  std::vector<std::uint64_t> visits;
  if (n <= 4) visits.assign(std::size_t{1} << n, 0);
  std::vector<std::uint64_t> swap_att(nrungs > 0 ? nrungs - 1 : 0, 0),
      swap_acc(nrungs > 0 ? nrungs - 1 : 0, 0);

  std::vector<double> rp(nrep * nrep, 0.0);  // pair overlaps of one record
  std::size_t rec = 0;
  for (std::size_t s = 1; s <= cfg.sweeps; ++s) {
    for (std::size_t r = 0; r < nrep; ++r)
      for (std::size_t t = 0; t < nrungs; ++t) chains[r][t].sweep(c);
    if (s % 2048 == 0)
      for (std::size_t r = 0; r < nrep; ++r)
        for (std::size_t t = 0; t < nrungs; ++t) chains[r][t].refresh(c);
    for (std::size_t r = 0; r < nrep; ++r) {
      for (std::size_t t = 0; t + 1 < nrungs; ++t) {
        const double dl = (ladder[t] - ladder[t + 1]) *
                          (chains[r][t + 1].energy - chains[r][t].energy);
        ++swap_att[t];
        bool accept = dl >= 0.0;
        if (!accept) accept = swap_rng[r].uniform01() < std::exp(dl);
        if (!accept) continue;
        ++swap_acc[t];
        std::swap(chains[r][t].sig, chains[r][t + 1].sig);
        std::swap(chains[r][t].h, chains[r][t + 1].h);
        std::swap(chains[r][t].energy, chains[r][t + 1].energy);
      }
    }
    if (s <= cfg.burn_in_sweeps || (s - cfg.burn_in_sweeps) % cfg.thin != 0) continue;

    const std::size_t b = (rec < nbatch * batch_len) ? rec / batch_len : nbatch;
    double* bat = (b < nbatch) ? &c_batch[b * npairs] : nullptr;
    for (std::size_t r = 0; r < nrep; ++r) {
      const double* sg = chains[r][ti].sig.data();
      std::size_t q = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double si = sg[i];
        for (std::size_t j = i + 1; j < n; ++j, ++q) {
          const double v = si * sg[j];
          c_acc[q] += v;
          if (bat) bat[q] += v;
        }
      }
      if (!visits.empty()) {
        std::uint32_t bits = 0;
        for (std::size_t i = 0; i < n; ++i)
          if (sg[i] > 0.0) bits |= (std::uint32_t{1} << i);
        ++visits[bits];
      }
    }

    std::size_t pq = 0;
    double s2 = 0.0, s4 = 0.0, sa = 0.0;
    for (std::size_t a = 0; a < nrep; ++a) {
      const double* sga = chains[a][ti].sig.data();
      for (std::size_t bb = a + 1; bb < nrep; ++bb, ++pq) {
        const double* sgb = chains[bb][ti].sig.data();
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += sga[i] * sgb[i];
        const double r_ab = dot / static_cast<double>(n);
        rp[a * nrep + bb] = r_ab;
        rp[bb * nrep + a] = r_ab;
        s2 += r_ab * r_ab;
        s4 += r_ab * r_ab * r_ab * r_ab;
        sa += std::abs(r_ab);
        if (cfg.keep_series) pair_series[pq].push_back(r_ab);
      }
    }
    x2.push_back(s2 / static_cast<double>(rpairs));
    x4.push_back(s4 / static_cast<double>(rpairs));
    xabs.push_back(sa / static_cast<double>(rpairs));

    if (nrep >= 3) {
      double t3 = 0.0, t22 = 0.0;
      std::size_t c3 = 0;
      for (std::size_t a = 0; a < nrep; ++a)
        for (std::size_t bb = a + 1; bb < nrep; ++bb)
          for (std::size_t cc = bb + 1; cc < nrep; ++cc) {
            const double rab = rp[a * nrep + bb];
            const double rac = rp[a * nrep + cc];
            const double rbc = rp[bb * nrep + cc];
            t3 += rab * rac * rbc;
            // <R12^2 R23^2>: each member of the triple takes the center slot
            t22 += rab * rab * rbc * rbc + rab * rab * rac * rac + rac * rac * rbc * rbc;
            ++c3;
          }
      x3.push_back(t3 / static_cast<double>(c3));
      x22.push_back(t22 / static_cast<double>(3 * c3));
    }
    if (nrep >= 4) {
      double tc = 0.0, tm = 0.0;
      std::size_t c4 = 0;
      for (std::size_t a = 0; a < nrep; ++a)
        for (std::size_t bb = a + 1; bb < nrep; ++bb)
          for (std::size_t cc = bb + 1; cc < nrep; ++cc)
            for (std::size_t dd = cc + 1; dd < nrep; ++dd) {
              const double rab = rp[a * nrep + bb], rac = rp[a * nrep + cc],
                           rad = rp[a * nrep + dd], rbc = rp[bb * nrep + cc],
                           rbd = rp[bb * nrep + dd], rcd = rp[cc * nrep + dd];
              tc += rab * rbc * rcd * rad + rab * rbd * rcd * rac + rac * rbc * rbd * rad;
              double dot4 = 0.0;
              const double* s1 = chains[a][ti].sig.data();
              const double* s2p = chains[bb][ti].sig.data();
              const double* s3p = chains[cc][ti].sig.data();
              const double* s4p = chains[dd][ti].sig.data();
              for (std::size_t i = 0; i < n; ++i) dot4 += s1[i] * s2p[i] * s3p[i] * s4p[i];
              const double r4 = dot4 / static_cast<double>(n);
              tm += (rab * rcd + rac * rbd + rad * rbc) * r4;
              ++c4;
            }
      xcy.push_back(tc / static_cast<double>(3 * c4));
      xmulti.push_back(tm / static_cast<double>(3 * c4));
    }
    ++rec;
  }

  McmcEstimate est;
  est.samples_used = rec;
  est.c_hat = SymMatrix(n);
  est.c_se = SymMatrix(n);
  const double denom = static_cast<double>(rec) * static_cast<double>(nrep);
  const double bdenom = static_cast<double>(batch_len) * static_cast<double>(nrep);
  std::size_t q = 0;
  for (std::size_t i = 0; i < n; ++i) {
    est.c_hat.set(i, i, 1.0);
    for (std::size_t j = i + 1; j < n; ++j, ++q) {
      est.c_hat.set(i, j, c_acc[q] / denom);
      EnsembleStat bs;
      for (std::size_t b = 0; b < nbatch; ++b) bs.add(c_batch[b * npairs + q] / bdenom);
      est.c_se.set(i, j, bs.se());
    }
  }

  auto series_mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  est.moments_hat.m2 = series_mean(x2);
  est.moments_se.m2 = batch_means_stderr(x2, nbatch);
  est.moments_hat.m4 = series_mean(x4);
  est.moments_se.m4 = batch_means_stderr(x4, nbatch);
  est.abs_r_hat = series_mean(xabs);
  est.abs_r_se = batch_means_stderr(xabs, nbatch);
  if (nrep >= 3) {
    est.moments_hat.m3 = series_mean(x3);
    est.moments_se.m3 = batch_means_stderr(x3, nbatch);
    est.moments_hat.m22 = series_mean(x22);
    est.moments_se.m22 = batch_means_stderr(x22, nbatch);
  } else {
    est.moments_hat.m3 = est.moments_se.m3 = nan;
    est.moments_hat.m22 = est.moments_se.m22 = nan;
  }
  if (nrep >= 4) {
    est.moments_hat.m_cycle = series_mean(xcy);
    est.moments_se.m_cycle = batch_means_stderr(xcy, nbatch);
    est.moments_hat.m_multi = series_mean(xmulti);
    est.moments_se.m_multi = batch_means_stderr(xmulti, nbatch);
  } else {
    est.moments_hat.m_cycle = est.moments_se.m_cycle = nan;
    est.moments_hat.m_multi = est.moments_se.m_multi = nan;
  }

  std::uint64_t prop = 0, acc = 0;
  for (std::size_t r = 0; r < nrep; ++r)
    for (std::size_t t = 0; t < nrungs; ++t) {
      prop += chains[r][t].proposals;
      acc += chains[r][t].accepted;
    }
  est.accept_rate = prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0;
  est.swap_acceptance.resize(swap_att.size());
  for (std::size_t t = 0; t < swap_att.size(); ++t) {
    est.swap_acceptance[t] =
        swap_att[t] > 0 ? static_cast<double>(swap_acc[t]) / static_cast<double>(swap_att[t])
                        : 0.0;
    if (est.swap_acceptance[t] <= 0.05 || est.swap_acceptance[t] >= 0.95)
      est.ladder_warning = true;
  }
  est.state_visits = std::move(visits);
  est.series_names = std::move(pair_names);
  est.overlap_series = std::move(pair_series);
  return est;
}

}  // namespace detail

inline McmcEstimate run_chain(const Couplings& c, double beta, const ChainConfig& cfg) {
  if (!cfg.ladder.empty() && !(cfg.ladder.size() == 1 && cfg.ladder[0] == beta))
    throw std::invalid_argument("run_chain: config carries a tempering ladder; use run_tempered");
  return detail::run_ladder(c, beta, cfg, {beta});
}

inline McmcEstimate run_tempered(const Couplings& c, double beta, const ChainConfig& cfg) {
  if (cfg.ladder.empty())
    throw std::invalid_argument("run_tempered: config must provide a ladder");
  return detail::run_ladder(c, beta, cfg, cfg.ladder);
}

}  // namespace skcov
