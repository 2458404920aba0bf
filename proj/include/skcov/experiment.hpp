#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "skcov/disorder.hpp"
#include "skcov/gibbs_exact.hpp"
#include "skcov/mcmc.hpp"
#include "skcov/observables.hpp"
#include "skcov/spectral.hpp"
#include "skcov/stats.hpp"

namespace skcov {

enum class Kind {
  kIdentities,
  kResidualSweep,
  kOpnormSweep,
  kCriticalScan,
  kLowtempScan,
  kDerivCheck,
  kMcmcValidate,
};

enum class Engine { kExact, kMcmc };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kIdentities: return "identities";
    case Kind::kResidualSweep: return "residual-sweep";
    case Kind::kOpnormSweep: return "opnorm-sweep";
    case Kind::kCriticalScan: return "critical-scan";
    case Kind::kLowtempScan: return "lowtemp-scan";
    case Kind::kDerivCheck: return "deriv-check";
    case Kind::kMcmcValidate: return "mcmc-validate";
  }
  return "?";
}

inline Kind kind_from_string(const std::string& s) {
  for (Kind k : {Kind::kIdentities, Kind::kResidualSweep, Kind::kOpnormSweep,
                 Kind::kCriticalScan, Kind::kLowtempScan, Kind::kDerivCheck,
                 Kind::kMcmcValidate})
    if (s == kind_name(k)) return k;
  throw std::invalid_argument("unknown experiment kind: " + s);
}

inline const char* engine_name(Engine e) {
  return e == Engine::kExact ? "exact" : "mcmc";
}

inline Engine engine_from_string(const std::string& s) {
  if (s == "exact") return Engine::kExact;
  if (s == "mcmc") return Engine::kMcmc;
  throw std::invalid_argument("unknown engine: " + s);
}

struct ExperimentConfig {
  Kind kind = Kind::kIdentities;
  std::vector<std::size_t> n_list;
  std::vector<double> beta_list;
  std::size_t samples = 0;  // disorder instances (or tuples / trials) per cell
  Engine engine = Engine::kExact;
  std::uint64_t seed = 0;
  ChainConfig chain;        // used when engine == mcmc or kind == mcmc-validate
  std::string out_dir;
  bool zero_diagonal = false;
  double deriv_step = 1e-5;
  std::size_t threads = 0;  // 0 = SKCOV_THREADS env or hardware concurrency
};

struct StatRow {
  std::size_t n = 0;
  double beta = 0.0;
  std::string statistic;
  EnsembleStat stat;
  std::optional<double> predictor;
  std::optional<double> z;
  std::optional<bool> flag;
};

struct FlagResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<StatRow> rows;
  std::vector<FlagResult> flags;
  double wall_clock_ms = 0.0;

  bool all_pass() const {
    for (const FlagResult& f : flags)
      if (!f.pass) return false;
    return true;
  }

  const StatRow& row(std::size_t n, double beta, const std::string& statistic) const {
    for (const StatRow& r : rows)
      if (r.n == n && r.beta == beta && r.statistic == statistic) return r;
    throw std::out_of_range("report row not found: " + statistic);
  }
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.n_list.empty()) throw std::invalid_argument("config: n_list is empty");
  if (cfg.beta_list.empty()) throw std::invalid_argument("config: beta_list is empty");
  if (cfg.samples < 2) throw std::invalid_argument("config: samples must be >= 2");
  for (double b : cfg.beta_list)
    if (b < 0.0) throw std::invalid_argument("config: betas must be >= 0");
  const bool mcmc = cfg.engine == Engine::kMcmc;
  for (std::size_t n : cfg.n_list) {
    if (n == 0) throw std::invalid_argument("config: n must be >= 1");
    switch (cfg.kind) {
      case Kind::kIdentities:
      case Kind::kDerivCheck:
        if (mcmc)
          throw std::invalid_argument("config: this kind requires the exact engine");
        if (n > kMaxFourPointN)
          throw std::invalid_argument("config: n exceeds the four-point enumeration cap");
        break;
      case Kind::kMcmcValidate:
        if (n < 2 || n > kMaxFourPointN)
          throw std::invalid_argument("config: mcmc-validate needs 2 <= n <= four-point cap");
        break;
      case Kind::kCriticalScan:
        if (!mcmc && n > kMaxPairEnumN)
          throw std::invalid_argument("config: n exceeds the pair-enumeration cap");
        if (mcmc && n < 2) throw std::invalid_argument("config: mcmc needs n >= 2");
        break;
      default:
        if (!mcmc && n > kMaxExactN)
          throw std::invalid_argument("config: n exceeds the enumeration cap");
        if (mcmc && n < 2) throw std::invalid_argument("config: mcmc needs n >= 2");
    }
  }
  if (cfg.zero_diagonal && cfg.kind != Kind::kOpnormSweep && cfg.kind != Kind::kLowtempScan)
    throw std::invalid_argument(
        "config: zero_diagonal is only valid for opnorm-sweep and lowtemp-scan");
  if ((mcmc || cfg.kind == Kind::kMcmcValidate) && cfg.chain.sweeps == 0)
    throw std::invalid_argument("config: mcmc runs need chain sweeps > 0");
}

namespace detail {

inline std::size_t resolve_threads(std::size_t requested, std::size_t jobs) {
  std::size_t t = requested > 0
                      ? requested
                      : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SKCOV_THREADS")) {  // hard cap on the pool
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) t = std::min(t, static_cast<std::size_t>(v));
  }
  return std::max<std::size_t>(1, std::min(t, jobs));
}

// Run fn(0..count-1) on a small worker pool. Outputs must be written to
// per-index slots; the first exception aborts the run and is rethrown.
template <class Fn>
inline void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (count == 0) return;
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string format_beta(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", beta);
  return buf;
}

inline std::string cell_tag(std::size_t n, double beta) {
  return "[n=" + std::to_string(n) + ",beta=" + format_beta(beta) + "]";
}

inline std::string beta_tag(double beta) { return "[beta=" + format_beta(beta) + "]"; }

template <class Fn>
inline auto run_instance(std::uint64_t instance_seed, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("instance seed " + std::to_string(instance_seed) +
                             " failed: " + e.what());
  }
}

inline Couplings instance_couplings(const ExperimentConfig& cfg, std::size_t n,
                                    std::uint64_t seed) {
  Couplings c = sample_couplings(n, seed);
  if (cfg.zero_diagonal) c = with_zero_diagonal(std::move(c));
  return c;
}

// Covariance estimate for one instance under the configured engine.
inline SymMatrix covariance_for(const ExperimentConfig& cfg, const Couplings& c,
                                double beta, std::size_t k) {
  if (cfg.engine == Engine::kExact) return exact_summary(c, beta, false).c;
  ChainConfig chain = cfg.chain;
  chain.seed = derive_seed(cfg.seed, {{"n", c.n}, {"chain", k}});
  if (!chain.ladder.empty()) return run_tempered(c, beta, chain).c_hat;
  return run_chain(c, beta, chain).c_hat;
}

}  // namespace detail

namespace detail {

struct CellValues {
  std::map<std::string, std::vector<double>> values;
};

inline void emit_rows(std::vector<StatRow>& rows, std::size_t n, double beta,
                      CellValues& cell,
                      const std::map<std::string, double>& predictors = {}) {
  for (auto& [name, vals] : cell.values) {
    StatRow row;
    row.n = n;
    row.beta = beta;
    row.statistic = name;
    row.stat = accumulate(vals);
    if (auto it = predictors.find(name); it != predictors.end()) row.predictor = it->second;
    rows.push_back(std::move(row));
  }
}

}  // namespace detail

inline ExperimentReport run(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t threads = detail::resolve_threads(cfg.threads, cfg.samples);

  ExperimentReport report;
  report.config = cfg;
  auto& rows = report.rows;
  auto& flags = report.flags;

  auto instance_seed = [&](std::size_t n, std::size_t k) {
    return derive_seed(cfg.seed, {{"n", n}, {"instance", k}});
  };

  switch (cfg.kind) {
    case Kind::kIdentities: {
      for (std::size_t n : cfg.n_list) {
        for (double beta : cfg.beta_list) {
          std::vector<InstanceObservables> obs(cfg.samples);
          std::vector<double> row_resid_n2(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t k) {
            const std::uint64_t seed = instance_seed(n, k);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              const ExactSummary s = exact_summary(c, beta, true);
              const SymMatrix a = interaction_matrix(c);
              InstanceObservables io{overlap_moments_exact(s),
                                     tap_report(s.c, a, beta, true)};
              KahanSum rr;
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                  if (i != j) rr.add((*io.tap.row_resid)(i, j));
              const double nd = static_cast<double>(n);
              row_resid_n2[k] =
                  n >= 2 ? nd * nd * rr.value() / (nd * (nd - 1.0)) : 0.0;
              obs[k] = std::move(io);
              return 0;
            });
          });
          const IdentityCheck tc = identity_trace_check(obs, n, beta);
          const IdentityCheck fc = identity_frobenius_check(obs, n, beta);
          detail::CellValues cell;
          for (const InstanceObservables& io : obs) {
            cell.values["trace_lhs"].push_back(io.tap.trace_p);
            cell.values["trace_rhs"].push_back(trace_rhs(n, beta, io.moments.m2));
            cell.values["trace_diff"].push_back(io.tap.trace_p -
                                                trace_rhs(n, beta, io.moments.m2));
            const double f = frobenius_norm(io.tap.p);
            cell.values["frob_lhs"].push_back(f * f);
            cell.values["frob_rhs"].push_back(frobenius_rhs(n, beta, io.moments));
            cell.values["frob_diff"].push_back(f * f -
                                               frobenius_rhs(n, beta, io.moments));
          }
          cell.values["row_resid_n2"] = row_resid_n2;
          std::map<std::string, double> pred;
          if (beta < 1.0) pred["trace_lhs"] = predicted_trace(n, beta);
          detail::emit_rows(rows, n, beta, cell, pred);
          for (auto& r : rows) {
            if (r.n != n || r.beta != beta) continue;
            if (r.statistic == "trace_diff") {
              r.z = tc.z_score;
              r.flag = std::abs(tc.z_score) <= 4.0;
            } else if (r.statistic == "frob_diff") {
              r.z = fc.z_score;
              r.flag = std::abs(fc.z_score) <= 4.0;
            }
          }
          flags.push_back({"identities_trace_z" + detail::cell_tag(n, beta),
                           std::abs(tc.z_score) <= 4.0,
                           "z = " + std::to_string(tc.z_score)});
          flags.push_back({"identities_frob_z" + detail::cell_tag(n, beta),
                           std::abs(fc.z_score) <= 4.0,
                           "z = " + std::to_string(fc.z_score)});
        }
      }
      break;
    }

    case Kind::kResidualSweep: {
      for (double beta : cfg.beta_list) {
        std::vector<double> means;
        for (std::size_t n : cfg.n_list) {
          std::vector<double> resid(cfg.samples), tracep(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t k) {
            const std::uint64_t seed = instance_seed(n, k);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              const SymMatrix cov = detail::covariance_for(cfg, c, beta, k);
              const TapReport tap = tap_report(cov, interaction_matrix(c), beta);
              resid[k] = tap.resid_frob_sq;
              tracep[k] = tap.trace_p;
              return 0;
            });
          });
          detail::CellValues cell;
          cell.values["resid_frob_sq"] = resid;
          cell.values["trace_p"] = tracep;
          std::map<std::string, double> pred;
          if (beta < 1.0) {
            pred["resid_frob_sq"] = predicted_residual_constant(beta);
            pred["trace_p"] = predicted_trace(n, beta);
          }
          detail::emit_rows(rows, n, beta, cell, pred);
          means.push_back(accumulate(resid).mean);
        }
        if (beta < 1.0) {
          const double target = predicted_residual_constant(beta);
          const double last_dev = std::abs(means.back() - target);
          const bool within = last_dev <= 0.20 * target;
          for (auto& r : rows)
            if (r.beta == beta && r.n == cfg.n_list.back() &&
                r.statistic == "resid_frob_sq")
              r.flag = within;
          flags.push_back(
              {"residual_within_20pct_at_max_n" + detail::beta_tag(beta), within,
               "mean = " + std::to_string(means.back()) +
                   ", target = " + std::to_string(target)});
          if (cfg.n_list.size() >= 2) {
            bool monotone = true;
            for (std::size_t i = 0; i + 1 < means.size(); ++i)
              if (std::abs(means[i + 1] - target) > std::abs(means[i] - target))
                monotone = false;
            flags.push_back({"residual_deviation_monotone" + detail::beta_tag(beta),
                             monotone, "deviations along n_list"});
          }
        }
      }
      break;
    }

    case Kind::kOpnormSweep: {
      for (double beta : cfg.beta_list) {
        std::vector<double> means;
        for (std::size_t n : cfg.n_list) {
          std::vector<double> op(cfg.samples), op2(cfg.samples), fr(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t k) {
            const std::uint64_t seed = instance_seed(n, k);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              const SymMatrix cov = detail::covariance_for(cfg, c, beta, k);
              const double o = operator_norm(cov);
              op[k] = o;
              op2[k] = o * o;
              fr[k] = frobenius_norm(cov) / std::sqrt(static_cast<double>(n));
              return 0;
            });
          });
          detail::CellValues cell;
          cell.values["cov_opnorm"] = op;
          cell.values["cov_opnorm_sq"] = op2;
          cell.values["cov_frob_over_sqrtn"] = fr;
          std::map<std::string, double> pred;
          if (beta < 1.0) pred["cov_opnorm"] = hightemp_opnorm_lower(beta);
          detail::emit_rows(rows, n, beta, cell, pred);
          means.push_back(accumulate(op).mean);
        }
        if (beta < 1.0) {
          const double bound = hightemp_opnorm_lower(beta);
          bool above = true;
          for (double m : means) above = above && m > bound;
          flags.push_back({"opnorm_above_hightemp_lower" + detail::beta_tag(beta), above,
                           "bound = " + std::to_string(bound)});
          if (cfg.n_list.size() >= 2) {
            const double lo = *std::min_element(means.begin(), means.end());
            const double hi = *std::max_element(means.begin(), means.end());
            const bool flat = (hi - lo) < 0.15 * lo;
            flags.push_back({"opnorm_variation_lt_15pct" + detail::beta_tag(beta), flat,
                             "min = " + std::to_string(lo) +
                                 ", max = " + std::to_string(hi)});
          }
        }
      }
      break;
    }

    case Kind::kCriticalScan: {
      for (std::size_t n : cfg.n_list) {
        for (double beta : cfg.beta_list) {
          std::vector<double> m2(cfg.samples), absr(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t k) {
            const std::uint64_t seed = instance_seed(n, k);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              if (cfg.engine == Engine::kExact) {
                const OverlapPmf pmf = overlap_distribution_small(c, beta);
                m2[k] = pmf.moment(2);
                absr[k] = pmf.mean_abs();
              } else {
                ChainConfig chain = cfg.chain;
                chain.seed = derive_seed(cfg.seed, {{"n", n}, {"chain", k}});
                const McmcEstimate est = chain.ladder.empty()
                                             ? run_chain(c, beta, chain)
                                             : run_tempered(c, beta, chain);
                m2[k] = est.moments_hat.m2;
                absr[k] = est.abs_r_hat;
              }
              return 0;
            });
          });
          const double nd = static_cast<double>(n);
          detail::CellValues cell;
          cell.values["m2"] = m2;
          for (double v : m2) cell.values["n_m2"].push_back(nd * v);
          for (double v : absr) cell.values["sqrtn_abs_r"].push_back(std::sqrt(nd) * v);
          detail::emit_rows(rows, n, beta, cell);
        }
      }
      break;
    }

    case Kind::kLowtempScan: {
      for (double beta : cfg.beta_list) {
        std::vector<double> means;
        for (std::size_t n : cfg.n_list) {
          std::vector<double> op(cfg.samples), m2(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t k) {
            const std::uint64_t seed = instance_seed(n, k);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              if (cfg.engine == Engine::kExact) {
                const SymMatrix cov = exact_summary(c, beta, false).c;
                op[k] = operator_norm(cov);
                m2[k] = overlap_m2(cov);
              } else {
                ChainConfig chain = cfg.chain;
                chain.seed = derive_seed(cfg.seed, {{"n", n}, {"chain", k}});
                const McmcEstimate est = chain.ladder.empty()
                                             ? run_chain(c, beta, chain)
                                             : run_tempered(c, beta, chain);
                op[k] = operator_norm(est.c_hat);
                m2[k] = est.moments_hat.m2;
              }
              return 0;
            });
          });
          detail::CellValues cell;
          cell.values["cov_opnorm"] = op;
          cell.values["m2"] = m2;
          detail::emit_rows(rows, n, beta, cell);
          means.push_back(accumulate(op).mean);
        }
        if (cfg.n_list.size() >= 2) {
          const double ratio = means.back() / means.front();
          flags.push_back({"lowtemp_opnorm_growth" + detail::beta_tag(beta),
                           ratio >= 1.15, "ratio = " + std::to_string(ratio)});
        }
      }
      break;
    }

    case Kind::kDerivCheck: {
      for (std::size_t n : cfg.n_list) {
        for (double beta : cfg.beta_list) {
          std::vector<double> diffs(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t k) {
            const std::uint64_t seed = instance_seed(n, k);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              Rng tuple_rng(derive_seed(cfg.seed, {{"n", n}, {"tuple", k}}));
              const std::array<std::size_t, 4> ijkl{
                  static_cast<std::size_t>(tuple_rng.below(n)),
                  static_cast<std::size_t>(tuple_rng.below(n)),
                  static_cast<std::size_t>(tuple_rng.below(n)),
                  static_cast<std::size_t>(tuple_rng.below(n))};
              diffs[k] = ibp_derivative_check(c, beta, ijkl, cfg.deriv_step).abs_diff;
              return 0;
            });
          });
          detail::CellValues cell;
          cell.values["abs_diff"] = diffs;
          detail::emit_rows(rows, n, beta, cell);
          const double worst = *std::max_element(diffs.begin(), diffs.end());
          const bool ok = worst <= 1e-6;
          for (auto& r : rows)
            if (r.n == n && r.beta == beta && r.statistic == "abs_diff") r.flag = ok;
          flags.push_back({"deriv_max_abs_diff" + detail::cell_tag(n, beta), ok,
                           "max = " + std::to_string(worst)});
        }
      }
      break;
    }

    case Kind::kMcmcValidate: {
      for (std::size_t n : cfg.n_list) {
        for (double beta : cfg.beta_list) {
          std::vector<double> pass(cfg.samples), worst(cfg.samples);
          detail::parallel_for(cfg.samples, threads, [&](std::size_t t) {
            const std::uint64_t seed = instance_seed(n, t);
            detail::run_instance(seed, [&] {
              const Couplings c = detail::instance_couplings(cfg, n, seed);
              const ExactSummary s = exact_summary(c, beta, true);
              const OverlapMoments gm = overlap_moments_exact(s);
              ChainConfig chain = cfg.chain;
              chain.seed = derive_seed(cfg.seed, {{"n", n}, {"trial", t}});
              const McmcEstimate est = run_chain(c, beta, chain);
              bool ok = true;
              double wz = 0.0;
              auto check = [&](double hat, double se, double truth) {
                const double diff = std::abs(hat - truth);
                if (se > 0.0) wz = std::max(wz, diff / se);
                if (diff > 4.0 * se) ok = false;
              };
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j)
                  check(est.c_hat(i, j), est.c_se(i, j), s.c(i, j));
              check(est.moments_hat.m2, est.moments_se.m2, gm.m2);
              check(est.moments_hat.m4, est.moments_se.m4, gm.m4);
              if (std::isfinite(est.moments_hat.m3))
                check(est.moments_hat.m3, est.moments_se.m3, gm.m3);
              if (std::isfinite(est.moments_hat.m_cycle))
                check(est.moments_hat.m_cycle, est.moments_se.m_cycle, gm.m_cycle);
              pass[t] = ok ? 1.0 : 0.0;
              worst[t] = wz;
              return 0;
            });
          });
          detail::CellValues cell;
          cell.values["trial_pass"] = pass;
          cell.values["worst_z"] = worst;
          detail::emit_rows(rows, n, beta, cell);
          // exact integer comparison: npass/samples >= 19/20
          std::size_t npass = 0;
          for (double p : pass) npass += p > 0.5 ? 1 : 0;
          flags.push_back({"mcmc_coverage_ge_95pct" + detail::cell_tag(n, beta),
                           npass * 20 >= cfg.samples * 19,
                           "passed " + std::to_string(npass) + " of " +
                               std::to_string(cfg.samples) + " trials"});
        }
      }
      break;
    }
  }

  std::sort(rows.begin(), rows.end(), [](const StatRow& a, const StatRow& b) {
    if (a.n != b.n) return a.n < b.n;
    if (a.beta != b.beta) return a.beta < b.beta;
    return a.statistic < b.statistic;
  });
  report.wall_clock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json chain_to_json(const ChainConfig& c) {
  nlohmann::json j;
  j["sweeps"] = c.sweeps;
  j["burn_in"] = c.burn_in_sweeps;
  j["thin"] = c.thin;
  j["replicas"] = c.replicas;
  j["ladder"] = c.ladder;
  j["batches"] = c.batches;
  return j;
}

inline ChainConfig chain_from_json(const nlohmann::json& j) {
  ChainConfig c;
  c.sweeps = j.value("sweeps", std::size_t{0});
  c.burn_in_sweeps = j.value("burn_in", c.sweeps / 10);
  c.thin = j.value("thin", std::size_t{1});
  c.replicas = j.value("replicas", std::size_t{4});
  c.ladder = j.value("ladder", std::vector<double>{});
  c.batches = j.value("batches", std::size_t{20});
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["kind"] = kind_name(cfg.kind);
  j["n_list"] = cfg.n_list;
  j["beta_list"] = cfg.beta_list;
  j["samples"] = cfg.samples;
  j["engine"] = engine_name(cfg.engine);
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["zero_diagonal"] = cfg.zero_diagonal;
  j["deriv_step"] = cfg.deriv_step;
  if (cfg.engine == Engine::kMcmc || cfg.kind == Kind::kMcmcValidate)
    j["mcmc"] = chain_to_json(cfg.chain);
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.kind = kind_from_string(j.at("kind").get<std::string>());
  cfg.n_list = j.at("n_list").get<std::vector<std::size_t>>();
  cfg.beta_list = j.at("beta_list").get<std::vector<double>>();
  cfg.samples = j.at("samples").get<std::size_t>();
  cfg.engine = engine_from_string(j.value("engine", "exact"));
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.out_dir = j.value("out", std::string{});
  cfg.zero_diagonal = j.value("zero_diagonal", false);
  cfg.deriv_step = j.value("deriv_step", 1e-5);
  if (j.contains("mcmc")) cfg.chain = chain_from_json(j.at("mcmc"));
  return cfg;
}

inline const std::map<std::string, std::string>& statistic_definitions() {
  static const std::map<std::string, std::string> defs = {
      {"trace_lhs", "Tr(P) per instance, P = ((1+b^2)I - bA) C"},
      {"trace_rhs", "n + n b^2 m2 per instance"},
      {"trace_diff", "trace_lhs - trace_rhs; zero mean over disorder"},
      {"frob_lhs", "||P||_F^2 per instance"},
      {"frob_rhs", "five-overlap combination matching E||P||_F^2"},
      {"frob_diff", "frob_lhs - frob_rhs; zero mean over disorder"},
      {"row_resid_n2", "n^2 * mean_{i!=j} ((1+b^2)C_ij - b(AC)_ij)^2"},
      {"resid_frob_sq", "||P - I||_F^2 per instance"},
      {"trace_p", "Tr(P) per instance"},
      {"cov_opnorm", "||C||_op per instance"},
      {"cov_opnorm_sq", "||C||_op^2 per instance"},
      {"cov_frob_over_sqrtn", "||C||_F / sqrt(n) per instance"},
      {"m2", "<R12^2> per instance"},
      {"n_m2", "n <R12^2> per instance"},
      {"sqrtn_abs_r", "sqrt(n) <|R12|> per instance"},
      {"abs_diff", "|finite difference - IBP formula| per sampled tuple"},
      {"trial_pass", "1 when every MCMC scalar is within 4 stderr of exact"},
      {"worst_z", "max |mcmc - exact| / stderr over checked scalars"},
  };
  return defs;
}

inline nlohmann::json report_to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["config"] = config_to_json(r.config);
  nlohmann::json rows = nlohmann::json::array();
  for (const StatRow& row : r.rows) {
    nlohmann::json jr;
    jr["n"] = row.n;
    jr["beta"] = row.beta;
    jr["statistic"] = row.statistic;
    jr["count"] = row.stat.count;
    jr["mean"] = row.stat.mean;
    jr["stderr"] = row.stat.se();
    jr["variance"] = row.stat.variance();
    jr["ci95_half"] = row.stat.ci95_half();
    jr["predictor"] = row.predictor ? nlohmann::json(*row.predictor) : nlohmann::json();
    jr["z"] = row.z ? nlohmann::json(*row.z) : nlohmann::json();
    jr["flag"] = row.flag ? nlohmann::json(*row.flag) : nlohmann::json();
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  nlohmann::json flags = nlohmann::json::array();
  for (const FlagResult& f : r.flags)
    flags.push_back({{"name", f.name}, {"pass", f.pass}, {"detail", f.detail}});
  j["flags"] = std::move(flags);
  nlohmann::json defs;
  for (const auto& [k, v] : statistic_definitions()) defs[k] = v;
  j["definitions"] = std::move(defs);
  j["wall_clock_ms"] = r.wall_clock_ms;
  return j;
}

inline nlohmann::json moments_to_json(const OverlapMoments& m) {
  auto num = [](double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
  };
  return {{"m2", num(m.m2)},       {"m3", num(m.m3)},
          {"m4", num(m.m4)},       {"m22", num(m.m22)},
          {"m_cycle", num(m.m_cycle)}, {"m_multi", num(m.m_multi)}};
}

inline nlohmann::json summary_to_json(const ExactSummary& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["beta"] = s.beta;
  j["log_z"] = s.log_z;
  std::vector<double> c;
  c.reserve(s.n * s.n);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t k = 0; k < s.n; ++k) c.push_back(s.c(i, k));
  j["c"] = std::move(c);  // row-major
  j["spin_mean"] = s.spin_mean;
  if (s.t) j["moments"] = moments_to_json(overlap_moments_exact(s));
  return j;
}

inline nlohmann::json estimate_to_json(const McmcEstimate& e) {
  nlohmann::json j;
  const std::size_t n = e.c_hat.size();
  std::vector<double> c, se;
  c.reserve(n * n);
  se.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      c.push_back(e.c_hat(i, k));
      se.push_back(e.c_se(i, k));
    }
  j["n"] = n;
  j["c_hat"] = std::move(c);
  j["c_stderr"] = std::move(se);
  j["moments_hat"] = moments_to_json(e.moments_hat);
  j["moments_stderr"] = moments_to_json(e.moments_se);
  j["abs_r_hat"] = e.abs_r_hat;
  j["abs_r_stderr"] = e.abs_r_se;
  j["swap_acceptance"] = e.swap_acceptance;
  j["samples_used"] = e.samples_used;
  j["accept_rate"] = e.accept_rate;
  j["ladder_warning"] = e.ladder_warning;
  return j;
}

// One column per replica pair, one row per recorded sweep.
inline void write_overlap_series_csv(const McmcEstimate& e, const std::string& path) {
  if (e.overlap_series.empty())
    throw std::invalid_argument("write_overlap_series_csv: no series recorded");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_overlap_series_csv: cannot open " + path);
  for (std::size_t p = 0; p < e.series_names.size(); ++p)
    out << e.series_names[p] << (p + 1 < e.series_names.size() ? "," : "");
  out << "\n";
  char buf[64];
  const std::size_t len = e.overlap_series.front().size();
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t p = 0; p < e.overlap_series.size(); ++p) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.overlap_series[p][t]);
      out << buf << (p + 1 < e.overlap_series.size() ? "," : "");
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_overlap_series_csv: write failed: " + path);
}

inline void write_report(const ExperimentReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("write_report: cannot create " + dir);

  const std::string json_path = dir + "/report.json";
  {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("write_report: cannot open " + json_path);
    out << report_to_json(r).dump(2) << "\n";
    if (!out) throw std::runtime_error("write_report: write failed: " + json_path);
  }

  const std::string csv_path = dir + "/table.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("write_report: cannot open " + csv_path);
  csv << "kind,n,beta,statistic,count,mean,stderr,predictor,z_or_flag\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const StatRow& row : r.rows) {
    csv << kind_name(r.config.kind) << ',' << row.n << ',' << fmt(row.beta) << ','
        << row.statistic << ',' << row.stat.count << ',' << fmt(row.stat.mean) << ','
        << fmt(row.stat.se()) << ',';
    if (row.predictor) csv << fmt(*row.predictor);
    csv << ',';
    if (row.flag)
      csv << (*row.flag ? "pass" : "fail");
    else if (row.z)
      csv << fmt(*row.z);
    csv << '\n';
  }
  if (!csv) throw std::runtime_error("write_report: write failed: " + csv_path);
}

}  // namespace skcov
