#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "skcov/disorder.hpp"
#include "skcov/gibbs_exact.hpp"
#include "skcov/mcmc.hpp"
#include "skcov/stats.hpp"

using namespace skcov;

TEST_CASE("batch means stderr") {
  SECTION("constant series") {
    const std::vector<double> c(400, 3.14);
    CHECK(batch_means_stderr(c, 20) == 0.0);
  }

  SECTION("iid normal series") {
    Rng rng(8);
    std::vector<double> x(10000);
    for (double& v : x) v = rng.normal();
    const double se = batch_means_stderr(x, 20);
    CHECK(se == Catch::Approx(0.01).epsilon(0.5));
  }

  SECTION("correlated series inflates the naive stderr") {
    const std::vector<double> x = oracle::ar1_series(20000, 0.9, 5);
    const EnsembleStat naive = accumulate(x);
    CHECK(batch_means_stderr(x, 20) >= naive.se());
  }

  SECTION("preconditions") {
    const std::vector<double> x(150, 1.0);
    CHECK_THROWS_AS(batch_means_stderr(x, 20), std::invalid_argument);
    CHECK_THROWS_AS(batch_means_stderr(x, 5), std::invalid_argument);
  }
}

TEST_CASE("beta = 0 accepts everything and decorrelates") {
  const Couplings c = sample_couplings(6, 3);
  ChainConfig cfg = ChainConfig::defaults_for(20000, 11);
  const McmcEstimate est = run_chain(c, 0.0, cfg);
  CHECK(est.accept_rate == 1.0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j)
      CHECK(std::abs(est.c_hat(i, j)) <= 4.0 * est.c_se(i, j));
  CHECK(est.samples_used == 18000);
}

TEST_CASE("chain reproduces the exact engine at n = 8") {
  const Couplings c = sample_couplings(8, 1001);
  const double beta = 0.5;
  ChainConfig cfg = ChainConfig::defaults_for(200000, 5);
  const McmcEstimate est = run_chain(c, beta, cfg);
  const ExactSummary s = exact_summary(c, beta, true);
  const OverlapMoments gm = overlap_moments_exact(s);

  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j)
      CHECK(std::abs(est.c_hat(i, j) - s.c(i, j)) <= 4.0 * est.c_se(i, j));
  CHECK(std::abs(est.moments_hat.m2 - gm.m2) <= 4.0 * est.moments_se.m2);
  CHECK(std::abs(est.moments_hat.m3 - gm.m3) <= 4.0 * est.moments_se.m3);
}

TEST_CASE("two-spin stationary distribution matches gibbs") {
  Couplings c{2, SymMatrix(2)};
  c.g.set(0, 1, 1.3);
  const double beta = 0.8;
  ChainConfig cfg;
  cfg.sweeps = 1000000;
  cfg.burn_in_sweeps = 100000;
  cfg.thin = 5;
  cfg.replicas = 2;
  cfg.seed = 21;
  const McmcEstimate est = run_chain(c, beta, cfg);
  REQUIRE(est.state_visits.size() == 4);

  const oracle::BruteSummary b = oracle::brute_summary(c, beta);
  double total = 0.0;
  for (std::uint64_t v : est.state_visits) total += static_cast<double>(v);
  for (std::size_t s = 0; s < 4; ++s) {
    const double phat = static_cast<double>(est.state_visits[s]) / total;
    const double p = b.p[s];
    const double se = std::sqrt(p * (1.0 - p) / total);
    CHECK(std::abs(phat - p) <= 4.0 * se);
  }
}

TEST_CASE("estimates are deterministic in the config") {
  const Couplings c = sample_couplings(5, 77);
  ChainConfig cfg = ChainConfig::defaults_for(5000, 13);
  const McmcEstimate a = run_chain(c, 0.7, cfg);
  const McmcEstimate b = run_chain(c, 0.7, cfg);
  CHECK(a.c_hat == b.c_hat);
  CHECK(a.moments_hat.m2 == b.moments_hat.m2);
  CHECK(a.moments_hat.m_cycle == b.moments_hat.m_cycle);
  CHECK(a.accept_rate == b.accept_rate);
}

TEST_CASE("single-rung ladder reproduces the plain chain") {
  const Couplings c = sample_couplings(5, 31);
  ChainConfig plain = ChainConfig::defaults_for(4000, 3);
  ChainConfig rung = plain;
  rung.ladder = {0.9};
  const McmcEstimate a = run_chain(c, 0.9, plain);
  const McmcEstimate b = run_tempered(c, 0.9, rung);
  CHECK(a.c_hat == b.c_hat);
  CHECK(a.moments_hat.m2 == b.moments_hat.m2);
  CHECK(b.swap_acceptance.empty());
}

TEST_CASE("tempered chain matches exact enumeration at n = 12, beta = 1.5") {
  const Couplings c = sample_couplings(12, 4242);
  ChainConfig cfg;
  cfg.sweeps = 60000;
  cfg.burn_in_sweeps = 6000;
  cfg.seed = 17;
  cfg.ladder = {0.6, 0.9, 1.2, 1.5};
  const McmcEstimate est = run_tempered(c, 1.5, cfg);
  const double m2 = overlap_m2(exact_summary(c, 1.5).c);
  CHECK(std::abs(est.moments_hat.m2 - m2) <= 4.0 * est.moments_se.m2);

  REQUIRE(est.swap_acceptance.size() == 3);
  for (double rate : est.swap_acceptance) {
    CHECK(rate > 0.05);
    CHECK(rate < 0.95);
  }
  CHECK_FALSE(est.ladder_warning);
}

TEST_CASE("overlap series dump") {
  const Couplings c = sample_couplings(4, 9);
  ChainConfig cfg = ChainConfig::defaults_for(3000, 2);
  cfg.replicas = 3;
  cfg.keep_series = true;
  const McmcEstimate est = run_chain(c, 0.4, cfg);
  REQUIRE(est.overlap_series.size() == 3);  // C(3,2) pairs
  REQUIRE(est.series_names.size() == 3);
  CHECK(est.series_names[0] == "r12");
  for (const auto& s : est.overlap_series) CHECK(s.size() == est.samples_used);
}

TEST_CASE("config validation") {
  const Couplings c = sample_couplings(4, 1);
  ChainConfig cfg = ChainConfig::defaults_for(5000, 1);

  Couplings tiny{1, SymMatrix(1)};
  CHECK_THROWS_AS(run_chain(tiny, 0.5, cfg), std::invalid_argument);

  ChainConfig bad = cfg;
  bad.burn_in_sweeps = 5000;
  CHECK_THROWS_AS(run_chain(c, 0.5, bad), std::invalid_argument);

  bad = cfg;
  bad.replicas = 1;
  CHECK_THROWS_AS(run_chain(c, 0.5, bad), std::invalid_argument);

  bad = cfg;
  bad.sweeps = 150;  // too few records for 20 batches
  bad.burn_in_sweeps = 30;
  CHECK_THROWS_AS(run_chain(c, 0.5, bad), std::invalid_argument);

  bad = cfg;
  bad.ladder = {0.5, 0.4};
  CHECK_THROWS_AS(run_tempered(c, 0.5, bad), std::invalid_argument);

  bad = cfg;
  bad.ladder = {0.2, 0.4};
  CHECK_THROWS_AS(run_tempered(c, 0.5, bad), std::invalid_argument);  // missing target

  CHECK_THROWS_AS(run_tempered(c, 0.5, cfg), std::invalid_argument);  // no ladder

  bad = cfg;
  bad.ladder = {0.2, 0.5};
  CHECK_THROWS_AS(run_chain(c, 0.5, bad), std::invalid_argument);  // ladder on plain chain
}
