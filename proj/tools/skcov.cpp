// skcov: config-driven experiment runner for the zero-field SK model.
//
// One subcommand per experiment kind, or a JSON config via --config.
// Exit code: 0 when every configured pass/fail flag passes, 1 otherwise,
// 2 on configuration or runtime errors.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skcov/experiment.hpp"

namespace {

struct CliOptions {
  std::vector<std::size_t> n_list;
  std::vector<double> beta_list;
  std::size_t samples = 0;
  std::string engine = "exact";
  std::uint64_t seed = 0;
  std::string out;
  std::size_t sweeps = 0;
  std::size_t burnin = static_cast<std::size_t>(-1);  // default: sweeps / 10
  std::size_t thin = 1;
  std::size_t replicas = 4;
  std::vector<double> ladder;
  std::size_t batches = 20;
  bool zero_diagonal = false;
  double step = 1e-5;
  std::size_t threads = 0;
};

skcov::ChainConfig chain_from(const CliOptions& o) {
  skcov::ChainConfig c;
  c.sweeps = o.sweeps;
  c.burn_in_sweeps = o.burnin == static_cast<std::size_t>(-1) ? o.sweeps / 10 : o.burnin;
  c.thin = o.thin;
  c.replicas = o.replicas;
  c.ladder = o.ladder;
  c.batches = o.batches;
  return c;
}

void add_experiment_options(CLI::App* sub, CliOptions& o) {
  sub->add_option("--n-list", o.n_list, "system sizes")->delimiter(',')->required();
  sub->add_option("--beta-list", o.beta_list, "inverse temperatures")
      ->delimiter(',')
      ->required();
  sub->add_option("--samples", o.samples, "disorder instances per (n, beta) cell")
      ->required();
  sub->add_option("--engine", o.engine, "exact | mcmc")
      ->check(CLI::IsMember({"exact", "mcmc"}));
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--out", o.out, "output directory for report.json / table.csv");
  sub->add_option("--sweeps", o.sweeps, "MCMC sweeps per chain");
  sub->add_option("--burnin", o.burnin, "MCMC burn-in sweeps (default sweeps/10)");
  sub->add_option("--thin", o.thin, "record every thin-th sweep");
  sub->add_option("--replicas", o.replicas, "independent chains per instance");
  sub->add_option("--ladder", o.ladder, "ascending tempering ladder")->delimiter(',');
  sub->add_option("--batches", o.batches, "batch-means batches");
  sub->add_flag("--zero-diagonal", o.zero_diagonal,
                "zero the coupling diagonal (opnorm-sweep / lowtemp-scan only)");
  sub->add_option("--step", o.step, "finite-difference step for deriv-check");
  sub->add_option("--threads", o.threads, "worker threads (default: SKCOV_THREADS or all)");
}

int run_experiment(const skcov::ExperimentConfig& cfg) {
  const skcov::ExperimentReport report = skcov::run(cfg);
  if (!cfg.out_dir.empty()) {
    skcov::write_report(report, cfg.out_dir);
    std::cout << "wrote " << cfg.out_dir << "/report.json and " << cfg.out_dir
              << "/table.csv\n";
  }
  for (const skcov::StatRow& row : report.rows) {
    std::printf("%-14s n=%-3zu beta=%-6g %-20s mean=%-12.6g stderr=%-10.4g",
                skcov::kind_name(cfg.kind), row.n, row.beta, row.statistic.c_str(),
                row.stat.mean, row.stat.se());
    if (row.predictor) std::printf(" predictor=%-10.6g", *row.predictor);
    if (row.z) std::printf(" z=%-8.3g", *row.z);
    std::printf("\n");
  }
  for (const skcov::FlagResult& f : report.flags)
    std::printf("%s %s (%s)\n", f.pass ? "[PASS]" : "[FAIL]", f.name.c_str(),
                f.detail.c_str());
  std::printf("wall clock: %.1f ms\n", report.wall_clock_ms);
  return report.all_pass() ? 0 : 1;
}

int run_dump(std::size_t n, double beta, std::uint64_t seed, const std::string& engine,
             bool four_point, bool series, const std::string& out,
             const CliOptions& o) {
  namespace fs = std::filesystem;
  fs::create_directories(out);
  const skcov::Couplings c = skcov::sample_couplings(n, seed);
  skcov::write_couplings_csv(c, out + "/couplings.csv");
  if (engine == "exact") {
    const skcov::ExactSummary s = skcov::exact_summary(c, beta, four_point);
    std::ofstream j(out + "/exact.json");
    j << skcov::summary_to_json(s).dump(2) << "\n";
    std::cout << "wrote " << out << "/couplings.csv and " << out << "/exact.json\n";
  } else {
    skcov::ChainConfig chain = chain_from(o);
    chain.seed = seed;
    chain.keep_series = series;
    const skcov::McmcEstimate est = chain.ladder.empty()
                                        ? skcov::run_chain(c, beta, chain)
                                        : skcov::run_tempered(c, beta, chain);
    std::ofstream j(out + "/estimate.json");
    j << skcov::estimate_to_json(est).dump(2) << "\n";
    std::cout << "wrote " << out << "/couplings.csv and " << out << "/estimate.json\n";
    if (series) {
      skcov::write_overlap_series_csv(est, out + "/overlap_series.csv");
      std::cout << "wrote " << out << "/overlap_series.csv\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skcov: disorder-averaged covariance experiments for the zero-field SK model"};
  app.require_subcommand(0, 1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON experiment config file");

  CliOptions o;
  std::vector<std::pair<skcov::Kind, CLI::App*>> kind_subs;
  for (skcov::Kind k :
       {skcov::Kind::kIdentities, skcov::Kind::kResidualSweep, skcov::Kind::kOpnormSweep,
        skcov::Kind::kCriticalScan, skcov::Kind::kLowtempScan, skcov::Kind::kDerivCheck,
        skcov::Kind::kMcmcValidate}) {
    CLI::App* sub = app.add_subcommand(skcov::kind_name(k), "");
    add_experiment_options(sub, o);
    kind_subs.emplace_back(k, sub);
  }

  CLI::App* dump = app.add_subcommand("dump", "write one instance's couplings and summary");
  std::size_t dump_n = 8;
  double dump_beta = 0.5;
  std::uint64_t dump_seed = 0;
  std::string dump_engine = "exact";
  std::string dump_out;
  bool dump_four_point = false;
  bool dump_series = false;
  dump->add_option("--n", dump_n, "system size")->required();
  dump->add_option("--beta", dump_beta, "inverse temperature")->required();
  dump->add_option("--seed", dump_seed, "instance seed");
  dump->add_option("--engine", dump_engine, "exact | mcmc")
      ->check(CLI::IsMember({"exact", "mcmc"}));
  dump->add_option("--out", dump_out, "output directory")->required();
  dump->add_flag("--four-point", dump_four_point, "include four-point overlap moments");
  dump->add_flag("--series", dump_series, "dump raw overlap series (mcmc engine)");
  dump->add_option("--sweeps", o.sweeps, "MCMC sweeps");
  dump->add_option("--burnin", o.burnin, "MCMC burn-in sweeps");
  dump->add_option("--thin", o.thin, "record every thin-th sweep");
  dump->add_option("--replicas", o.replicas, "independent chains");
  dump->add_option("--ladder", o.ladder, "tempering ladder")->delimiter(',');
  dump->add_option("--batches", o.batches, "batch-means batches");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config file: " + config_path);
      nlohmann::json j;
      in >> j;
      return run_experiment(skcov::config_from_json(j));
    }
    if (dump->parsed())
      return run_dump(dump_n, dump_beta, dump_seed, dump_engine, dump_four_point,
                      dump_series, dump_out, o);
    for (const auto& [kind, sub] : kind_subs) {
      if (!sub->parsed()) continue;
      skcov::ExperimentConfig cfg;
      cfg.kind = kind;
      cfg.n_list = o.n_list;
      cfg.beta_list = o.beta_list;
      cfg.samples = o.samples;
      cfg.engine = skcov::engine_from_string(o.engine);
      cfg.seed = o.seed;
      cfg.out_dir = o.out;
      cfg.zero_diagonal = o.zero_diagonal;
      cfg.deriv_step = o.step;
      cfg.threads = o.threads;
      cfg.chain = chain_from(o);
      return run_experiment(cfg);
    }
    std::cerr << app.help() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
