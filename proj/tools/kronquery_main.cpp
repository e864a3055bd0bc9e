#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "kronquery/experiments.hpp"
#include "kronquery/kron_core.hpp"

namespace {

using kronquery::ExperimentConfig;
using nlohmann::json;

struct CommonOpts {
  int n = 2;
  int q = 0;
  std::vector<int> q_range;
  long trials = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  bool no_timestamp = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--n", o.n, "factor dimension")->check(CLI::PositiveNumber);
  cmd->add_option("--q", o.q, "tensor order")->check(CLI::PositiveNumber);
  cmd->add_option("--q-range", o.q_range, "tensor order range: lo hi")->expected(2);
  cmd->add_option("--trials", o.trials, "trial count")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--threads", o.threads, "worker threads")
      ->envname("KRONQUERY_THREADS")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "CSV output path (default: stdout)");
  cmd->add_flag("--no-timestamp", o.no_timestamp, "omit the generated-at comment line");
}

ExperimentConfig to_config(const std::string& experiment, const CommonOpts& o,
                           json params) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.n = o.n;
  if (!o.q_range.empty()) {
    if (o.q != 0) throw kronquery::ConfigError("--q and --q-range are mutually exclusive");
    if (o.q_range[0] < 1 || o.q_range[1] < o.q_range[0])
      throw kronquery::ConfigError("--q-range must be lo hi with 1 <= lo <= hi");
    cfg.q_lo = o.q_range[0];
    cfg.q_hi = o.q_range[1];
  } else {
    cfg.q_lo = cfg.q_hi = o.q == 0 ? 1 : o.q;
  }
  cfg.trials = o.trials;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.out = o.out;
  cfg.timestamp = !o.no_timestamp;
  cfg.params = std::move(params);
  return cfg;
}

void emit(const ExperimentConfig& cfg) {
  const auto summary = kronquery::run_experiment(cfg);
  // keep stdout clean when it carries the CSV itself
  std::ostream& os = cfg.out.empty() ? std::cerr : std::cout;
  for (const auto& line : summary) os << line << "\n";
}

std::vector<double> parse_csv_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw kronquery::ConfigError("expected comma-separated numbers, got '" + text + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "kronquery: Kronecker matrix-vector query experiments: factorized oracles, "
      "alphabet game values, hard instances, and concentration probes"};
  app.require_subcommand(1);

  // run <config.json>
  std::string config_path;
  CommonOpts run_opts;
  auto* run_cmd = app.add_subcommand("run", "run an experiment from a JSON config file");
  run_cmd->add_option("config", config_path, "JSON config path")->required();
  run_cmd->add_option("--threads", run_opts.threads, "worker threads")
      ->envname("KRONQUERY_THREADS")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", run_opts.out, "override the config's output path");
  run_cmd->add_flag("--no-timestamp", run_opts.no_timestamp,
                    "omit the generated-at comment line");

  CommonOpts zt_opts;
  std::string zt_alphabet = "pm1", zt_dist;
  int zt_m = 1;
  auto* zt = app.add_subcommand("zero-test",
                                "zero-testing detection rates on the hard instance");
  add_common(zt, zt_opts);
  zt->add_option("--alphabet", zt_alphabet, "instance alphabet (pm1, pm1i, or literals)");
  zt->add_option("--dist", zt_dist,
                 "query distribution (rademacher, complex-rademacher, gaussian, alphabet)");
  zt->add_option("--m", zt_m, "queries per trial")->check(CLI::PositiveNumber);

  CommonOpts tr_opts;
  std::string tr_instance = "hard", tr_alphabet = "pm1", tr_dist = "rademacher";
  int tr_t = 16;
  auto* tr = app.add_subcommand("trace", "Khatri-Rao Hutchinson trace estimation");
  add_common(tr, tr_opts);
  tr->add_option("--instance", tr_instance, "hard | identity | rank-one-gaussian");
  tr->add_option("--alphabet", tr_alphabet, "hard-instance alphabet");
  tr->add_option("--dist", tr_dist, "query factor distribution");
  tr->add_option("--t", tr_t, "queries per trial")->check(CLI::PositiveNumber);

  CommonOpts l2_opts;
  std::string l2_dist = "gaussian";
  int l2_t = 1000;
  auto* l2 = app.add_subcommand("l2", "squared-norm estimation from linear measurements");
  add_common(l2, l2_opts);
  l2->add_option("--dist", l2_dist, "query factor distribution");
  l2->add_option("--t", l2_t, "measurements per trial")->check(CLI::PositiveNumber);

  CommonOpts dg_opts;
  std::string dg_family = "spiked", dg_policy = "threshold";
  double dg_lambda = 8.0, dg_eps = 0.04, dg_threshold = 3.0;
  int dg_queries = 4, dg_iters = 20, dg_guess = 0, dg_tmax = 0;
  auto* dg = app.add_subcommand("distinguish", "distinguishing games on hard instance pairs");
  add_common(dg, dg_opts);
  dg->add_option("--family", dg_family, "spiked | planted");
  dg->add_option("--lambda", dg_lambda, "spike size (spiked family)");
  dg->add_option("--eps", dg_eps, "accuracy target (planted family)");
  dg->add_option("--policy", dg_policy, "threshold | blind | power-iteration");
  dg->add_option("--threshold", dg_threshold, "decision threshold for norm ratios");
  dg->add_option("--policy-queries", dg_queries, "queries for the threshold policy");
  dg->add_option("--iters", dg_iters, "power-iteration steps");
  dg->add_option("--guess", dg_guess, "fixed guess for the blind policy");
  dg->add_option("--t-max", dg_tmax, "query budget (default: policy's own query count)");

  CommonOpts gv_opts;
  std::string gv_alphabet = "pm1", gv_candidates = "all";
  auto* gv = app.add_subcommand("game-values",
                                "exact P/Q certificates by finite enumeration");
  add_common(gv, gv_opts);
  gv->add_option("--alphabet", gv_alphabet, "alphabet (pm1, pm1i, or literals)");
  gv->add_option("--candidates", gv_candidates, "all | canonical");

  CommonOpts cc_opts;
  double cc_tau = 1.0;
  auto* cc = app.add_subcommand(
      "concentration", "inner-product concentration of random Kronecker unit vectors");
  add_common(cc, cc_opts);
  cc->add_option("--tau-scale", cc_tau, "f evaluated at threshold tau_scale^-q / n^q");

  CommonOpts dv_opts;
  std::string dv_a = "1,0", dv_b, dv_sigma;
  int dv_dim = 0;
  long dv_mc = 1000000;
  auto* dv = app.add_subcommand("divergence",
                                "Monte-Carlo check of the Gaussian density-ratio identities");
  add_common(dv, dv_opts);
  dv->add_option("--a", dv_a, "mean a, comma-separated");
  dv->add_option("--b", dv_b, "mean b, comma-separated (default: a)");
  dv->add_option("--sigma", dv_sigma, "row-major covariance, comma-separated (default: I)");
  dv->add_option("--dim", dv_dim, "expected dimension (validated against --a)");
  dv->add_option("--mc-samples", dv_mc, "Monte-Carlo draws")->check(CLI::PositiveNumber);

  CommonOpts pj_opts;
  int pj_t = 4;
  auto* pj = app.add_subcommand("projection",
                                "projected-energy probe onto Khatri-Rao ranges");
  add_common(pj, pj_opts);
  pj->add_option("--t", pj_t, "columns in the Khatri-Rao sketch")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);

    if (run_cmd->parsed()) {
      ExperimentConfig cfg = kronquery::config_from_file(config_path);
      cfg.threads = run_opts.threads;
      if (!run_opts.out.empty()) cfg.out = run_opts.out;
      cfg.timestamp = !run_opts.no_timestamp;
      emit(cfg);
    } else if (zt->parsed()) {
      json params{{"alphabet", zt_alphabet}, {"m", zt_m}};
      if (!zt_dist.empty()) params["dist"] = zt_dist;
      emit(to_config("zero-test-scaling", zt_opts, params));
    } else if (tr->parsed()) {
      emit(to_config("trace", tr_opts,
                     json{{"instance", tr_instance},
                          {"alphabet", tr_alphabet},
                          {"dist", tr_dist},
                          {"t", tr_t}}));
    } else if (l2->parsed()) {
      emit(to_config("l2", l2_opts, json{{"dist", l2_dist}, {"t", l2_t}}));
    } else if (dg->parsed()) {
      json params{{"family", dg_family},    {"lambda", dg_lambda},
                  {"eps", dg_eps},          {"policy", dg_policy},
                  {"threshold", dg_threshold}, {"policy_queries", dg_queries},
                  {"iters", dg_iters},      {"guess", dg_guess}};
      if (dg_tmax > 0) params["t_max"] = dg_tmax;
      emit(to_config("distinguish", dg_opts, params));
    } else if (gv->parsed()) {
      emit(to_config("game-values", gv_opts,
                     json{{"alphabet", gv_alphabet}, {"candidates", gv_candidates}}));
    } else if (cc->parsed()) {
      emit(to_config("concentration", cc_opts, json{{"tau_scale", cc_tau}}));
    } else if (dv->parsed()) {
      json params{{"a", parse_csv_doubles(dv_a)}, {"mc_samples", dv_mc}};
      if (!dv_b.empty()) params["b"] = parse_csv_doubles(dv_b);
      if (!dv_sigma.empty()) params["sigma"] = parse_csv_doubles(dv_sigma);
      if (dv_dim > 0 && static_cast<int>(parse_csv_doubles(dv_a).size()) != dv_dim)
        throw kronquery::ConfigError("--dim does not match the length of --a");
      emit(to_config("divergence", dv_opts, params));
    } else if (pj->parsed()) {
      emit(to_config("projection", pj_opts, json{{"t", pj_t}}));
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const kronquery::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
}
