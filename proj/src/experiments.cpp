#include "kronquery/experiments.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "kronquery/estimators.hpp"
#include "kronquery/hard_instances.hpp"
#include "kronquery/oracle_bruteforce.hpp"
#include "kronquery/parallel.hpp"

namespace kronquery {

using nlohmann::json;

std::string csv_format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_format(long long v) { return std::to_string(v); }

namespace {

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

// ---------------------------------------------------------------- csv writer

class Csv {
 public:
  explicit Csv(std::ostream& os) : os_(os) {}

  void meta(const std::string& line) { os_ << "# " << line << "\n"; }

  void doc(const std::string& column, const std::string& description) {
    docs_.emplace_back(column, description);
  }

  void header(const std::vector<std::string>& cols) {
    for (const auto& [c, d] : docs_) os_ << "# column " << c << ": " << d << "\n";
    for (std::size_t i = 0; i < cols.size(); ++i)
      os_ << (i ? "," : "") << cols[i];
    os_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

 private:
  std::ostream& os_;
  std::vector<std::pair<std::string, std::string>> docs_;
};

// ------------------------------------------------------- strict param access

class ParamReader {
 public:
  ParamReader(const json& obj, std::string context)
      : obj_(obj), ctx_(std::move(context)) {
    if (!obj_.is_object())
      throw ConfigError(ctx_ + ": params must be a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_number())
      throw ConfigError(ctx_ + ": param '" + key + "' must be a number");
    return obj_[key].get<double>();
  }

  long integer(const std::string& key, long fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_number_integer())
      throw ConfigError(ctx_ + ": param '" + key + "' must be an integer");
    return obj_[key].get<long>();
  }

  std::string str(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!obj_.contains(key)) return fallback;
    if (!obj_[key].is_string())
      throw ConfigError(ctx_ + ": param '" + key + "' must be a string");
    return obj_[key].get<std::string>();
  }

  std::vector<double> number_list(const std::string& key) {
    seen_.insert(key);
    std::vector<double> out;
    if (!obj_.contains(key)) return out;
    if (!obj_[key].is_array())
      throw ConfigError(ctx_ + ": param '" + key + "' must be an array of numbers");
    for (const auto& v : obj_[key]) {
      if (!v.is_number())
        throw ConfigError(ctx_ + ": param '" + key + "' must be an array of numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  void finish() const {
    std::vector<std::string> unknown;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) unknown.push_back(it.key());
    if (!unknown.empty()) {
      std::string msg = ctx_ + ": unknown param key(s):";
      for (const auto& k : unknown) msg += " '" + k + "'";
      throw ConfigError(msg);
    }
  }

 private:
  const json& obj_;
  std::string ctx_;
  std::set<std::string> seen_;
};

// ------------------------------------------------------ distribution parsing

FactorDistribution<double> parse_real_dist(const std::string& name, int n,
                                           const Alphabet& alphabet) {
  if (name == "rademacher") return FactorDistribution<double>::rademacher(n);
  if (name == "gaussian") return FactorDistribution<double>::gaussian(n);
  if (name == "unit-sphere") return FactorDistribution<double>::unit_sphere(n);
  if (name == "sqrtn-sphere") return FactorDistribution<double>::sqrt_n_sphere(n);
  if (name == "alphabet") return FactorDistribution<double>::alphabet_iid(alphabet, n);
  throw ConfigError("unknown real factor distribution '" + name + "'");
}

FactorDistribution<Complex> parse_complex_dist(const std::string& name, int n,
                                               const Alphabet& alphabet) {
  if (name == "complex-rademacher")
    return FactorDistribution<Complex>::complex_rademacher(n);
  if (name == "gaussian") return FactorDistribution<Complex>::gaussian(n);
  if (name == "alphabet") return FactorDistribution<Complex>::alphabet_iid(alphabet, n);
  throw ConfigError("unknown complex factor distribution '" + name + "'");
}

/// Query alphabet implied by a distribution name, when there is one.
const Alphabet* query_alphabet_of(const std::string& dist, const Alphabet& custom,
                                  Alphabet& scratch) {
  if (dist == "rademacher") {
    scratch = Alphabet::pm1();
    return &scratch;
  }
  if (dist == "complex-rademacher") {
    scratch = Alphabet::pm1i();
    return &scratch;
  }
  if (dist == "alphabet") return &custom;
  return nullptr;
}

/// Adversarial factor pmf matching (alphabet, n): the explicit distributions
/// from the zero-testing lower bounds.
ExactPmf auto_adversary(const Alphabet& alphabet, int n) {
  if (!alphabet.is_real()) {
    const Alphabet pm1i = Alphabet::pm1i();
    const bool matches = n == 2 && alphabet.size() == 4 &&
                         std::all_of(alphabet.symbols.begin(), alphabet.symbols.end(),
                                     [&](const Complex& c) { return pm1i.contains(c); });
    if (!matches)
      throw ConfigError("complex adversary requires alphabet {+-1,+-i} and n=2");
    return adversary_complex_n2_pmf();
  }
  if (n == 2 && alphabet.size() == 2 && alphabet.contains(Complex(1, 0)) &&
      alphabet.contains(Complex(-1, 0)))
    return adversary_pm1_n2_pmf();
  return adversary_support2_pmf(n);
}

/// Exact per-mode detection probability of an i.i.d.-uniform alphabet query
/// against the adversary pmf: sum_v w_v Pr_u[v^T u != 0].
double expected_detection_per_mode(const ExactPmf& adversary, const Alphabet& query) {
  const ExactVector syms = exact_alphabet(query);
  const std::size_t k = syms.size();
  const int n = adversary.n();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= k;
  Rational acc = Rational::integer(0);
  for (std::size_t vi = 0; vi < adversary.support.size(); ++vi) {
    long long hits = 0;
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    ExactVector u(static_cast<std::size_t>(n));
    for (std::size_t count = 0; count < total; ++count) {
      for (int i = 0; i < n; ++i)
        u[static_cast<std::size_t>(i)] = syms[idx[static_cast<std::size_t>(i)]];
      if (!exact_form(adversary.support[vi], u, false).is_zero()) ++hits;
      for (int i = n - 1; i >= 0; --i) {
        if (++idx[static_cast<std::size_t>(i)] < k) break;
        idx[static_cast<std::size_t>(i)] = 0;
      }
    }
    acc = acc + adversary.weights[vi] * Rational(hits, static_cast<long long>(total));
  }
  return acc.to_double();
}

std::string exact_vector_str(const ExactVector& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ";";
    const Complex c = v[i].to_complex();
    if (c.imag() == 0.0) {
      s += csv_format(c.real());
    } else {
      s += csv_format(c.real()) + (c.imag() >= 0 ? "+" : "") + csv_format(c.imag()) + "i";
    }
  }
  return s + ")";
}

// ------------------------------------------------------------------- runners

struct RunContext {
  const ExperimentConfig& cfg;
  Csv& csv;
  std::vector<std::string>& summary;
  SeededStream base;
};

const std::vector<std::string> kPrefixCols = {"experiment", "seed", "n"};

std::vector<std::string> prefix_cells(const ExperimentConfig& cfg) {
  return {cfg.experiment, fmt_u64(cfg.seed), csv_format(static_cast<long long>(cfg.n))};
}

void doc_prefix(Csv& csv) {
  csv.doc("experiment", "experiment name");
  csv.doc("seed", "master seed; trial i uses the counter-based stream (seed, i)");
  csv.doc("n", "factor dimension");
}

void run_zero_test(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "zero-test-scaling");
  const std::string alphabet_text = p.str("alphabet", "pm1");
  const Alphabet alphabet = Alphabet::parse(alphabet_text);
  const std::string default_dist = alphabet.is_real() ? "rademacher" : "complex-rademacher";
  const std::string dist_name = p.str("dist", default_dist);
  const int m = static_cast<int>(p.integer("m", 1));
  p.finish();
  if (m < 1) throw ConfigError("zero-test-scaling: m must be >= 1");
  const bool complex_mode = !alphabet.is_real() || dist_name == "complex-rademacher";

  doc_prefix(ctx.csv);
  ctx.csv.doc("q", "tensor order of the hard instance and of each query");
  ctx.csv.doc("trials", "independent hard-instance/query draws");
  ctx.csv.doc("m", "query budget per trial handed to estimators zero_test");
  ctx.csv.doc("dist", "factor distribution of the queries");
  ctx.csv.doc("detect_rate", "fraction of trials where zero_test returned NonZero");
  ctx.csv.doc("wilson_halfwidth", "95% Wilson halfwidth of detect_rate");
  ctx.csv.doc("expected_rate",
              "exact per-mode detection probability raised to q (enumeration; "
              "1 for continuous queries, nan when no closed form applies)");
  ctx.csv.header({"experiment", "seed", "n", "q", "trials", "m", "dist", "detect_rate",
                  "wilson_halfwidth", "expected_rate"});

  Alphabet scratch;
  const Alphabet* query_alpha = query_alphabet_of(dist_name, alphabet, scratch);
  double expected_per_mode = std::numeric_limits<double>::quiet_NaN();
  if (query_alpha != nullptr)
    expected_per_mode = expected_detection_per_mode(auto_adversary(alphabet, cfg.n),
                                                    *query_alpha);
  else if (dist_name == "gaussian")
    expected_per_mode = 1.0;

  for (int q = cfg.q_lo; q <= cfg.q_hi; ++q) {
    const SeededStream qs = ctx.base.derive(static_cast<std::uint64_t>(q));
    const long blocks = blocked_block_count(cfg.trials);
    std::vector<long> hits(static_cast<std::size_t>(blocks), 0);
    blocked_parallel_for(cfg.trials, cfg.threads, [&](long lo, long hi, long block) {
      long local = 0;
      for (long trial = lo; trial < hi; ++trial) {
        const SeededStream ts = qs.derive(static_cast<std::uint64_t>(trial));
        SeededStream query_stream = ts.derive(2);
        Verdict v;
        if (complex_mode) {
          auto inst = make_trace_hard_instance<Complex>(alphabet, cfg.n, q, ts.derive(1));
          MatrixOracle<Complex> oracle(std::move(inst), cfg.n);
          const auto d = parse_complex_dist(dist_name, cfg.n, alphabet);
          v = zero_test(oracle, d, m, query_stream).verdict;
        } else {
          auto inst = make_trace_hard_instance<double>(alphabet, cfg.n, q, ts.derive(1));
          MatrixOracle<double> oracle(std::move(inst), cfg.n);
          const auto d = parse_real_dist(dist_name, cfg.n, alphabet);
          v = zero_test(oracle, d, m, query_stream).verdict;
        }
        if (v == Verdict::NonZero) ++local;
      }
      hits[static_cast<std::size_t>(block)] = local;
    });
    long detected = 0;
    for (long h : hits) detected += h;
    const WilsonInterval w = wilson_interval(detected, cfg.trials);
    const double rate = static_cast<double>(detected) / static_cast<double>(cfg.trials);
    const double expected =
        std::isnan(expected_per_mode)
            ? expected_per_mode
            : (m == 1 ? std::pow(expected_per_mode, q)
                      : 1.0 - std::pow(1.0 - std::pow(expected_per_mode, q), m));
    auto cells = prefix_cells(cfg);
    cells.push_back(csv_format(static_cast<long long>(q)));
    cells.push_back(csv_format(static_cast<long long>(cfg.trials)));
    cells.push_back(csv_format(static_cast<long long>(m)));
    cells.push_back(dist_name);
    cells.push_back(csv_format(rate));
    cells.push_back(csv_format(w.halfwidth));
    cells.push_back(csv_format(expected));
    ctx.csv.row(cells);
    if (cfg.trials == 1) {
      ctx.summary.push_back("q=" + std::to_string(q) + ": " +
                            (detected ? "NonZero" : "Zero"));
    } else {
      ctx.summary.push_back("q=" + std::to_string(q) +
                            ": detect_rate=" + csv_format(rate) +
                            " expected=" + csv_format(expected));
    }
  }
}

void run_trace(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "trace");
  const std::string instance = p.str("instance", "hard");
  const Alphabet alphabet = Alphabet::parse(p.str("alphabet", "pm1"));
  const std::string dist_name = p.str("dist", "rademacher");
  const int t = static_cast<int>(p.integer("t", 16));
  p.finish();
  if (t < 1) throw ConfigError("trace: t must be >= 1");
  if (!alphabet.is_real()) throw ConfigError("trace: estimation is real-valued");

  doc_prefix(ctx.csv);
  ctx.csv.doc("q", "tensor order");
  ctx.csv.doc("trials", "independent instance/sketch draws");
  ctx.csv.doc("t", "queries per trial handed to estimators hutchinson_trace");
  ctx.csv.doc("dist", "Khatri-Rao factor distribution");
  ctx.csv.doc("instance", "implicit matrix under test");
  ctx.csv.doc("mean_trace_true", "mean of tr(A) over trials");
  ctx.csv.doc("mean_estimate", "mean Hutchinson estimate over trials");
  ctx.csv.doc("frac_exact_zero", "fraction of trials whose estimate is exactly 0");
  ctx.csv.doc("frac_within_20pct", "fraction of trials within 20% of tr(A)");
  ctx.csv.doc("mean_rel_err", "mean |estimate - tr| / tr");
  ctx.csv.header({"experiment", "seed", "n", "q", "trials", "t", "dist", "instance",
                  "mean_trace_true", "mean_estimate", "frac_exact_zero",
                  "frac_within_20pct", "mean_rel_err"});

  for (int q = cfg.q_lo; q <= cfg.q_hi; ++q) {
    const SeededStream qs = ctx.base.derive(static_cast<std::uint64_t>(q));
    struct Acc {
      double tr = 0, est = 0, rel = 0;
      long zero = 0, within = 0;
    };
    const long blocks = blocked_block_count(cfg.trials);
    std::vector<Acc> acc(static_cast<std::size_t>(blocks));
    blocked_parallel_for(cfg.trials, cfg.threads, [&](long lo, long hi, long block) {
      Acc local;
      const auto d = parse_real_dist(dist_name, cfg.n, alphabet);
      for (long trial = lo; trial < hi; ++trial) {
        const SeededStream ts = qs.derive(static_cast<std::uint64_t>(trial));
        SeededStream inst_stream = ts.derive(1);
        SeededStream sketch_stream = ts.derive(2);
        std::optional<ImplicitMatrix<double>> a;
        if (instance == "hard") {
          a = make_trace_hard_instance<double>(alphabet, cfg.n, q, inst_stream);
        } else if (instance == "identity") {
          KronVector<double> probe;
          probe.factors.assign(static_cast<std::size_t>(q),
                               FactorVec<double>::Zero(cfg.n));
          const std::size_t d_dim = probe.dim();
          if (d_dim > 4096) throw ConfigError("trace: identity instance needs n^q <= 4096");
          a = ImplicitMatrix<double>::explicit_dense(
              Mat<double>::Identity(static_cast<Eigen::Index>(d_dim),
                                    static_cast<Eigen::Index>(d_dim)));
        } else if (instance == "rank-one-gaussian") {
          KronVector<double> probe;
          probe.factors.assign(static_cast<std::size_t>(q),
                               FactorVec<double>::Zero(cfg.n));
          const std::size_t d_dim = probe.dim();
          if (d_dim > kDefaultCap) throw CapacityError("trace: n^q exceeds cap");
          Vec<double> g(static_cast<Eigen::Index>(d_dim));
          for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = inst_stream.next_gaussian();
          a = ImplicitMatrix<double>::rank_one(std::move(g));
        } else {
          throw ConfigError("trace: unknown instance '" + instance + "'");
        }
        const double tr = trace(*a);
        const EstimateReport rep = hutchinson_trace(*a, d, t, sketch_stream);
        local.tr += tr;
        local.est += rep.value;
        if (rep.value == 0.0) ++local.zero;
        if (tr != 0.0) {
          const double rel = std::abs(rep.value - tr) / std::abs(tr);
          local.rel += rel;
          if (rel <= 0.2) ++local.within;
        }
      }
      acc[static_cast<std::size_t>(block)] = local;
    });
    Acc sum;
    for (const auto& a2 : acc) {
      sum.tr += a2.tr;
      sum.est += a2.est;
      sum.rel += a2.rel;
      sum.zero += a2.zero;
      sum.within += a2.within;
    }
    const double inv = 1.0 / static_cast<double>(cfg.trials);
    auto cells = prefix_cells(cfg);
    cells.push_back(csv_format(static_cast<long long>(q)));
    cells.push_back(csv_format(static_cast<long long>(cfg.trials)));
    cells.push_back(csv_format(static_cast<long long>(t)));
    cells.push_back(dist_name);
    cells.push_back(instance);
    cells.push_back(csv_format(sum.tr * inv));
    cells.push_back(csv_format(sum.est * inv));
    cells.push_back(csv_format(static_cast<double>(sum.zero) * inv));
    cells.push_back(csv_format(static_cast<double>(sum.within) * inv));
    cells.push_back(csv_format(sum.rel * inv));
    ctx.csv.row(cells);
    ctx.summary.push_back("q=" + std::to_string(q) + ": mean_estimate=" +
                          csv_format(sum.est * inv) + " frac_exact_zero=" +
                          csv_format(static_cast<double>(sum.zero) * inv));
  }
}

void run_l2(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "l2");
  const std::string dist_name = p.str("dist", "gaussian");
  const int t = static_cast<int>(p.integer("t", 1000));
  p.finish();
  if (t < 1) throw ConfigError("l2: t must be >= 1");

  doc_prefix(ctx.csv);
  ctx.csv.doc("q", "tensor order");
  ctx.csv.doc("trials", "independent (vector, sketch) draws");
  ctx.csv.doc("t", "linear measurements per trial handed to estimators l2_estimate");
  ctx.csv.doc("dist", "Khatri-Rao factor distribution");
  ctx.csv.doc("mean_rel_err", "mean |estimate - ||a||^2| / ||a||^2");
  ctx.csv.doc("frac_within_10pct", "fraction of trials within 10% of ||a||^2");
  ctx.csv.header({"experiment", "seed", "n", "q", "trials", "t", "dist", "mean_rel_err",
                  "frac_within_10pct"});

  const Alphabet none = Alphabet::pm1();
  for (int q = cfg.q_lo; q <= cfg.q_hi; ++q) {
    const SeededStream qs = ctx.base.derive(static_cast<std::uint64_t>(q));
    struct Acc {
      double rel = 0;
      long within = 0;
    };
    const long blocks = blocked_block_count(cfg.trials);
    std::vector<Acc> acc(static_cast<std::size_t>(blocks));
    blocked_parallel_for(cfg.trials, cfg.threads, [&](long lo, long hi, long block) {
      Acc local;
      const auto d = parse_real_dist(dist_name, cfg.n, none);
      for (long trial = lo; trial < hi; ++trial) {
        const SeededStream ts = qs.derive(static_cast<std::uint64_t>(trial));
        SeededStream vec_stream = ts.derive(1);
        SeededStream sketch_stream = ts.derive(2);
        KronVector<double> probe;
        probe.factors.assign(static_cast<std::size_t>(q), FactorVec<double>::Zero(cfg.n));
        const std::size_t d_dim = probe.dim();
        if (d_dim > kDefaultCap) throw CapacityError("l2: n^q exceeds cap");
        Vec<double> a(static_cast<Eigen::Index>(d_dim));
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = vec_stream.next_gaussian();
        const double truth = a.squaredNorm();
        const EstimateReport rep = l2_estimate(a, d, t, sketch_stream);
        const double rel = std::abs(rep.value - truth) / truth;
        local.rel += rel;
        if (rel <= 0.1) ++local.within;
      }
      acc[static_cast<std::size_t>(block)] = local;
    });
    double rel = 0;
    long within = 0;
    for (const auto& a2 : acc) {
      rel += a2.rel;
      within += a2.within;
    }
    const double inv = 1.0 / static_cast<double>(cfg.trials);
    auto cells = prefix_cells(cfg);
    cells.push_back(csv_format(static_cast<long long>(q)));
    cells.push_back(csv_format(static_cast<long long>(cfg.trials)));
    cells.push_back(csv_format(static_cast<long long>(t)));
    cells.push_back(dist_name);
    cells.push_back(csv_format(rel * inv));
    cells.push_back(csv_format(static_cast<double>(within) * inv));
    ctx.csv.row(cells);
    ctx.summary.push_back("q=" + std::to_string(q) + ": mean_rel_err=" +
                          csv_format(rel * inv));
  }
}

void run_distinguish(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "distinguish");
  const std::string family = p.str("family", "spiked");
  const double lambda = p.number("lambda", 8.0);
  const double eps = p.number("eps", 0.04);
  const std::string policy = p.str("policy", "threshold");
  const double threshold = p.number("threshold", 3.0);
  const int policy_queries = static_cast<int>(p.integer("policy_queries", 4));
  const int iters = static_cast<int>(p.integer("iters", 20));
  const int guess = static_cast<int>(p.integer("guess", 0));
  int t_max_default = policy == "power-iteration" ? iters
                      : policy == "threshold"     ? policy_queries
                                                  : 1;
  const int t_max = static_cast<int>(p.integer("t_max", t_max_default));
  p.finish();

  Distinguisher algo;
  if (policy == "blind")
    algo = blind_policy(guess);
  else if (policy == "threshold")
    algo = threshold_policy(policy_queries, threshold);
  else if (policy == "power-iteration")
    algo = power_iteration_policy(iters, threshold);
  else
    throw ConfigError("distinguish: unknown policy '" + policy + "'");

  doc_prefix(ctx.csv);
  ctx.csv.doc("q", "tensor order");
  ctx.csv.doc("trials", "independent game rounds played by hard_instances run_game");
  ctx.csv.doc("family", "instance pair family");
  ctx.csv.doc("policy", "distinguisher under test");
  ctx.csv.doc("lambda", "spike size (spiked family)");
  ctx.csv.doc("eps", "accuracy target driving lambda = 6 sqrt(eps) (planted family)");
  ctx.csv.doc("t_max", "per-trial query budget; overruns abort and score as failures");
  ctx.csv.doc("success_rate", "fraction of correctly guessed arms");
  ctx.csv.doc("wilson_halfwidth", "95% Wilson halfwidth of success_rate");
  ctx.csv.doc("mean_queries", "mean oracle queries per trial");
  ctx.csv.doc("kappa_max",
              "max condition number of any trial's recorded query matrix (inf when "
              "a trial's queries were numerically rank-deficient)");
  ctx.csv.doc("aborted", "trials that exceeded the budget");
  ctx.csv.header({"experiment", "seed", "n", "q", "trials", "family", "policy", "lambda",
                  "eps", "t_max", "success_rate", "wilson_halfwidth", "mean_queries",
                  "kappa_max", "aborted"});

  for (int q = cfg.q_lo; q <= cfg.q_hi; ++q) {
    GameSpec spec;
    if (family == "spiked")
      spec.family = SpikedWignerFamily{cfg.n, q, lambda};
    else if (family == "planted")
      spec.family = PlantedVectorFamily{cfg.n, q, eps};
    else
      throw ConfigError("distinguish: unknown family '" + family + "'");
    spec.trials = cfg.trials;
    spec.algorithm = algo;
    spec.budget = QueryBudget{t_max, true};
    const GameReport rep =
        run_game(spec, ctx.base.derive(static_cast<std::uint64_t>(q)), cfg.threads);
    auto cells = prefix_cells(cfg);
    cells.push_back(csv_format(static_cast<long long>(q)));
    cells.push_back(csv_format(static_cast<long long>(cfg.trials)));
    cells.push_back(family);
    cells.push_back(policy);
    cells.push_back(csv_format(lambda));
    cells.push_back(csv_format(eps));
    cells.push_back(csv_format(static_cast<long long>(t_max)));
    cells.push_back(csv_format(rep.success_rate));
    cells.push_back(csv_format(rep.wilson_halfwidth));
    cells.push_back(csv_format(rep.mean_queries));
    cells.push_back(csv_format(rep.kappa_max));
    cells.push_back(csv_format(static_cast<long long>(rep.aborted)));
    ctx.csv.row(cells);
    ctx.summary.push_back("q=" + std::to_string(q) + ": success_rate=" +
                          csv_format(rep.success_rate) + " +-" +
                          csv_format(rep.wilson_halfwidth));
  }
}

void run_game_values(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "game-values");
  const std::string alphabet_text = p.str("alphabet", "pm1");
  const Alphabet alphabet = Alphabet::parse(alphabet_text);
  const std::string candidates_mode = p.str("candidates", "all");
  p.finish();

  const ExactPmf adversary = auto_adversary(alphabet, cfg.n);
  const GameValueReport p_cert = alphabet_worst_case(adversary, alphabet, cfg.n);

  std::vector<ExactVector> candidates;
  const ExactVector syms = exact_alphabet(alphabet);
  if (candidates_mode == "all") {
    // every nonzero alphabet-valued candidate
    std::size_t total = 1;
    for (int i = 0; i < cfg.n; ++i) {
      if (total > 4096 / syms.size())
        throw ConfigError("game-values: candidate space too large, use candidates=canonical");
      total *= syms.size();
    }
    std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.n), 0);
    for (std::size_t count = 0; count < total; ++count) {
      ExactVector v(static_cast<std::size_t>(cfg.n));
      for (int i = 0; i < cfg.n; ++i)
        v[static_cast<std::size_t>(i)] = syms[idx[static_cast<std::size_t>(i)]];
      if (!std::all_of(v.begin(), v.end(),
                       [](const ExactComplex& c) { return c.is_zero(); }))
        candidates.push_back(std::move(v));
      for (int i = cfg.n - 1; i >= 0; --i) {
        if (++idx[static_cast<std::size_t>(i)] < syms.size()) break;
        idx[static_cast<std::size_t>(i)] = 0;
      }
    }
  } else if (candidates_mode == "canonical") {
    ExactVector ones(static_cast<std::size_t>(cfg.n), ExactComplex::integer(1));
    ExactVector e1(static_cast<std::size_t>(cfg.n), ExactComplex::integer(0));
    e1[0] = ExactComplex::integer(1);
    ExactVector alt(static_cast<std::size_t>(cfg.n), ExactComplex::integer(1));
    alt.back() = ExactComplex::integer(-1);
    candidates = {ones, e1, alt};
  } else {
    throw ConfigError("game-values: candidates must be 'all' or 'canonical'");
  }
  const GameValueReport q_cert = iid_alphabet_min_search(alphabet, cfg.n, candidates);

  doc_prefix(ctx.csv);
  ctx.csv.doc("alphabet", "alphabet under test");
  ctx.csv.doc("p_num", "numerator of the certified upper bound on P(alphabet, n)");
  ctx.csv.doc("p_den", "denominator of the P certificate");
  ctx.csv.doc("p_value", "P certificate as a float (exact value is p_num/p_den)");
  ctx.csv.doc("p_witness", "maximizing input u from the enumeration");
  ctx.csv.doc("q_num", "numerator of the certified lower bound on Q(alphabet, n)");
  ctx.csv.doc("q_den", "denominator of the Q certificate");
  ctx.csv.doc("q_value", "Q certificate as a float (exact value is q_num/q_den)");
  ctx.csv.doc("q_witness", "minimizing measurement vector from the candidate set");
  ctx.csv.header({"experiment", "seed", "n", "alphabet", "p_num", "p_den", "p_value",
                  "p_witness", "q_num", "q_den", "q_value", "q_witness"});
  auto cells = prefix_cells(cfg);
  cells.push_back(alphabet_text);
  cells.push_back(csv_format(p_cert.detection_prob.num));
  cells.push_back(csv_format(p_cert.detection_prob.den));
  cells.push_back(csv_format(p_cert.detection_prob.to_double()));
  cells.push_back(exact_vector_str(p_cert.witness_u));
  cells.push_back(csv_format(q_cert.detection_prob.num));
  cells.push_back(csv_format(q_cert.detection_prob.den));
  cells.push_back(csv_format(q_cert.detection_prob.to_double()));
  cells.push_back(exact_vector_str(q_cert.witness_u));
  ctx.csv.row(cells);

  ctx.summary.push_back("P certificate: P(alphabet, n=" + std::to_string(cfg.n) +
                        ") <= " + p_cert.detection_prob.str() +
                        "  [enumeration, witness u=" + exact_vector_str(p_cert.witness_u) +
                        "]");
  ctx.summary.push_back("Q certificate: Q(alphabet, n=" + std::to_string(cfg.n) +
                        ") >= " + q_cert.detection_prob.str() +
                        "  [enumeration, witness v=" + exact_vector_str(q_cert.witness_u) +
                        "]");
}

void run_concentration(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "concentration");
  const double tau_scale = p.number("tau_scale", 1.0);
  p.finish();

  const ConcentrationReport rep =
      concentration_probe(cfg.n, cfg.q_hi, cfg.trials, tau_scale, ctx.base, cfg.threads);

  doc_prefix(ctx.csv);
  ctx.csv.doc("q", "tensor order (prefix of one factor stream per trial)");
  ctx.csv.doc("trials", "unit-sphere Kronecker draws");
  ctx.csv.doc("tau_scale", "f is evaluated at threshold tau_scale^{-q} / n^q");
  ctx.csv.doc("mean_log_x", "empirical mean of sum_{i<=q} log <u_i, v_i>^2");
  ctx.csv.doc("digamma_prediction", "q * (psi(1/2) - psi(n/2))");
  ctx.csv.doc("empirical_f_tau", "empirical Pr[<u,v>^2 >= tau_scale^{-q}/n^q]");
  ctx.csv.doc("fitted_decay_rate",
              "least-squares slope of log f over q = 2..q_max (same on every row)");
  ctx.csv.doc("fit_r_squared", "R^2 of that fit");
  ctx.csv.meta("mean |<u_1, v_1>| over first mode: " + csv_format(rep.mean_abs_per_mode) +
               " (vs E<u,v>^2 = 1/n = " + csv_format(1.0 / cfg.n) + ")");
  ctx.csv.header({"experiment", "seed", "n", "q", "trials", "tau_scale", "mean_log_x",
                  "digamma_prediction", "empirical_f_tau", "fitted_decay_rate",
                  "fit_r_squared"});

  for (int q = cfg.q_lo; q <= cfg.q_hi; ++q) {
    auto cells = prefix_cells(cfg);
    cells.push_back(csv_format(static_cast<long long>(q)));
    cells.push_back(csv_format(static_cast<long long>(cfg.trials)));
    cells.push_back(csv_format(tau_scale));
    cells.push_back(csv_format(rep.mean_log_x[static_cast<std::size_t>(q - 1)]));
    cells.push_back(csv_format(q * rep.digamma_per_mode));
    cells.push_back(csv_format(rep.empirical_f[static_cast<std::size_t>(q - 1)]));
    cells.push_back(csv_format(rep.fitted_decay_rate));
    cells.push_back(csv_format(rep.fit_r_squared));
    ctx.csv.row(cells);
  }
  ctx.summary.push_back("digamma per-mode prediction: " + csv_format(rep.digamma_per_mode));
  ctx.summary.push_back("fitted log f decay rate: " + csv_format(rep.fitted_decay_rate) +
                        " (R^2=" + csv_format(rep.fit_r_squared) + ")");
}

void run_divergence(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "divergence");
  std::vector<double> a_list = p.number_list("a");
  if (a_list.empty()) a_list = {1.0, 0.0};
  std::vector<double> b_list = p.number_list("b");
  if (b_list.empty()) b_list = a_list;
  const std::vector<double> sigma_list = p.number_list("sigma");
  const long mc = p.integer("mc_samples", 1000000);
  p.finish();

  const int dim = static_cast<int>(a_list.size());
  Vec<double> a = Eigen::Map<const Vec<double>>(a_list.data(), dim);
  if (static_cast<int>(b_list.size()) != dim)
    throw ConfigError("divergence: a and b must have the same length");
  Vec<double> b = Eigen::Map<const Vec<double>>(b_list.data(), dim);
  Mat<double> sigma = Mat<double>::Identity(dim, dim);
  if (!sigma_list.empty()) {
    if (static_cast<int>(sigma_list.size()) != dim * dim)
      throw ConfigError("divergence: sigma must be a row-major dim*dim array");
    sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>(sigma_list.data(), dim, dim);
  }

  const DivergenceCheck chk = gaussian_divergence_check(a, b, sigma, mc, ctx.base);

  doc_prefix(ctx.csv);
  ctx.csv.doc("dim", "dimension of the Gaussian");
  ctx.csv.doc("mc_samples", "Monte-Carlo draws under N(0, Sigma)");
  ctx.csv.doc("closed_form", "exp(a^T Sigma^{-1} b)");
  ctx.csv.doc("mc_value", "sample mean of dP_a dP_b / dQ^2");
  ctx.csv.doc("rel_err", "|mc_value - closed_form| / closed_form");
  ctx.csv.header({"experiment", "seed", "n", "dim", "mc_samples", "closed_form",
                  "mc_value", "rel_err"});
  const double rel = std::abs(chk.mc_value - chk.closed_form) / chk.closed_form;
  auto cells = prefix_cells(cfg);
  cells.push_back(csv_format(static_cast<long long>(dim)));
  cells.push_back(csv_format(static_cast<long long>(mc)));
  cells.push_back(csv_format(chk.closed_form));
  cells.push_back(csv_format(chk.mc_value));
  cells.push_back(csv_format(rel));
  ctx.csv.row(cells);
  ctx.summary.push_back("closed_form=" + csv_format(chk.closed_form) +
                        " mc_value=" + csv_format(chk.mc_value) +
                        " rel_err=" + csv_format(rel));
}

void run_projection(RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  ParamReader p(cfg.params, "projection");
  const int t = static_cast<int>(p.integer("t", 4));
  p.finish();

  const ProjectionProbeReport rep =
      projection_probe(cfg.n, cfg.q_lo, cfg.q_hi, t, cfg.trials, ctx.base, cfg.threads);

  doc_prefix(ctx.csv);
  ctx.csv.doc("q", "tensor order");
  ctx.csv.doc("trials", "independent (V, u) draws");
  ctx.csv.doc("t", "Khatri-Rao columns in V (unit-sphere factors)");
  ctx.csv.doc("median_scaled", "median of ||P u||^2 * n^q (diagnostic, unasserted)");
  ctx.csv.doc("q90_scaled", "90th percentile of ||P u||^2 * n^q");
  ctx.csv.doc("mean_scaled", "mean of ||P u||^2 * n^q");
  ctx.csv.header({"experiment", "seed", "n", "q", "trials", "t", "median_scaled",
                  "q90_scaled", "mean_scaled"});
  for (std::size_t i = 0; i < rep.orders.size(); ++i) {
    auto cells = prefix_cells(cfg);
    cells.push_back(csv_format(static_cast<long long>(rep.orders[i])));
    cells.push_back(csv_format(static_cast<long long>(cfg.trials)));
    cells.push_back(csv_format(static_cast<long long>(t)));
    cells.push_back(csv_format(rep.median_scaled[i]));
    cells.push_back(csv_format(rep.q90_scaled[i]));
    cells.push_back(csv_format(rep.mean_scaled[i]));
    ctx.csv.row(cells);
    ctx.summary.push_back("q=" + std::to_string(rep.orders[i]) + ": median scaled energy=" +
                          csv_format(rep.median_scaled[i]));
  }
}

using Runner = void (*)(RunContext&);

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> r = {
      {"zero-test-scaling", &run_zero_test},
      {"trace", &run_trace},
      {"l2", &run_l2},
      {"distinguish", &run_distinguish},
      {"game-values", &run_game_values},
      {"concentration", &run_concentration},
      {"divergence", &run_divergence},
      {"projection", &run_projection},
  };
  return r;
}

std::string canonical_name(const std::string& name) {
  if (name == "zero-test") return "zero-test-scaling";
  return name;
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json config_echo(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["n"] = cfg.n;
  if (cfg.q_lo == cfg.q_hi)
    j["q"] = cfg.q_lo;
  else
    j["q_range"] = {cfg.q_lo, cfg.q_hi};
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["params"] = cfg.params;
  return j;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

  static const std::set<std::string> allowed = {"experiment", "n",      "q",   "q_range",
                                                "trials",     "seed",   "params", "out"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) errors.push_back("unknown key '" + it.key() + "'");

  ExperimentConfig cfg;
  if (!j.contains("experiment") || !j["experiment"].is_string())
    errors.push_back("missing or non-string required key 'experiment'");
  else
    cfg.experiment = canonical_name(j["experiment"].get<std::string>());

  if (!j.contains("seed") || !j["seed"].is_number_integer())
    errors.push_back("missing or non-integer required key 'seed'");
  else
    cfg.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("n")) {
    if (!j["n"].is_number_integer() || j["n"].get<long>() < 1)
      errors.push_back("key 'n' must be a positive integer");
    else
      cfg.n = j["n"].get<int>();
  }
  if (j.contains("q") && j.contains("q_range"))
    errors.push_back("keys 'q' and 'q_range' are mutually exclusive");
  if (j.contains("q")) {
    if (!j["q"].is_number_integer() || j["q"].get<long>() < 1)
      errors.push_back("key 'q' must be a positive integer");
    else
      cfg.q_lo = cfg.q_hi = j["q"].get<int>();
  }
  if (j.contains("q_range")) {
    const auto& r = j["q_range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() ||
        !r[1].is_number_integer() || r[0].get<long>() < 1 ||
        r[1].get<long>() < r[0].get<long>()) {
      errors.push_back("key 'q_range' must be [lo, hi] with 1 <= lo <= hi");
    } else {
      cfg.q_lo = r[0].get<int>();
      cfg.q_hi = r[1].get<int>();
    }
  }
  if (j.contains("trials")) {
    if (!j["trials"].is_number_integer() || j["trials"].get<long>() < 1)
      errors.push_back("key 'trials' must be a positive integer");
    else
      cfg.trials = j["trials"].get<long>();
  }
  if (j.contains("out")) {
    if (!j["out"].is_string())
      errors.push_back("key 'out' must be a string path");
    else
      cfg.out = j["out"].get<std::string>();
  }
  if (j.contains("params")) {
    if (!j["params"].is_object())
      errors.push_back("key 'params' must be an object");
    else
      cfg.params = j["params"];
  }

  if (!errors.empty()) {
    std::string msg = "config schema violations:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  if (!runners().count(cfg.experiment))
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::vector<std::string> run_experiment(const ExperimentConfig& cfg) {
  const auto it = runners().find(canonical_name(cfg.experiment));
  if (it == runners().end())
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.n < 1) throw ConfigError("n must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");

  std::ofstream file;
  if (!cfg.out.empty()) {
    file.open(cfg.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open output file '" + cfg.out + "'");
  }
  std::ostream& os = cfg.out.empty() ? std::cout : file;

  Csv csv(os);
  csv.meta("kronquery experiment: " + cfg.experiment);
  csv.meta("config: " + config_echo(cfg).dump());
  if (cfg.timestamp) csv.meta("generated: " + iso8601_now());

  std::vector<std::string> summary;
  ExperimentConfig canon = cfg;
  canon.experiment = canonical_name(cfg.experiment);
  RunContext ctx{canon, csv, summary, SeededStream(cfg.seed, 0x6B71ULL)};
  it->second(ctx);
  return summary;
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : runners()) names.push_back(k);
  return names;
}

}  // namespace kronquery
