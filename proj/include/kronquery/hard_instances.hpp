#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <variant>

#include "kronquery/estimators.hpp"
#include "kronquery/numerics.hpp"

namespace kronquery {

/// Spiked-Wigner arm: (G+G^T)/sqrt(2D) plus lambda * u u^T when coin = 1, with
/// u the Kronecker product of i.i.d. unit-sphere factors. Both arms draw the
/// same wigner_seed and the same u from `s`, so the pair differs only in the
/// spike.
inline ImplicitMatrix<double> make_spiked_pair(int n, int q, double lambda, int coin,
                                               const SeededStream& s,
                                               std::size_t cap = kDefaultCap) {
  if (coin != 0 && coin != 1)
    throw std::invalid_argument("make_spiked_pair: coin must be 0 or 1");
  SeededStream ws = s.derive(0x4757);
  SeededStream us = s.derive(0x5553);
  const std::uint64_t wigner_seed = ws.next_u64();
  const auto sphere = FactorDistribution<double>::unit_sphere(n);
  KronVector<double> u = sample_kron(sphere, q, us);
  const double lam = coin == 1 ? lambda : 0.0;
  return ImplicitMatrix<double>::spiked_wigner(n, q, lam, std::move(u), wigner_seed, cap);
}

struct KlDivergence {
  double kl = 0.0;     ///< (lambda^2/2) u^T V (V^T V)^{-1} V^T u
  double bound = 0.0;  ///< (lambda^2/2) kappa^2 ||V^T u||^2
  double kappa = 0.0;
};

/// Closed-form KL divergence between the two response distributions of a
/// non-adaptive sketch V on the planted-vector pair, together with the
/// conditioning upper bound it is dominated by.
inline KlDivergence kl_nonadaptive(const QueryMatrix<double>& v, const Vec<double>& u,
                                   double lambda) {
  if (v.count() < 1) throw std::invalid_argument("kl_nonadaptive: empty query matrix");
  const double kappa = v.condition_number();
  if (!std::isfinite(kappa))
    throw std::invalid_argument("kl_nonadaptive: V must have full column rank");
  const Vec<double> s = v.dots(u);
  const Eigen::LDLT<Mat<double>> ldlt(v.gram());
  const Vec<double> g_inv_s = ldlt.solve(s);
  KlDivergence out;
  out.kl = 0.5 * lambda * lambda * s.dot(g_inv_s);
  out.bound = 0.5 * lambda * lambda * kappa * kappa * s.squaredNorm();
  out.kappa = kappa;
  return out;
}

/// Pinsker: D_TV <= sqrt(KL/2), clamped to 1.
inline double tv_upper_from_kl(double kl) {
  if (kl < 0.0) throw std::invalid_argument("tv_upper_from_kl: KL must be >= 0");
  return std::min(1.0, std::sqrt(kl / 2.0));
}

/// Rank-one trace hard instance A = x x^T with x the q-fold Kronecker product
/// of draws from the adversarial distribution matching (alphabet, n):
/// {+-1} at n=2, support-2 pairs for any n, {+-1,+-i} at n=2 (complex).
template <class S>
ImplicitMatrix<S> make_trace_hard_instance(const Alphabet& alphabet, int n, int q,
                                           SeededStream s) {
  alphabet.validate();
  if (q < 1) throw std::invalid_argument("make_trace_hard_instance: q must be >= 1");
  KronVector<S> x;
  x.factors.reserve(static_cast<std::size_t>(q));
  if constexpr (is_complex_scalar<S>::value) {
    const Alphabet pm1i = Alphabet::pm1i();
    const bool matches = n == 2 && alphabet.size() == 4 &&
                         std::all_of(alphabet.symbols.begin(), alphabet.symbols.end(),
                                     [&](const Complex& c) { return pm1i.contains(c); });
    if (!matches)
      throw std::invalid_argument(
          "make_trace_hard_instance: complex adversary supports ({+-1,+-i}, n=2) only");
    for (int i = 0; i < q; ++i) x.factors.push_back(adversary_complex_n2(s));
  } else {
    if (!alphabet.is_real())
      throw std::invalid_argument("make_trace_hard_instance: real scalar, complex alphabet");
    if (n == 2 && alphabet.size() == 2 && alphabet.contains(Complex(1, 0)) &&
        alphabet.contains(Complex(-1, 0))) {
      for (int i = 0; i < q; ++i) x.factors.push_back(adversary_pm1_n2(s));
    } else if (n >= 2) {
      for (int i = 0; i < q; ++i) x.factors.push_back(adversary_support2(n, s));
    } else {
      throw std::invalid_argument("make_trace_hard_instance: unsupported (alphabet, n)");
    }
  }
  return ImplicitMatrix<S>::rank_one(std::move(x));
}

// --- distinguishing-game harness ---

struct PlantedVectorFamily {
  int n = 2;
  int q = 1;
  double eps = 0.01;
};

struct SpikedWignerFamily {
  int n = 2;
  int q = 1;
  double lambda = 0.0;
};

using GameFamily = std::variant<PlantedVectorFamily, SpikedWignerFamily>;

/// Per-trial oracle handed to a distinguisher: serves linear measurements for
/// planted-vector instances and (Kronecker or unrestricted dense) products for
/// matrix instances, while recording the transcript, the query matrix, and the
/// query count against the budget. Dense queries enter the query matrix but
/// not the Kronecker transcript.
class GameOracle {
 public:
  GameOracle(Vec<double> a, int n, int q, QueryBudget budget)
      : vector_(std::move(a)),
        n_(n),
        q_(q),
        dim_(static_cast<std::size_t>(vector_->size())),
        budget_(budget),
        transcript_(dim_) {}

  GameOracle(ImplicitMatrix<double> a, int n, int q, QueryBudget budget)
      : matrix_(std::move(a)),
        n_(n),
        q_(q),
        dim_(matrix_->dim()),
        budget_(budget),
        transcript_(dim_) {}

  bool is_matrix() const { return matrix_.has_value(); }
  int n() const { return n_; }
  int q() const { return q_; }
  std::size_t dim() const { return dim_; }
  int queries_used() const { return used_; }

  double measure(const KronVector<double>& v) {
    if (!vector_) throw std::invalid_argument("GameOracle: not a vector instance");
    charge();
    const double w = contract_dense_kron(*vector_, v);
    transcript_.queries.append(v);
    transcript_.entries.push_back({v, w});
    return w;
  }

  Vec<double> matvec(const KronVector<double>& v) {
    if (!matrix_) throw std::invalid_argument("GameOracle: not a matrix instance");
    charge();
    Vec<double> w = kronquery::matvec(*matrix_, v);
    transcript_.queries.append(v);
    transcript_.entries.push_back({v, w});
    return w;
  }

  Vec<double> matvec_dense(const Vec<double>& x) {
    if (!matrix_) throw std::invalid_argument("GameOracle: not a matrix instance");
    charge();
    transcript_.queries.append(x);
    return kronquery::matvec_dense(*matrix_, x);
  }

  const QueryTranscript<double>& transcript() const { return transcript_; }

  /// Condition number of everything queried so far; NaN when nothing was.
  double kappa() const {
    if (transcript_.queries.count() == 0) return std::numeric_limits<double>::quiet_NaN();
    return transcript_.queries.condition_number();
  }

 private:
  void charge() {
    if (used_ >= budget_.t_max)
      throw BudgetExceededError("game oracle: query budget exhausted");
    ++used_;
  }

  std::optional<Vec<double>> vector_;
  std::optional<ImplicitMatrix<double>> matrix_;
  int n_ = 0, q_ = 0;
  std::size_t dim_ = 0;
  QueryBudget budget_;
  int used_ = 0;
  QueryTranscript<double> transcript_;
};

using Distinguisher = std::function<int(GameOracle&, SeededStream&)>;

struct GameSpec {
  GameFamily family;
  long trials = 100;
  Distinguisher algorithm;
  QueryBudget budget;
};

struct GameReport {
  double success_rate = 0.0;
  double wilson_halfwidth = 0.0;
  double mean_queries = 0.0;
  double kappa_max = 0.0;  ///< max observed over trials that issued queries
  long trials = 0;
  long aborted = 0;  ///< budget overruns, scored as failures
};

/// Plays the distinguishing game: per trial flip a fair coin, build the
/// instance arm, let the algorithm query within budget, and score its guess.
/// Trials own independent streams, so results are identical for any thread
/// count. A budget overrun aborts the trial and counts as a failure.
inline GameReport run_game(const GameSpec& spec, const SeededStream& base, int threads = 1) {
  if (spec.trials < 1) throw std::invalid_argument("run_game: trials must be >= 1");
  if (!spec.algorithm) throw std::invalid_argument("run_game: missing algorithm");

  struct TrialOutcome {
    bool correct = false;
    bool aborted = false;
    int queries = 0;
    double kappa = std::numeric_limits<double>::quiet_NaN();
  };

  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.trials));
  const auto run_trial = [&](long trial) {
    SeededStream ts = base.derive(static_cast<std::uint64_t>(trial));
    const int coin = ts.next_bit() ? 1 : 0;
    SeededStream instance_stream = ts.derive(1);
    SeededStream algo_stream = ts.derive(2);

    auto oracle = std::visit(
        [&](const auto& fam) -> GameOracle {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PlantedVectorFamily>) {
            PlantedVector pv = make_planted_vector(fam.n, fam.q, fam.eps, coin, instance_stream);
            return GameOracle(std::move(pv.a), fam.n, fam.q, spec.budget);
          } else {
            ImplicitMatrix<double> a =
                make_spiked_pair(fam.n, fam.q, fam.lambda, coin, instance_stream);
            return GameOracle(std::move(a), fam.n, fam.q, spec.budget);
          }
        },
        spec.family);

    TrialOutcome o;
    try {
      const int guess = spec.algorithm(oracle, algo_stream);
      o.correct = guess == coin;
    } catch (const BudgetExceededError&) {
      o.aborted = true;
      o.correct = false;
    }
    o.queries = oracle.queries_used();
    o.kappa = oracle.kappa();
    outcomes[static_cast<std::size_t>(trial)] = o;
  };

  if (threads <= 1 || spec.trials < 2) {
    for (long i = 0; i < spec.trials; ++i) run_trial(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<long> next{0};
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const long i = next.fetch_add(1);
          if (i >= spec.trials) return;
          run_trial(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  GameReport rep;
  rep.trials = spec.trials;
  long correct = 0;
  double qsum = 0.0;
  for (const auto& o : outcomes) {
    correct += o.correct ? 1 : 0;
    rep.aborted += o.aborted ? 1 : 0;
    qsum += o.queries;
    if (!std::isnan(o.kappa)) rep.kappa_max = std::max(rep.kappa_max, o.kappa);
  }
  rep.success_rate = static_cast<double>(correct) / static_cast<double>(spec.trials);
  rep.wilson_halfwidth = wilson_interval(correct, spec.trials).halfwidth;
  rep.mean_queries = qsum / static_cast<double>(spec.trials);
  return rep;
}

// --- baseline distinguishers ---

inline Distinguisher blind_policy(int guess) {
  return [guess](GameOracle&, SeededStream&) { return guess; };
}

/// Issues `queries` Gaussian-Kron queries and applies threshold_distinguisher
/// to the transcript.
inline Distinguisher threshold_policy(int queries, double threshold) {
  return [queries, threshold](GameOracle& o, SeededStream& s) {
    const auto d = FactorDistribution<double>::gaussian(o.n());
    for (int i = 0; i < queries; ++i) {
      const KronVector<double> v = sample_kron(d, o.q(), s);
      if (o.is_matrix())
        o.matvec(v);
      else
        o.measure(v);
    }
    return threshold_distinguisher(o.transcript(), threshold);
  };
}

/// Unrestricted baseline: dense power iteration, declaring the spiked arm when
/// the final norm estimate exceeds `threshold`. Not a Kronecker algorithm;
/// used to confirm the instances are distinguishable outside the restriction.
inline Distinguisher power_iteration_policy(int iters, double threshold) {
  return [iters, threshold](GameOracle& o, SeededStream& s) {
    Vec<double> x(static_cast<Eigen::Index>(o.dim()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = s.next_gaussian();
    x.normalize();
    double estimate = 0.0;
    for (int k = 0; k < iters; ++k) {
      Vec<double> y = o.matvec_dense(x);
      estimate = y.norm();
      if (estimate == 0.0) break;
      x = y / estimate;
    }
    return estimate > threshold ? 1 : 0;
  };
}

}  // namespace kronquery
