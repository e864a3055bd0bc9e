#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "kronquery/implicit_matrix.hpp"
#include "kronquery/query_matrix.hpp"
#include "kronquery/rand_kron.hpp"

namespace kronquery {

struct QueryBudget {
  int t_max = 1;
  bool stop_early = true;
};

class BudgetExceededError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Verdict { Zero, NonZero };

struct ZeroTestVerdict {
  Verdict verdict = Verdict::Zero;
  int queries_used = 0;
  std::optional<int> first_hit_index;
};

struct EstimateReport {
  double value = 0.0;
  int queries_used = 0;
  std::vector<double> per_query_values;
};

/// Ordered record of (query, response) pairs plus the running query matrix.
template <class S>
struct TranscriptEntry {
  KronVector<S> query;
  std::variant<S, Vec<S>> response;
};

template <class S>
struct QueryTranscript {
  std::vector<TranscriptEntry<S>> entries;
  QueryMatrix<S> queries;

  explicit QueryTranscript(std::size_t dim) : queries(dim) {}
};

/// Oracle access reduced to one scalar measurement per Kronecker query.
/// `zero_cutoff(v, rel)` is the absolute response magnitude below which a
/// measurement counts as zero at relative threshold `rel`; exact zeros stay
/// below it for every variant, and quadratic rank-one responses square the
/// operand-norm product so the implied test on the underlying linear
/// measurement is |<a,v>| > rel ||a|| ||v||.
template <class S>
class MeasurementOracle {
 public:
  virtual ~MeasurementOracle() = default;
  virtual S measure(const KronVector<S>& v) = 0;
  virtual double zero_cutoff(const KronVector<S>& v, double rel) const = 0;
  virtual int n() const = 0;
  virtual int q() const = 0;
};

/// Linear measurements <a, v_1 (x) ... (x) v_q> against a fixed vector.
template <class S>
class VectorOracle final : public MeasurementOracle<S> {
 public:
  VectorOracle(Vec<S> a, int n, int q) : dense_(std::move(a)), n_(n), q_(q) {
    KronVector<S> probe;
    probe.factors.assign(static_cast<std::size_t>(q), FactorVec<S>::Zero(n));
    if (static_cast<std::size_t>(dense_->size()) != probe.dim())
      throw std::invalid_argument("VectorOracle: a must have dimension n^q");
    norm_ = dense_->norm();
  }
  explicit VectorOracle(KronVector<S> a) : kron_(std::move(a)) {
    kron_->validate();
    n_ = kron_->n();
    q_ = kron_->q();
    norm_ = kron_norm(*kron_);
  }

  S measure(const KronVector<S>& v) override {
    if (kron_) return kron_bilinear(*kron_, v);
    return contract_dense_kron(*dense_, v);
  }
  double zero_cutoff(const KronVector<S>& v, double rel) const override {
    return rel * norm_ * kron_norm(v);
  }
  int n() const override { return n_; }
  int q() const override { return q_; }

 private:
  std::optional<Vec<S>> dense_;
  std::optional<KronVector<S>> kron_;
  int n_ = 0, q_ = 0;
  double norm_ = 0.0;
};

/// Quadratic measurements v^T A v against an implicit matrix. For a rank-one
/// A = a a^T the cutoff is (rel ||a|| ||v||)^2, the squared threshold of the
/// linear measurement underneath; general variants use rel ||A||_F ||v||^2.
template <class S>
class MatrixOracle final : public MeasurementOracle<S> {
 public:
  MatrixOracle(ImplicitMatrix<S> a, int n) : a_(std::move(a)), n_(n) {
    q_ = infer_order(a_.dim(), n);
    if (const auto* r1 = std::get_if<RankOneMatrix<S>>(&a_.node())) {
      rank_one_norm_ = std::holds_alternative<KronVector<S>>(r1->a)
                           ? kron_norm(std::get<KronVector<S>>(r1->a))
                           : std::get<Vec<S>>(r1->a).norm();
    } else {
      frob_ = frobenius_norm(a_);
    }
  }

  S measure(const KronVector<S>& v) override { return vec_mat_vec(a_, v); }
  double zero_cutoff(const KronVector<S>& v, double rel) const override {
    if (rank_one_norm_) {
      const double linear = rel * *rank_one_norm_ * kron_norm(v);
      return linear * linear;
    }
    return rel * frob_ * kron_norm(v) * kron_norm(v);
  }
  int n() const override { return n_; }
  int q() const override { return q_; }
  const ImplicitMatrix<S>& matrix() const { return a_; }

 private:
  ImplicitMatrix<S> a_;
  int n_ = 0, q_ = 0;
  std::optional<double> rank_one_norm_;
  double frob_ = 0.0;
};

/// Full contractions <T, u_1 (x) ... (x) u_q> against a dense tensor, the
/// measurement model of tensor zero testing.
template <class S>
class TensorOracle final : public MeasurementOracle<S> {
 public:
  explicit TensorOracle(DenseTensor<S> t) : t_(std::move(t)) {
    t_.validate();
    norm_ = tensor_norm(t_);
  }
  S measure(const KronVector<S>& v) override { return contract_full(t_, v); }
  double zero_cutoff(const KronVector<S>& v, double rel) const override {
    return rel * norm_ * kron_norm(v);
  }
  int n() const override { return t_.n; }
  int q() const override { return t_.q; }

 private:
  DenseTensor<S> t_;
  double norm_ = 0.0;
};

namespace detail {

template <class S>
void check_alphabet_closure(const FactorDistribution<S>& d, const KronVector<S>& v) {
  const Alphabet* a = nullptr;
  static const Alphabet pm1 = Alphabet::pm1();
  static const Alphabet pm1i = Alphabet::pm1i();
  if (d.kind == FactorKind::AlphabetIID)
    a = &d.alphabet;
  else if (d.kind == FactorKind::Rademacher)
    a = &pm1;
  else if (d.kind == FactorKind::ComplexRademacher)
    a = &pm1i;
  if (!a) return;
  for (const auto& f : v.factors)
    for (Eigen::Index i = 0; i < f.size(); ++i)
      if (!a->contains(Complex(std::real(f(i)), std::imag(f(i)))))
        throw std::logic_error("alphabet-restricted query left its alphabet");
}

}  // namespace detail

/// Issues up to m i.i.d.-factor Kronecker measurements and reports NonZero on
/// the first response with |w| above the relative zero threshold. Threshold
/// crossings are the only signal; exact zeros never cross.
template <class S>
ZeroTestVerdict zero_test(MeasurementOracle<S>& oracle, const FactorDistribution<S>& d,
                          int m, SeededStream s, double zero_threshold = 1e-12) {
  if (m < 1) throw std::invalid_argument("zero_test: m must be >= 1");
  ZeroTestVerdict out;
  for (int j = 0; j < m; ++j) {
    const KronVector<S> v = sample_kron(d, oracle.q(), s);
    detail::check_alphabet_closure(d, v);
    const S w = oracle.measure(v);
    out.queries_used = j + 1;
    if (std::abs(w) > oracle.zero_cutoff(v, zero_threshold)) {
      out.verdict = Verdict::NonZero;
      out.first_hit_index = j;
      return out;
    }
  }
  out.verdict = Verdict::Zero;
  return out;
}

/// ceil(2 * Q^{-q}) measurements suffice for a 3/4-probability zero tester
/// built from a per-mode detection value Q.
inline long long required_queries_upper(double q_value, int q) {
  if (!(q_value > 0.0 && q_value <= 1.0))
    throw std::invalid_argument("required_queries_upper: Q must lie in (0, 1]");
  if (q < 0) throw std::invalid_argument("required_queries_upper: q must be >= 0");
  const double raw = 2.0 * std::pow(1.0 / q_value, q);
  const double rounded = std::nearbyint(raw);
  const double val = std::abs(raw - rounded) < 1e-9 ? rounded : std::ceil(raw);
  return static_cast<long long>(val);
}

namespace detail {

/// Per-query rescale that keeps E[value] = tr(A) across normalizations:
/// unit-sphere factors carry n^q, everything else must already be isotropic.
template <class S>
double isotropic_rescale(const FactorDistribution<S>& d, int q) {
  switch (d.kind) {
    case FactorKind::UnitSphere:
      return std::pow(static_cast<double>(d.n), q);
    case FactorKind::SqrtNSphere:
    case FactorKind::Gaussian:
    case FactorKind::Rademacher:
      return 1.0;
    case FactorKind::AlphabetIID: {
      Complex mean(0, 0);
      double second = 0.0;
      for (const auto& c : d.alphabet.symbols) {
        mean += c;
        second += std::norm(c);
      }
      mean /= static_cast<double>(d.alphabet.size());
      second /= static_cast<double>(d.alphabet.size());
      if (std::abs(mean) > 1e-12 || std::abs(second - 1.0) > 1e-12)
        throw ConfigError("trace/l2 estimation requires an isotropic factor distribution");
      return 1.0;
    }
    default:
      throw ConfigError("trace/l2 estimation requires an isotropic factor distribution");
  }
}

}  // namespace detail

/// Hutchinson estimator restricted to the Kronecker oracle:
/// (1/t) sum_i v^(i)T A v^(i) with Khatri-Rao queries v^(i) = (x)_j v_j^(i).
/// Unbiased for tr(A) whenever the factor distribution is isotropic.
inline EstimateReport hutchinson_trace(const ImplicitMatrix<double>& a,
                                       const FactorDistribution<double>& d, int t,
                                       SeededStream s) {
  if (t < 1) throw std::invalid_argument("hutchinson_trace: t must be >= 1");
  const int q = infer_order(a.dim(), d.n);
  const double rescale = detail::isotropic_rescale(d, q);
  EstimateReport rep;
  rep.per_query_values.reserve(static_cast<std::size_t>(t));
  double acc = 0.0;
  for (int i = 0; i < t; ++i) {
    const KronVector<double> v = sample_kron(d, q, s);
    const double val = vec_mat_vec(a, v) * rescale;
    rep.per_query_values.push_back(val);
    acc += val;
  }
  rep.queries_used = t;
  rep.value = acc / static_cast<double>(t);
  return rep;
}

/// Squared-norm estimate from linear Kronecker measurements w_i = <a, v^(i)>:
/// (1/t) sum_i w_i^2, unbiased for ||a||^2 under isotropic factors.
inline EstimateReport l2_estimate(const Vec<double>& a, const FactorDistribution<double>& d,
                                  int t, SeededStream s) {
  if (t < 1) throw std::invalid_argument("l2_estimate: t must be >= 1");
  const int q = infer_order(static_cast<std::size_t>(a.size()), d.n);
  const double rescale = detail::isotropic_rescale(d, q);
  EstimateReport rep;
  rep.per_query_values.reserve(static_cast<std::size_t>(t));
  double acc = 0.0;
  for (int i = 0; i < t; ++i) {
    const KronVector<double> v = sample_kron(d, q, s);
    const double w = contract_dense_kron(a, v);
    const double val = w * w * rescale;
    rep.per_query_values.push_back(val);
    acc += val;
  }
  rep.queries_used = t;
  rep.value = acc / static_cast<double>(t);
  return rep;
}

/// Baseline transcript policy: declare the planted arm when any response norm
/// exceeds `threshold` times its query norm.
template <class S>
int threshold_distinguisher(const QueryTranscript<S>& transcript, double threshold) {
  if (transcript.entries.empty())
    throw std::invalid_argument("threshold_distinguisher: empty transcript");
  for (const auto& e : transcript.entries) {
    const double qn = kron_norm(e.query);
    const double rn = std::holds_alternative<S>(e.response)
                          ? std::abs(std::get<S>(e.response))
                          : std::get<Vec<S>>(e.response).norm();
    if (rn > threshold * qn) return 1;
  }
  return 0;
}

}  // namespace kronquery
