#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kronquery/estimators.hpp"
#include "kronquery/hard_instances.hpp"
#include "kronquery/numerics.hpp"
#include "kronquery/oracle_bruteforce.hpp"

namespace py = pybind11;
using namespace kronquery;

namespace {

template <class S>
KronVector<S> kron_from_list(const std::vector<Vec<S>>& factors) {
  KronVector<S> v;
  v.factors = factors;
  v.validate();
  return v;
}

template <class S>
DenseTensor<S> tensor_from_array(const py::array& arr) {
  const py::buffer_info info = py::array_t<S, py::array::c_style | py::array::forcecast>(arr)
                                   .request();
  DenseTensor<S> t;
  t.q = static_cast<int>(info.ndim);
  t.n = t.q > 0 ? static_cast<int>(info.shape[0]) : 1;
  for (py::ssize_t d = 0; d < info.ndim; ++d)
    if (info.shape[d] != t.n)
      throw std::invalid_argument("tensor must have equal extents along every mode");
  const S* data = static_cast<const S*>(info.ptr);
  t.entries = Eigen::Map<const Vec<S>>(data, static_cast<Eigen::Index>(info.size));
  t.validate();
  return t;
}

template <class S>
py::array tensor_to_array(const DenseTensor<S>& t) {
  std::vector<py::ssize_t> shape(static_cast<std::size_t>(t.q),
                                 static_cast<py::ssize_t>(t.n));
  if (t.q == 0) shape = {};
  py::array_t<S> out(shape);
  std::copy(t.entries.data(), t.entries.data() + t.entries.size(),
            static_cast<S*>(out.request().ptr));
  return out;
}

FactorDistribution<double> real_dist(const std::string& name, int n) {
  if (name == "rademacher") return FactorDistribution<double>::rademacher(n);
  if (name == "gaussian") return FactorDistribution<double>::gaussian(n);
  if (name == "unit-sphere") return FactorDistribution<double>::unit_sphere(n);
  if (name == "sqrtn-sphere") return FactorDistribution<double>::sqrt_n_sphere(n);
  throw ConfigError("unknown factor distribution '" + name + "'");
}

py::dict report_to_dict(const EstimateReport& rep) {
  py::dict d;
  d["value"] = rep.value;
  d["queries_used"] = rep.queries_used;
  d["per_query_values"] = rep.per_query_values;
  return d;
}

}  // namespace

PYBIND11_MODULE(_kronquery, m) {
  m.doc() = "Kronecker matrix-vector query model: factorized oracles, estimators, "
            "hard instances, and exact game-value certificates";

  m.def(
      "kron_inner",
      [](const std::vector<Vec<double>>& u, const std::vector<Vec<double>>& v) {
        return kron_inner(kron_from_list(u), kron_from_list(v));
      },
      py::arg("u"), py::arg("v"),
      "Inner product of two Kronecker vectors given as factor lists; O(nq).");
  m.def(
      "kron_inner",
      [](const std::vector<Vec<Complex>>& u, const std::vector<Vec<Complex>>& v) {
        return kron_inner(kron_from_list(u), kron_from_list(v));
      },
      py::arg("u"), py::arg("v"));

  m.def(
      "kron_expand",
      [](const std::vector<Vec<double>>& factors) {
        return kron_expand(kron_from_list(factors));
      },
      py::arg("factors"), "Dense n^q expansion of a factor list.");
  m.def(
      "kron_expand",
      [](const std::vector<Vec<Complex>>& factors) {
        return kron_expand(kron_from_list(factors));
      },
      py::arg("factors"));

  m.def(
      "modal_product",
      [](const py::array& tensor, int mode, const Vec<double>& w) {
        return tensor_to_array(modal_product(tensor_from_array<double>(tensor), mode, w));
      },
      py::arg("tensor"), py::arg("mode"), py::arg("w"),
      "Mode-`mode` (1-based) contraction of an order-q tensor against w.");

  m.def(
      "contract_full",
      [](const py::array& tensor, const std::vector<Vec<double>>& factors) {
        return contract_full(tensor_from_array<double>(tensor), kron_from_list(factors));
      },
      py::arg("tensor"), py::arg("factors"),
      "Full contraction <T, u_1 (x) ... (x) u_q>.");

  m.def(
      "condition_number",
      [](const Mat<double>& v) {
        QueryMatrix<double> qm(static_cast<std::size_t>(v.rows()));
        for (Eigen::Index c = 0; c < v.cols(); ++c) qm.append(Vec<double>(v.col(c)));
        return qm.condition_number();
      },
      py::arg("columns"),
      "sigma_max/sigma_min of a column matrix (inf when rank-deficient).");

  m.def(
      "projection_energy",
      [](const Mat<double>& v, const std::vector<Vec<double>>& u) {
        QueryMatrix<double> qm(static_cast<std::size_t>(v.rows()));
        for (Eigen::Index c = 0; c < v.cols(); ++c) qm.append(Vec<double>(v.col(c)));
        const ProjectionEnergy pe = projection_energy(qm, kron_from_list(u));
        py::dict d;
        d["per_column"] = pe.per_column;
        d["total"] = pe.total;
        d["dropped"] = pe.dropped;
        return d;
      },
      py::arg("columns"), py::arg("u_factors"),
      "Per-column squared projections of a Kronecker vector onto span(V).");

  m.def(
      "sample_kron",
      [](const std::string& dist, int n, int q, std::uint64_t seed,
         std::uint64_t stream_id) {
        SeededStream s(seed, stream_id);
        const KronVector<double> v = sample_kron(real_dist(dist, n), q, s);
        return v.factors;
      },
      py::arg("dist"), py::arg("n"), py::arg("q"), py::arg("seed"),
      py::arg("stream_id") = 0,
      "q i.i.d. factor draws (rademacher | gaussian | unit-sphere | sqrtn-sphere).");

  m.def(
      "hutchinson_trace",
      [](const Mat<double>& a, const std::string& dist, int n, int t,
         std::uint64_t seed) {
        const auto mat = ImplicitMatrix<double>::explicit_dense(a);
        return report_to_dict(
            hutchinson_trace(mat, real_dist(dist, n), t, SeededStream(seed, 0)));
      },
      py::arg("a"), py::arg("dist"), py::arg("n"), py::arg("t"), py::arg("seed"),
      "Khatri-Rao Hutchinson trace estimate of a dense matrix.");

  m.def(
      "l2_estimate",
      [](const Vec<double>& a, const std::string& dist, int n, int t,
         std::uint64_t seed) {
        return report_to_dict(l2_estimate(a, real_dist(dist, n), t, SeededStream(seed, 0)));
      },
      py::arg("a"), py::arg("dist"), py::arg("n"), py::arg("t"), py::arg("seed"),
      "Squared-norm estimate from linear Kronecker measurements.");

  m.def(
      "zero_test_dense",
      [](const Mat<double>& a, const std::string& dist, int n, int mm,
         std::uint64_t seed) {
        MatrixOracle<double> oracle(ImplicitMatrix<double>::explicit_dense(a), n);
        const ZeroTestVerdict v =
            zero_test(oracle, real_dist(dist, n), mm, SeededStream(seed, 0));
        py::dict d;
        d["verdict"] = v.verdict == Verdict::NonZero ? "NonZero" : "Zero";
        d["queries_used"] = v.queries_used;
        return d;
      },
      py::arg("a"), py::arg("dist"), py::arg("n"), py::arg("m"), py::arg("seed"),
      "Zero test of a dense matrix through quadratic Kronecker measurements.");

  m.def(
      "zero_test_hard_instance",
      [](const std::string& alphabet, int n, int q, const std::string& dist, int mm,
         std::uint64_t seed) {
        const Alphabet alpha = Alphabet::parse(alphabet);
        SeededStream s(seed, 0);
        if (alpha.is_real()) {
          MatrixOracle<double> oracle(
              make_trace_hard_instance<double>(alpha, n, q, s.derive(1)), n);
          const auto v = zero_test(oracle, real_dist(dist, n), mm, s.derive(2));
          return std::string(v.verdict == Verdict::NonZero ? "NonZero" : "Zero");
        }
        MatrixOracle<Complex> oracle(
            make_trace_hard_instance<Complex>(alpha, n, q, s.derive(1)), n);
        const auto d = dist == "complex-rademacher"
                           ? FactorDistribution<Complex>::complex_rademacher(n)
                           : FactorDistribution<Complex>::gaussian(n);
        const auto v = zero_test(oracle, d, mm, s.derive(2));
        return std::string(v.verdict == Verdict::NonZero ? "NonZero" : "Zero");
      },
      py::arg("alphabet"), py::arg("n"), py::arg("q"), py::arg("dist"), py::arg("m"),
      py::arg("seed"),
      "Zero test against a fresh adversarial rank-one instance.");

  m.def(
      "game_values",
      [](const std::string& alphabet, int n) {
        const Alphabet alpha = Alphabet::parse(alphabet);
        ExactPmf adversary;
        if (!alpha.is_real()) {
          adversary = adversary_complex_n2_pmf();
        } else if (n == 2 && alpha.size() == 2) {
          adversary = adversary_pm1_n2_pmf();
        } else {
          adversary = adversary_support2_pmf(n);
        }
        const GameValueReport p = alphabet_worst_case(adversary, alpha, n);
        std::vector<ExactVector> candidates;
        const ExactVector syms = exact_alphabet(alpha);
        std::size_t total = 1;
        for (int i = 0; i < n; ++i) total *= syms.size();
        std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
        for (std::size_t c = 0; c < total; ++c) {
          ExactVector v(static_cast<std::size_t>(n));
          for (int i = 0; i < n; ++i)
            v[static_cast<std::size_t>(i)] = syms[idx[static_cast<std::size_t>(i)]];
          if (!std::all_of(v.begin(), v.end(),
                           [](const ExactComplex& x) { return x.is_zero(); }))
            candidates.push_back(std::move(v));
          for (int i = n - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < syms.size()) break;
            idx[static_cast<std::size_t>(i)] = 0;
          }
        }
        const GameValueReport qv = iid_alphabet_min_search(alpha, n, candidates);
        py::dict d;
        d["p_certificate"] = py::make_tuple(p.detection_prob.num, p.detection_prob.den);
        d["q_certificate"] = py::make_tuple(qv.detection_prob.num, qv.detection_prob.den);
        d["p_value"] = p.detection_prob.to_double();
        d["q_value"] = qv.detection_prob.to_double();
        return d;
      },
      py::arg("alphabet"), py::arg("n"),
      "Exact (numerator, denominator) certificates for the P and Q game values.");

  m.def(
      "concentration_probe",
      [](int n, int q, long trials, double tau_scale, std::uint64_t seed, int threads) {
        const ConcentrationReport r =
            concentration_probe(n, q, trials, tau_scale, SeededStream(seed, 0), threads);
        py::dict d;
        d["mean_log_x"] = r.mean_log_x;
        d["empirical_f"] = r.empirical_f;
        d["digamma_per_mode"] = r.digamma_per_mode;
        d["fitted_decay_rate"] = r.fitted_decay_rate;
        d["fit_r_squared"] = r.fit_r_squared;
        return d;
      },
      py::arg("n"), py::arg("q"), py::arg("trials"), py::arg("tau_scale") = 1.0,
      py::arg("seed") = 0, py::arg("threads") = 1,
      "Concentration of <u, v>^2 for Kronecker products of unit-sphere factors.");

  m.def(
      "divergence_check",
      [](const Vec<double>& a, const Vec<double>& b, const Mat<double>& sigma,
         long samples, std::uint64_t seed) {
        const DivergenceCheck c =
            gaussian_divergence_check(a, b, sigma, samples, SeededStream(seed, 0));
        return py::make_tuple(c.mc_value, c.closed_form);
      },
      py::arg("a"), py::arg("b"), py::arg("sigma"), py::arg("samples"), py::arg("seed"),
      "(mc_value, closed_form) for the Gaussian density-ratio identity.");

  m.def(
      "kl_nonadaptive",
      [](const Mat<double>& v, const Vec<double>& u, double lambda) {
        QueryMatrix<double> qm(static_cast<std::size_t>(v.rows()));
        for (Eigen::Index c = 0; c < v.cols(); ++c) qm.append(Vec<double>(v.col(c)));
        const KlDivergence kl = kl_nonadaptive(qm, u, lambda);
        py::dict d;
        d["kl"] = kl.kl;
        d["bound"] = kl.bound;
        d["kappa"] = kl.kappa;
        return d;
      },
      py::arg("columns"), py::arg("u"), py::arg("lambda_"),
      "Closed-form KL divergence of a non-adaptive sketch on the planted pair.");

  m.def("tv_upper_from_kl", &tv_upper_from_kl, py::arg("kl"),
        "Pinsker bound min(1, sqrt(KL/2)).");
  m.def("required_queries_upper", &required_queries_upper, py::arg("q_value"),
        py::arg("q"), "ceil(2 * Q^{-q}) zero-testing query budget.");
  m.def("digamma", &digamma, py::arg("x"));
  m.def(
      "wilson_interval",
      [](long successes, long trials, double z) {
        const WilsonInterval w = wilson_interval(successes, trials, z);
        return py::make_tuple(w.center, w.halfwidth);
      },
      py::arg("successes"), py::arg("trials"), py::arg("z") = 1.959964,
      "(center, halfwidth) of the Wilson score interval.");

  m.attr("__version__") = "0.1.0";
}
