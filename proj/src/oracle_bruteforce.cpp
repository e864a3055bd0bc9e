#include "kronquery/oracle_bruteforce.hpp"

#include <algorithm>
#include <cmath>

#include "kronquery/parallel.hpp"
#include "kronquery/prng.hpp"

namespace kronquery {

ConcentrationReport concentration_probe(int n, int q, long trials, double tau_scale,
                                        const SeededStream& s, int threads) {
  if (n < 2) throw std::invalid_argument("concentration_probe: needs n >= 2");
  if (q < 1) throw std::invalid_argument("concentration_probe: needs q >= 1");
  if (trials < 1000) throw std::invalid_argument("concentration_probe: needs >= 1e3 trials");
  if (!(tau_scale > 0.0)) throw std::invalid_argument("concentration_probe: tau_scale > 0");

  struct Block {
    std::vector<double> sum_log;
    std::vector<long> hits;
    double sum_abs = 0.0;
  };
  const long blocks = blocked_block_count(trials);
  std::vector<Block> acc(static_cast<std::size_t>(blocks));
  // threshold for order k: prod_{i<=k} X_i >= tau_scale^{-k} / n^k
  const double log_thresh_per_mode = -std::log(tau_scale * static_cast<double>(n));

  blocked_parallel_for(trials, threads, [&](long lo, long hi, long block) {
    Block local;
    local.sum_log.assign(static_cast<std::size_t>(q), 0.0);
    local.hits.assign(static_cast<std::size_t>(q), 0);
    const auto sphere = FactorDistribution<double>::unit_sphere(n);
    for (long trial = lo; trial < hi; ++trial) {
      SeededStream ts = s.derive(static_cast<std::uint64_t>(trial));
      double running = 0.0;
      for (int k = 0; k < q; ++k) {
        const FactorVec<double> u = sample_factor(sphere, ts);
        // v is e_1 (x) ... (x) e_1; rotation invariance makes it generic
        const double coord = u(0);
        if (k == 0) local.sum_abs += std::abs(coord);
        running += std::log(coord * coord);
        local.sum_log[static_cast<std::size_t>(k)] += running;
        if (running >= static_cast<double>(k + 1) * log_thresh_per_mode)
          ++local.hits[static_cast<std::size_t>(k)];
      }
    }
    acc[static_cast<std::size_t>(block)] = std::move(local);
  });

  ConcentrationReport rep;
  rep.n = n;
  rep.q = q;
  rep.trials = trials;
  rep.tau_scale = tau_scale;
  rep.digamma_per_mode = digamma(0.5) - digamma(0.5 * n);
  rep.mean_log_x.assign(static_cast<std::size_t>(q), 0.0);
  rep.empirical_f.assign(static_cast<std::size_t>(q), 0.0);
  double sum_abs = 0.0;
  for (const auto& b : acc) {
    sum_abs += b.sum_abs;
    for (int k = 0; k < q; ++k) {
      rep.mean_log_x[static_cast<std::size_t>(k)] += b.sum_log[static_cast<std::size_t>(k)];
      rep.empirical_f[static_cast<std::size_t>(k)] +=
          static_cast<double>(b.hits[static_cast<std::size_t>(k)]);
    }
  }
  const double inv = 1.0 / static_cast<double>(trials);
  rep.mean_abs_per_mode = sum_abs * inv;
  for (int k = 0; k < q; ++k) {
    rep.mean_log_x[static_cast<std::size_t>(k)] *= inv;
    rep.empirical_f[static_cast<std::size_t>(k)] *= inv;
  }

  // least-squares decay of log f over orders 2..q (skipping empty cells)
  std::vector<double> xs, ys;
  for (int k = 2; k <= q; ++k) {
    const double f = rep.empirical_f[static_cast<std::size_t>(k - 1)];
    if (f > 0.0) {
      xs.push_back(static_cast<double>(k));
      ys.push_back(std::log(f));
    }
  }
  if (xs.size() >= 2) {
    const LinearFit fit = least_squares(xs, ys);
    rep.fitted_decay_rate = fit.slope;
    rep.fit_r_squared = fit.r_squared;
  }
  return rep;
}

DivergenceCheck gaussian_divergence_check(const Vec<double>& a, const Vec<double>& b,
                                          const Mat<double>& sigma, long mc_samples,
                                          const SeededStream& s) {
  const int dim = static_cast<int>(a.size());
  if (dim < 1 || dim > 8)
    throw std::invalid_argument("gaussian_divergence_check: dim must be in [1, 8]");
  if (b.size() != dim || sigma.rows() != dim || sigma.cols() != dim)
    throw std::invalid_argument("gaussian_divergence_check: shape mismatch");
  if (mc_samples < 1) throw std::invalid_argument("gaussian_divergence_check: samples >= 1");
  if (!sigma.isApprox(sigma.transpose(), 1e-12))
    throw std::invalid_argument("gaussian_divergence_check: covariance must be symmetric");
  const Eigen::LLT<Mat<double>> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gaussian_divergence_check: covariance must be SPD");
  const Mat<double> l = llt.matrixL();
  // whitened-mean cap keeps the MC second moment finite at desk scale
  const double wa = l.triangularView<Eigen::Lower>().solve(a).norm();
  const double wb = l.triangularView<Eigen::Lower>().solve(b).norm();
  if (wa > 1.5 + 1e-12 || wb > 1.5 + 1e-12)
    throw std::invalid_argument(
        "gaussian_divergence_check: ||Sigma^{-1/2} mean|| must be <= 1.5");

  const Vec<double> alpha = llt.solve(a);
  const Vec<double> beta = llt.solve(b);
  const double c0 = -0.5 * (a.dot(alpha) + b.dot(beta));
  const Vec<double> dir = alpha + beta;

  SeededStream ms = s.derive(0x6D63);
  double acc = 0.0;
  Vec<double> g(dim);
  for (long i = 0; i < mc_samples; ++i) {
    for (int j = 0; j < dim; ++j) g(j) = ms.next_gaussian();
    const Vec<double> z = l * g;
    acc += std::exp(c0 + z.dot(dir));
  }

  DivergenceCheck out;
  out.dim = dim;
  out.mean_a = a;
  out.mean_b = b;
  out.covariance = sigma;
  out.mc_samples = mc_samples;
  out.mc_value = acc / static_cast<double>(mc_samples);
  out.closed_form = std::exp(a.dot(beta));
  return out;
}

ProjectionProbeReport projection_probe(int n, int q_lo, int q_hi, int t, long trials,
                                       const SeededStream& s, int threads) {
  if (n < 2) throw std::invalid_argument("projection_probe: needs n >= 2");
  if (q_lo < 1 || q_hi < q_lo) throw std::invalid_argument("projection_probe: bad q range");
  if (t < 1 || t > 4096) throw std::invalid_argument("projection_probe: t out of range");
  if (trials < 1) throw std::invalid_argument("projection_probe: trials >= 1");

  ProjectionProbeReport rep;
  rep.n = n;
  rep.t = t;
  rep.trials = trials;

  for (int q = q_lo; q <= q_hi; ++q) {
    std::vector<double> scaled(static_cast<std::size_t>(trials), 0.0);
    const double nq = std::pow(static_cast<double>(n), q);
    const SeededStream qs = s.derive(static_cast<std::uint64_t>(q));
    blocked_parallel_for(trials, threads, [&](long lo, long hi, long) {
      const auto sphere = FactorDistribution<double>::unit_sphere(n);
      for (long trial = lo; trial < hi; ++trial) {
        SeededStream ts = qs.derive(static_cast<std::uint64_t>(trial));
        KronVector<double> probe = sample_kron(sphere, q, ts);
        QueryMatrix<double> v(probe.dim());
        v.append(probe);
        for (int c = 1; c < t; ++c) v.append(sample_kron(sphere, q, ts));
        const KronVector<double> u = sample_kron(sphere, q, ts);
        scaled[static_cast<std::size_t>(trial)] = projection_energy(v, u).total * nq;
      }
    });
    std::sort(scaled.begin(), scaled.end());
    const auto quantile = [&](double p) {
      const std::size_t idx = static_cast<std::size_t>(
          p * static_cast<double>(scaled.size() - 1) + 0.5);
      return scaled[std::min(idx, scaled.size() - 1)];
    };
    double mean = 0.0;
    for (double v2 : scaled) mean += v2;
    mean /= static_cast<double>(scaled.size());
    rep.orders.push_back(q);
    rep.median_scaled.push_back(quantile(0.5));
    rep.q90_scaled.push_back(quantile(0.9));
    rep.mean_scaled.push_back(mean);
  }
  return rep;
}

}  // namespace kronquery
