#pragma once

#include <numeric>
#include <string>

#include "kronquery/numerics.hpp"
#include "kronquery/query_matrix.hpp"
#include "kronquery/rand_kron.hpp"

namespace kronquery {

/// Exact rational with int64 numerator/denominator (den > 0, reduced).
/// Intermediates go through 128-bit arithmetic, which is ample for the
/// desk-scale enumerations here (denominators divide support-size products).
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d) : num(n), den(d) { normalize(); }
  static Rational integer(long long n) { return Rational(n, 1); }

  void normalize() {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  bool is_zero() const { return num == 0; }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    const __int128 n = static_cast<__int128>(a.num) * b.den +
                       static_cast<__int128>(b.num) * a.den;
    const __int128 d = static_cast<__int128>(a.den) * b.den;
    return reduce128(n, d);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return a + Rational(-b.num, b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    const __int128 n = static_cast<__int128>(a.num) * b.num;
    const __int128 d = static_cast<__int128>(a.den) * b.den;
    return reduce128(n, d);
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator<=(const Rational& a, const Rational& b) {
    return a == b || a < b;
  }

 private:
  static Rational reduce128(__int128 n, __int128 d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    if (n > std::numeric_limits<long long>::max() || n < std::numeric_limits<long long>::min() ||
        d > std::numeric_limits<long long>::max())
      throw std::overflow_error("Rational: overflow");
    Rational r;
    r.num = static_cast<long long>(n);
    r.den = static_cast<long long>(d);
    return r;
  }
};

/// Exact Gaussian-rational scalar (re + im*i).
struct ExactComplex {
  Rational re;
  Rational im;

  ExactComplex() = default;
  ExactComplex(Rational r, Rational i) : re(r), im(i) {}
  static ExactComplex integer(long long r, long long i = 0) {
    return ExactComplex(Rational::integer(r), Rational::integer(i));
  }

  bool is_zero() const { return re.is_zero() && im.is_zero(); }
  ExactComplex conj() const { return ExactComplex(re, Rational(-im.num, im.den)); }
  Complex to_complex() const { return Complex(re.to_double(), im.to_double()); }

  friend ExactComplex operator+(const ExactComplex& a, const ExactComplex& b) {
    return ExactComplex(a.re + b.re, a.im + b.im);
  }
  friend ExactComplex operator*(const ExactComplex& a, const ExactComplex& b) {
    return ExactComplex(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re);
  }
  friend bool operator==(const ExactComplex& a, const ExactComplex& b) {
    return a.re == b.re && a.im == b.im;
  }
};

using ExactVector = std::vector<ExactComplex>;

/// Exact rational equal to x, or a ConfigError when x is not p/q with
/// q <= max_den (enumeration requires exact alphabet entries).
inline Rational rational_from_double(double x, long long max_den = 1000000) {
  for (long long d = 1; d <= max_den; d == 1 ? d = 2 : d *= 2) {
    const double scaled = x * static_cast<double>(d);
    const double rounded = std::nearbyint(scaled);
    if (scaled == rounded && std::abs(rounded) < 9.0e18)
      return Rational(static_cast<long long>(rounded), d);
  }
  throw ConfigError("exact enumeration needs dyadic-rational scalars, got " +
                    std::to_string(x));
}

inline ExactComplex exact_from_complex(const Complex& c) {
  return ExactComplex(rational_from_double(c.real()), rational_from_double(c.imag()));
}

inline ExactVector exact_alphabet(const Alphabet& a) {
  ExactVector out;
  out.reserve(a.symbols.size());
  for (const auto& s : a.symbols) out.push_back(exact_from_complex(s));
  return out;
}

/// Finite-support distribution over measurement vectors with exact weights.
struct ExactPmf {
  std::vector<ExactVector> support;
  std::vector<Rational> weights;

  void validate() const {
    if (support.empty() || support.size() != weights.size())
      throw std::invalid_argument("ExactPmf: support/weights mismatch");
    Rational total = Rational::integer(0);
    for (const auto& w : weights) total = total + w;
    if (!(total == Rational::integer(1)))
      throw std::invalid_argument("ExactPmf: weights must sum to 1 exactly");
  }

  int n() const { return static_cast<int>(support.front().size()); }
};

inline ExactPmf adversary_pm1_n2_pmf() {
  ExactPmf p;
  p.support = {{ExactComplex::integer(1), ExactComplex::integer(1)},
               {ExactComplex::integer(1), ExactComplex::integer(-1)}};
  p.weights = {Rational(1, 2), Rational(1, 2)};
  return p;
}

inline ExactPmf adversary_support2_pmf(int n) {
  if (n < 2) throw std::invalid_argument("adversary_support2_pmf: needs n >= 2");
  ExactPmf p;
  const long long pairs = static_cast<long long>(n) * (n - 1) / 2;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      ExactVector v(static_cast<std::size_t>(n), ExactComplex::integer(0));
      v[static_cast<std::size_t>(i)] = ExactComplex::integer(1);
      v[static_cast<std::size_t>(j)] = ExactComplex::integer(-1);
      p.support.push_back(std::move(v));
      p.weights.push_back(Rational(1, pairs));
    }
  return p;
}

inline ExactPmf adversary_complex_n2_pmf() {
  ExactPmf p;
  p.support = {{ExactComplex::integer(1), ExactComplex::integer(1)},
               {ExactComplex::integer(1), ExactComplex::integer(-1)},
               {ExactComplex::integer(1), ExactComplex::integer(0, 1)},
               {ExactComplex::integer(1), ExactComplex::integer(0, -1)}};
  p.weights = std::vector<Rational>(4, Rational(1, 4));
  return p;
}

/// Bilinear form v^T u (no conjugation, the zero-testing measurement pairing);
/// the conjugated sesquilinear form sits behind the flag.
inline ExactComplex exact_form(const ExactVector& v, const ExactVector& u, bool conjugate) {
  if (v.size() != u.size()) throw std::invalid_argument("exact_form: length mismatch");
  ExactComplex acc;
  for (std::size_t i = 0; i < v.size(); ++i)
    acc = acc + (conjugate ? v[i].conj() : v[i]) * u[i];
  return acc;
}

/// Pr_{v ~ dist}[v^T u != 0], exactly.
inline Rational eval_detection_prob(const ExactPmf& dist, const ExactVector& u,
                                    bool conjugate = false) {
  dist.validate();
  Rational p = Rational::integer(0);
  for (std::size_t i = 0; i < dist.support.size(); ++i)
    if (!exact_form(dist.support[i], u, conjugate).is_zero()) p = p + dist.weights[i];
  return p;
}

/// Exact game-value certificate: the detection probability, the argument that
/// attains it, and how it was computed.
struct GameValueReport {
  std::vector<Complex> alphabet;
  int n = 0;
  Rational detection_prob;
  ExactVector witness_u;
  std::string method;
};

inline constexpr std::size_t kEnumerationCap = 10'000'000;

namespace detail {

inline std::size_t checked_power(std::size_t base, int exp, std::size_t cap) {
  std::size_t total = 1;
  for (int i = 0; i < exp; ++i) {
    if (total > cap / base)
      throw CapacityError("enumeration larger than the 1e7-state cap");
    total *= base;
  }
  return total;
}

}  // namespace detail

/// Enumerates every u in alphabet^n and maximizes the detection probability of
/// `dist`, certifying an upper bound on the game value P(alphabet, n).
inline GameValueReport alphabet_worst_case(const ExactPmf& dist, const Alphabet& alphabet,
                                           int n, bool conjugate = false) {
  alphabet.validate();
  if (dist.n() != n) throw std::invalid_argument("alphabet_worst_case: n mismatch");
  const ExactVector syms = exact_alphabet(alphabet);
  const std::size_t k = syms.size();
  const std::size_t total = detail::checked_power(k, n, kEnumerationCap);

  GameValueReport rep;
  rep.alphabet = alphabet.symbols;
  rep.n = n;
  rep.method = "enumeration";
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  ExactVector u(static_cast<std::size_t>(n));
  bool first = true;
  for (std::size_t count = 0; count < total; ++count) {
    for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = syms[idx[static_cast<std::size_t>(i)]];
    const Rational p = eval_detection_prob(dist, u, conjugate);
    if (first || rep.detection_prob < p) {
      rep.detection_prob = p;
      rep.witness_u = u;
      first = false;
    }
    for (int i = n - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < k) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  return rep;
}

/// For each nonzero candidate measurement vector v, computes
/// Pr_{u iid uniform over alphabet^n}[v^T u != 0] exactly and returns the
/// minimum: a certified lower bound on Q(alphabet, n). Verifies the bound
/// Q >= 1 - 1/|alphabet| on the way.
inline GameValueReport iid_alphabet_min_search(const Alphabet& alphabet, int n,
                                               const std::vector<ExactVector>& candidates,
                                               bool conjugate = false) {
  alphabet.validate();
  if (candidates.empty())
    throw std::invalid_argument("iid_alphabet_min_search: needs candidates");
  const ExactVector syms = exact_alphabet(alphabet);
  const std::size_t k = syms.size();
  const std::size_t total = detail::checked_power(k, n, kEnumerationCap);

  GameValueReport rep;
  rep.alphabet = alphabet.symbols;
  rep.n = n;
  rep.method = "enumeration";
  bool first = true;
  for (const auto& v : candidates) {
    if (static_cast<int>(v.size()) != n)
      throw std::invalid_argument("iid_alphabet_min_search: candidate length mismatch");
    if (std::all_of(v.begin(), v.end(), [](const ExactComplex& c) { return c.is_zero(); }))
      throw std::invalid_argument("iid_alphabet_min_search: all-zero candidate");
    long long hits = 0;
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    ExactVector u(static_cast<std::size_t>(n));
    for (std::size_t count = 0; count < total; ++count) {
      for (int i = 0; i < n; ++i)
        u[static_cast<std::size_t>(i)] = syms[idx[static_cast<std::size_t>(i)]];
      if (!exact_form(v, u, conjugate).is_zero()) ++hits;
      for (int i = n - 1; i >= 0; --i) {
        if (++idx[static_cast<std::size_t>(i)] < k) break;
        idx[static_cast<std::size_t>(i)] = 0;
      }
    }
    const Rational p(hits, static_cast<long long>(total));
    if (first || p < rep.detection_prob) {
      rep.detection_prob = p;
      rep.witness_u = v;
      first = false;
    }
  }
  const Rational bound = Rational::integer(1) - Rational(1, static_cast<long long>(k));
  if (rep.detection_prob < bound)
    throw std::logic_error(
        "iid_alphabet_min_search: enumeration fell below the 1 - 1/|L| bound, "
        "which the i.i.d.-uniform construction rules out");
  return rep;
}

/// Empirical statistics of <u, e_1^(x)q>^2 for u a Kronecker product of
/// unit-sphere factors (rotation invariance makes the fixed v immaterial).
struct ConcentrationReport {
  int n = 0;
  int q = 0;
  long trials = 0;
  double tau_scale = 1.0;
  std::vector<double> mean_log_x;   ///< per order k=1..q: mean of sum_i<=k log X_i
  std::vector<double> empirical_f;  ///< per order k: fraction with prod X_i >= tau_k / n^k
  double digamma_per_mode = 0.0;    ///< psi(1/2) - psi(n/2)
  double mean_abs_per_mode = 0.0;   ///< empirical E|<u_1, v_1>| (single mode)
  double fitted_decay_rate = 0.0;   ///< LS slope of log f over k = 2..q
  double fit_r_squared = 0.0;
};

/// MC estimates of the Gaussian chi-squared divergence identities
/// E_Q[(dP_a/dQ)(dP_b/dQ)] = exp(a^T Sigma^{-1} b).
struct DivergenceCheck {
  int dim = 0;
  Vec<double> mean_a;
  Vec<double> mean_b;
  Mat<double> covariance;
  long mc_samples = 0;
  double mc_value = 0.0;
  double closed_form = 0.0;
};

ConcentrationReport concentration_probe(int n, int q, long trials, double tau_scale,
                                        const SeededStream& s, int threads = 1);

DivergenceCheck gaussian_divergence_check(const Vec<double>& a, const Vec<double>& b,
                                          const Mat<double>& sigma, long mc_samples,
                                          const SeededStream& s);

/// Exploratory probe of the projected-energy conjecture: quantiles of
/// ||P u||^2 * n^q for P the projector onto t Khatri-Rao columns.
struct ProjectionProbeReport {
  int n = 0;
  int t = 0;
  long trials = 0;
  std::vector<int> orders;
  std::vector<double> median_scaled;
  std::vector<double> q90_scaled;
  std::vector<double> mean_scaled;
};

ProjectionProbeReport projection_probe(int n, int q_lo, int q_hi, int t, long trials,
                                       const SeededStream& s, int threads = 1);

}  // namespace kronquery
