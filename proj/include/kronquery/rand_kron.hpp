#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kronquery/kron_core.hpp"
#include "kronquery/prng.hpp"

namespace kronquery {

/// Finite set of scalars that query entries are restricted to.
struct Alphabet {
  std::vector<Complex> symbols;

  bool is_real() const {
    return std::all_of(symbols.begin(), symbols.end(),
                       [](const Complex& c) { return c.imag() == 0.0; });
  }
  std::size_t size() const { return symbols.size(); }

  void validate() const {
    if (symbols.empty()) throw ConfigError("alphabet: must be nonempty");
    for (std::size_t i = 0; i < symbols.size(); ++i)
      for (std::size_t j = i + 1; j < symbols.size(); ++j)
        if (symbols[i] == symbols[j])
          throw ConfigError("alphabet: symbols must be pairwise distinct");
  }

  bool contains(const Complex& c, double tol = 0.0) const {
    for (const auto& s : symbols)
      if (std::abs(s - c) <= tol) return true;
    return false;
  }

  static Alphabet pm1() { return Alphabet{{Complex(-1, 0), Complex(1, 0)}}; }
  static Alphabet pm1i() {
    return Alphabet{{Complex(-1, 0), Complex(1, 0), Complex(0, 1), Complex(0, -1)}};
  }

  /// "pm1", "pm1i", or comma-separated complex literals ("1,-1,0.5+0.5i,i").
  static Alphabet parse(const std::string& text);
};

namespace detail {

inline Complex parse_complex_literal(std::string tok) {
  const auto strip = [](std::string& t) {
    while (!t.empty() && t.front() == ' ') t.erase(t.begin());
    while (!t.empty() && t.back() == ' ') t.pop_back();
  };
  strip(tok);
  if (tok.empty()) throw ConfigError("alphabet: empty literal");
  const auto to_num = [&](const std::string& t) -> double {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("alphabet: bad literal '" + t + "'");
    }
    if (used != t.size()) throw ConfigError("alphabet: bad literal '" + t + "'");
    return v;
  };
  if (tok.back() == 'i' || tok.back() == 'I') {
    tok.pop_back();
    // locate the sign splitting real and imaginary parts, if any
    for (std::size_t p = tok.size(); p-- > 1;) {
      if (tok[p] == '+' || tok[p] == '-') {
        return Complex(to_num(tok.substr(0, p)), to_num(tok.substr(p)));
      }
    }
    return Complex(0.0, to_num(tok));
  }
  return Complex(to_num(tok), 0.0);
}

}  // namespace detail

inline Alphabet Alphabet::parse(const std::string& text) {
  if (text == "pm1") return pm1();
  if (text == "pm1i") return pm1i();
  Alphabet a;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    a.symbols.push_back(detail::parse_complex_literal(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  a.validate();
  return a;
}

enum class FactorKind {
  UnitSphere,
  SqrtNSphere,
  Gaussian,
  AlphabetIID,
  Rademacher,
  ComplexRademacher,
  ExplicitPMF,
};

template <class S>
struct ExplicitPmf {
  std::vector<FactorVec<S>> support;
  std::vector<double> weights;

  void validate() const {
    if (support.empty() || support.size() != weights.size())
      throw ConfigError("explicit pmf: support/weights mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ConfigError("explicit pmf: weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ConfigError("explicit pmf: weights must sum to 1");
    const auto n = support.front().size();
    for (const auto& v : support)
      if (v.size() != n) throw ConfigError("explicit pmf: support lengths differ");
  }
};

/// Distribution of one factor draw.
template <class S>
struct FactorDistribution {
  FactorKind kind = FactorKind::Gaussian;
  int n = 0;
  Alphabet alphabet;      // AlphabetIID
  ExplicitPmf<S> pmf;     // ExplicitPMF

  static FactorDistribution unit_sphere(int n) { return {FactorKind::UnitSphere, n, {}, {}}; }
  static FactorDistribution sqrt_n_sphere(int n) { return {FactorKind::SqrtNSphere, n, {}, {}}; }
  static FactorDistribution gaussian(int n) { return {FactorKind::Gaussian, n, {}, {}}; }
  static FactorDistribution rademacher(int n) { return {FactorKind::Rademacher, n, {}, {}}; }
  static FactorDistribution complex_rademacher(int n) {
    static_assert(is_complex_scalar<S>::value, "complex Rademacher needs a complex scalar");
    return {FactorKind::ComplexRademacher, n, {}, {}};
  }
  static FactorDistribution alphabet_iid(Alphabet a, int n) {
    a.validate();
    return {FactorKind::AlphabetIID, n, std::move(a), {}};
  }
  static FactorDistribution explicit_pmf(ExplicitPmf<S> p) {
    p.validate();
    const int n = static_cast<int>(p.support.front().size());
    return {FactorKind::ExplicitPMF, n, {}, std::move(p)};
  }

  void validate() const {
    if (kind == FactorKind::ExplicitPMF) {
      pmf.validate();
      return;
    }
    if (n < 1) throw ConfigError("factor distribution: n must be >= 1");
    if (kind == FactorKind::AlphabetIID) {
      alphabet.validate();
      if (!is_complex_scalar<S>::value && !alphabet.is_real())
        throw ConfigError("factor distribution: complex alphabet on a real experiment");
    }
  }
};

namespace detail {

template <class S>
S scalar_from(const Complex& c) {
  if constexpr (is_complex_scalar<S>::value) {
    return c;
  } else {
    return c.real();
  }
}

inline Vec<double> gaussian_vec(int n, SeededStream& s) {
  Vec<double> g(n);
  for (int i = 0; i < n; ++i) g(i) = s.next_gaussian();
  return g;
}

}  // namespace detail

/// One factor draw. UnitSphere normalizes a Gaussian draw to norm 1,
/// SqrtNSphere to norm sqrt(n); AlphabetIID picks each entry uniformly.
template <class S>
FactorVec<S> sample_factor(const FactorDistribution<S>& d, SeededStream& s) {
  d.validate();
  switch (d.kind) {
    case FactorKind::UnitSphere:
    case FactorKind::SqrtNSphere: {
      Vec<double> g;
      double norm = 0.0;
      do {
        g = detail::gaussian_vec(d.n, s);
        norm = g.norm();
      } while (norm < 1e-150);
      const double target = d.kind == FactorKind::UnitSphere
                                ? 1.0
                                : std::sqrt(static_cast<double>(d.n));
      g *= target / norm;
      if constexpr (is_complex_scalar<S>::value)
        return g.template cast<S>();
      else
        return g;
    }
    case FactorKind::Gaussian: {
      Vec<double> g = detail::gaussian_vec(d.n, s);
      if constexpr (is_complex_scalar<S>::value)
        return g.template cast<S>();
      else
        return g;
    }
    case FactorKind::Rademacher: {
      FactorVec<S> f(d.n);
      for (int i = 0; i < d.n; ++i) f(i) = s.next_bit() ? S(1) : S(-1);
      return f;
    }
    case FactorKind::ComplexRademacher: {
      if constexpr (is_complex_scalar<S>::value) {
        static const Complex syms[4] = {Complex(1, 0), Complex(-1, 0), Complex(0, 1),
                                        Complex(0, -1)};
        FactorVec<S> f(d.n);
        for (int i = 0; i < d.n; ++i) f(i) = syms[s.next_below(4)];
        return f;
      } else {
        throw ConfigError("sample_factor: complex Rademacher on a real experiment");
      }
    }
    case FactorKind::AlphabetIID: {
      FactorVec<S> f(d.n);
      for (int i = 0; i < d.n; ++i)
        f(i) = detail::scalar_from<S>(
            d.alphabet.symbols[s.next_below(d.alphabet.symbols.size())]);
      return f;
    }
    case FactorKind::ExplicitPMF: {
      const double x = s.next_double();
      double acc = 0.0;
      for (std::size_t i = 0; i < d.pmf.weights.size(); ++i) {
        acc += d.pmf.weights[i];
        if (x < acc) return d.pmf.support[i];
      }
      return d.pmf.support.back();
    }
  }
  throw std::logic_error("sample_factor: unreachable");
}

/// q independent factor draws assembled into a Kronecker vector.
template <class S>
KronVector<S> sample_kron(const FactorDistribution<S>& d, int q, SeededStream& s) {
  if (q < 1) throw ConfigError("sample_kron: q must be >= 1");
  KronVector<S> v;
  v.factors.reserve(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) v.factors.push_back(sample_factor(d, s));
  return v;
}

// --- adversarial factor distributions for the zero-testing game ---

/// Uniform over {(1,1), (1,-1)}: every u in {+-1}^2 is annihilated by exactly
/// one of the two, so a Rademacher query detects with probability 1/2.
inline FactorVec<double> adversary_pm1_n2(SeededStream& s) {
  FactorVec<double> f(2);
  f(0) = 1.0;
  f(1) = s.next_bit() ? 1.0 : -1.0;
  return f;
}

/// Uniform over support-2 vectors with first nonzero entry 1, second -1;
/// pairs (i, j), i < j, are decoded lexicographically for determinism.
inline FactorVec<double> adversary_support2(int n, SeededStream& s) {
  if (n < 2) throw std::invalid_argument("adversary_support2: needs n >= 2");
  const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t r = s.next_below(pairs);
  int i = 0;
  while (r >= static_cast<std::uint64_t>(n - 1 - i)) {
    r -= static_cast<std::uint64_t>(n - 1 - i);
    ++i;
  }
  const int j = i + 1 + static_cast<int>(r);
  FactorVec<double> f = FactorVec<double>::Zero(n);
  f(i) = 1.0;
  f(j) = -1.0;
  return f;
}

/// Uniform over {(1,1), (1,-1), (1,i), (1,-i)}; pairwise linearly independent,
/// and every u in {+-1,+-i}^2 is (bilinearly) orthogonal to exactly one.
inline FactorVec<Complex> adversary_complex_n2(SeededStream& s) {
  static const Complex second[4] = {Complex(1, 0), Complex(-1, 0), Complex(0, 1),
                                    Complex(0, -1)};
  FactorVec<Complex> f(2);
  f(0) = Complex(1, 0);
  f(1) = second[s.next_below(4)];
  return f;
}

/// a_0 = g or a_1 = g + 6*sqrt(eps) * expand(u) with u made of sqrt(n)-sphere
/// factors; g and u come from fixed sub-streams so both arms are coupled.
struct PlantedVector {
  Vec<double> a;
  KronVector<double> u;
  double lambda = 0.0;
  int coin = 0;
};

inline PlantedVector make_planted_vector(int n, int q, double eps, int coin,
                                         const SeededStream& s,
                                         std::size_t cap = kDefaultCap) {
  if (!(eps > 0.0 && eps < 0.25))
    throw ConfigError("make_planted_vector: eps must lie in (0, 0.25)");
  if (coin != 0 && coin != 1)
    throw std::invalid_argument("make_planted_vector: coin must be 0 or 1");
  KronVector<double> probe;
  probe.factors.assign(static_cast<std::size_t>(q), FactorVec<double>::Zero(n));
  const std::size_t d = probe.dim();
  if (d > cap) throw CapacityError("make_planted_vector: n^q exceeds cap");

  SeededStream gs = s.derive(0x67);
  SeededStream us = s.derive(0x75);
  PlantedVector out;
  out.coin = coin;
  out.lambda = 6.0 * std::sqrt(eps);
  out.a = detail::gaussian_vec(static_cast<int>(d), gs);
  const auto sphere = FactorDistribution<double>::sqrt_n_sphere(n);
  out.u = sample_kron(sphere, q, us);
  if (coin == 1) out.a += out.lambda * kron_expand(out.u, cap);
  return out;
}

}  // namespace kronquery
