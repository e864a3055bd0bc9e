#include <doctest.h>

#include <map>

#include "kronquery/rand_kron.hpp"
#include "test_oracles.hpp"

using namespace kronquery;

TEST_CASE("sphere samplers hit their norms") {
  SeededStream s(1, 0);
  const auto unit = FactorDistribution<double>::unit_sphere(3);
  const auto sqrtn = FactorDistribution<double>::sqrt_n_sphere(5);
  for (int i = 0; i < 50; ++i) {
    CHECK(std::abs(sample_factor(unit, s).norm() - 1.0) <= 1e-12);
    CHECK(std::abs(sample_factor(sqrtn, s).squaredNorm() - 5.0) <= 1e-9 * 5.0);
  }
}

TEST_CASE("rademacher entries stay in {-1,+1}, even expanded") {
  SeededStream s(2, 0);
  const auto d = FactorDistribution<double>::rademacher(2);
  const auto v = sample_kron(d, 10, s);
  const Vec<double> e = kron_expand(v);
  for (Eigen::Index i = 0; i < e.size(); ++i) CHECK(std::abs(e(i)) == 1.0);
}

TEST_CASE("unit sphere coordinate has the Beta(1/2,(n-1)/2) moments") {
  // squared first coordinate: mean 1/n, variance 2(n-1)/(n^2(n+2))
  SeededStream s(3, 0);
  const int n = 2;
  const long trials = 100000;
  const auto d = FactorDistribution<double>::unit_sphere(n);
  double sum = 0, sum2 = 0, sum4 = 0;
  for (long i = 0; i < trials; ++i) {
    const double x = sample_factor(d, s)(0);
    const double x2 = x * x;
    sum += x2;
    sum2 += x2 * x2;
    sum4 += x2 * x2 * x2 * x2;
  }
  const double mean = sum / trials;
  const double second = sum2 / trials;
  const double var = second - mean * mean;
  const double want_mean = 1.0 / n;
  const double want_var = 2.0 * (n - 1) / (static_cast<double>(n) * n * (n + 2));
  const double se_mean = std::sqrt(want_var / trials);
  CHECK(std::abs(mean - want_mean) <= 3.0 * se_mean);
  CHECK(std::abs(mean - want_mean) <= 0.01);
  const double fourth = sum4 / trials;
  const double se_var = std::sqrt(std::max(0.0, fourth - second * second) / trials);
  CHECK(std::abs(var - want_var) <= 3.0 * se_var + 1e-12);
}

TEST_CASE("log inner product drifts by q times the digamma gap") {
  SeededStream s(4, 0);
  const int q = 20;
  const long trials = 20000;
  const auto d = FactorDistribution<double>::unit_sphere(2);
  double acc = 0;
  for (long i = 0; i < trials; ++i) {
    double y = 0;
    for (int k = 0; k < q; ++k) {
      const double c = sample_factor(d, s)(0);  // <u_k, e_1>
      y += std::log(c * c);
    }
    acc += y;
  }
  const double mean = acc / trials;
  const double want = -q * std::log(4.0);  // q (psi(1/2) - psi(1))
  CHECK(std::abs(mean - want) <= 0.02 * std::abs(want));
}

TEST_CASE("seed determinism and stream independence") {
  const auto d = FactorDistribution<double>::gaussian(4);
  SeededStream a(99, 5), b(99, 5), c(99, 6);
  const auto va = sample_kron(d, 3, a);
  const auto vb = sample_kron(d, 3, b);
  const auto vc = sample_kron(d, 3, c);
  for (int i = 0; i < 3; ++i) {
    CHECK((va.factors[static_cast<std::size_t>(i)] - vb.factors[static_cast<std::size_t>(i)]).norm() == 0.0);
    CHECK((va.factors[static_cast<std::size_t>(i)] - vc.factors[static_cast<std::size_t>(i)]).norm() != 0.0);
  }
}

TEST_CASE("adversary_pm1_n2") {
  SeededStream s(5, 0);
  long ones = 0;
  const long trials = 10000;
  for (long i = 0; i < trials; ++i) {
    const auto v = adversary_pm1_n2(s);
    CHECK(v(0) == 1.0);
    CHECK(std::abs(v(1)) == 1.0);
    if (v(1) == 1.0) ++ones;
  }
  CHECK(std::abs(static_cast<double>(ones) / trials - 0.5) <= 0.02);

  // exact: each u in {+-1}^2 is annihilated by exactly one of the two supports
  const double us[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  for (const auto& u : us) {
    int nonzero = 0;
    for (const double second : {1.0, -1.0})
      if (u[0] + second * u[1] != 0.0) ++nonzero;
    CHECK(nonzero == 1);  // detection probability exactly 1/2
  }
}

TEST_CASE("adversary_support2") {
  SeededStream s(6, 0);
  SUBCASE("n=2 is always (1,-1)") {
    for (int i = 0; i < 20; ++i) {
      const auto v = adversary_support2(2, s);
      CHECK(v(0) == 1.0);
      CHECK(v(1) == -1.0);
    }
  }
  SUBCASE("always orthogonal to the all-ones vector") {
    for (int i = 0; i < 50; ++i) {
      const auto v = adversary_support2(6, s);
      CHECK(v.sum() == 0.0);
      CHECK((v.array() != 0.0).count() == 2);
    }
  }
  SUBCASE("n=4 detection of (1,1,-1,-1) is 2/3 by pair enumeration") {
    // zero iff both support indices land in {0,1} or both in {2,3}: 2 of 6 pairs
    Vec<double> u(4);
    u << 1, 1, -1, -1;
    int zero_pairs = 0, pairs = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) {
        ++pairs;
        if (u(i) - u(j) == 0.0) ++zero_pairs;
      }
    CHECK(pairs == 6);
    CHECK(zero_pairs == 2);
    // empirical agreement with the exact 4/6 detection rate
    long hit = 0;
    const long trials = 20000;
    for (long t = 0; t < trials; ++t)
      if (adversary_support2(4, s).dot(u) != 0.0) ++hit;
    CHECK(std::abs(static_cast<double>(hit) / trials - 2.0 / 3.0) <= 0.02);
  }
  SUBCASE("pair decoding is uniform") {
    std::map<std::pair<int, int>, long> counts;
    const long trials = 30000;
    for (long t = 0; t < trials; ++t) {
      const auto v = adversary_support2(4, s);
      int i = -1, j = -1;
      for (int k = 0; k < 4; ++k) {
        if (v(k) == 1.0) i = k;
        if (v(k) == -1.0) j = k;
      }
      ++counts[{i, j}];
    }
    CHECK(counts.size() == 6);
    for (const auto& [key, c] : counts)
      CHECK(std::abs(static_cast<double>(c) / trials - 1.0 / 6) <= 0.02);
  }
  CHECK_THROWS_AS((void)adversary_support2(1, s), std::invalid_argument);
}

TEST_CASE("adversary_complex_n2") {
  SeededStream s(7, 0);
  const Complex seconds[4] = {Complex(1, 0), Complex(-1, 0), Complex(0, 1), Complex(0, -1)};

  SUBCASE("outputs are pairwise linearly independent") {
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        CHECK(seconds[i] != seconds[j]);  // first entries equal 1, so independence
  }
  SUBCASE("every first-entry-1 input is annihilated by exactly one support") {
    for (const Complex& u2 : seconds) {
      int zero = 0;
      for (const Complex& v2 : seconds)
        if (Complex(1, 0) + v2 * u2 == Complex(0, 0)) ++zero;
      CHECK(zero == 1);  // bilinear detection probability 3/4
    }
  }
  SUBCASE("draw frequencies are uniform") {
    long counts[4] = {0, 0, 0, 0};
    const long trials = 10000;
    for (long t = 0; t < trials; ++t) {
      const auto v = adversary_complex_n2(s);
      CHECK(v(0) == Complex(1, 0));
      for (int k = 0; k < 4; ++k)
        if (v(1) == seconds[k]) ++counts[k];
    }
    for (long c : counts)
      CHECK(std::abs(static_cast<double>(c) / trials - 0.25) <= 0.02);
  }
}

TEST_CASE("make_planted_vector") {
  SUBCASE("coin 0 is seed-reproducible Gaussian data") {
    const SeededStream s(8, 3);
    const auto p1 = make_planted_vector(2, 4, 0.1, 0, s);
    const auto p2 = make_planted_vector(2, 4, 0.1, 0, s);
    CHECK((p1.a - p2.a).norm() == 0.0);
  }
  SUBCASE("eps = 1/36 makes the spike exactly expand(u)") {
    const SeededStream s(9, 1);
    const auto p0 = make_planted_vector(2, 3, 1.0 / 36, 0, s);
    const auto p1 = make_planted_vector(2, 3, 1.0 / 36, 1, s);
    CHECK(p1.lambda == doctest::Approx(1.0));
    const Vec<double> diff = p1.a - p0.a;
    CHECK((diff - kron_expand(p1.u)).norm() <= 1e-12 * diff.norm());
  }
  SUBCASE("norm gap matches lambda^2 n^q") {
    const int n = 2, q = 6;
    const double eps = 0.04;
    const long trials = 1000;
    double gap = 0;
    for (long t = 0; t < trials; ++t) {
      const SeededStream ts(10, static_cast<std::uint64_t>(t));
      const auto p0 = make_planted_vector(n, q, eps, 0, ts);
      const auto p1 = make_planted_vector(n, q, eps, 1, ts);
      gap += p1.a.squaredNorm() - p0.a.squaredNorm();
    }
    gap /= trials;
    const double want = 36.0 * eps * 64.0;  // lambda^2 n^q = 92.16
    CHECK(std::abs(gap - want) <= 0.05 * want);
  }
  SUBCASE("factors are sqrt(n)-normalized") {
    const SeededStream s(11, 0);
    const auto p = make_planted_vector(3, 2, 0.2, 1, s);
    for (const auto& f : p.u.factors)
      CHECK(f.squaredNorm() == doctest::Approx(3.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS((void)make_planted_vector(2, 3, 0.0, 0, SeededStream(1, 1)), ConfigError);
  CHECK_THROWS_AS((void)make_planted_vector(2, 3, 0.3, 0, SeededStream(1, 1)), ConfigError);
}

TEST_CASE("alphabet parsing") {
  CHECK(Alphabet::parse("pm1").symbols.size() == 2);
  CHECK(Alphabet::parse("pm1i").symbols.size() == 4);
  const Alphabet a = Alphabet::parse("1,-1,i,-i");
  CHECK(a.symbols.size() == 4);
  CHECK(!a.is_real());
  const Alphabet b = Alphabet::parse("0.5+0.5i,-2");
  CHECK(b.symbols[0] == Complex(0.5, 0.5));
  CHECK(b.symbols[1] == Complex(-2, 0));
  CHECK_THROWS_AS((void)Alphabet::parse("1,1"), ConfigError);
  CHECK_THROWS_AS((void)Alphabet::parse("1,bogus"), ConfigError);
}

TEST_CASE("alphabet iid samples stay closed") {
  SeededStream s(12, 0);
  const Alphabet a = Alphabet::parse("1,-1,2,-2");
  const auto d = FactorDistribution<double>::alphabet_iid(a, 5);
  for (int i = 0; i < 50; ++i) {
    const auto f = sample_factor(d, s);
    for (int j = 0; j < 5; ++j) CHECK(a.contains(Complex(f(j), 0)));
  }
}

TEST_CASE("explicit pmf sampling respects weights") {
  SeededStream s(13, 0);
  ExplicitPmf<double> pmf;
  FactorVec<double> x(1), y(1);
  x << 1.0;
  y << 2.0;
  pmf.support = {x, y};
  pmf.weights = {0.25, 0.75};
  const auto d = FactorDistribution<double>::explicit_pmf(pmf);
  long twos = 0;
  const long trials = 20000;
  for (long t = 0; t < trials; ++t)
    if (sample_factor(d, s)(0) == 2.0) ++twos;
  CHECK(std::abs(static_cast<double>(twos) / trials - 0.75) <= 0.02);

  ExplicitPmf<double> bad = pmf;
  bad.weights = {0.2, 0.75};
  CHECK_THROWS_AS((void)FactorDistribution<double>::explicit_pmf(bad), ConfigError);
}
