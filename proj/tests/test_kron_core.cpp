#include <doctest.h>

#include "kronquery/implicit_matrix.hpp"
#include "kronquery/query_matrix.hpp"
#include "test_oracles.hpp"

using namespace kronquery;
using kqtest::naive_expand;
using kqtest::random_kron;
using kqtest::random_unit_kron;

namespace {

KronVector<double> basis_kron(int n, int q, int which) {
  KronVector<double> v;
  for (int i = 0; i < q; ++i) {
    FactorVec<double> f = FactorVec<double>::Zero(n);
    f(which) = 1.0;
    v.factors.push_back(f);
  }
  return v;
}

}  // namespace

TEST_CASE("kron_inner identity and annihilation cases") {
  const auto e1 = basis_kron(2, 2, 0);
  CHECK(kron_inner(e1, e1) == doctest::Approx(1.0));

  // one orthogonal factor kills the whole product
  KronVector<double> v = e1;
  v.factors[1](0) = 0.0;
  v.factors[1](1) = 1.0;
  CHECK(kron_inner(e1, v) == 0.0);
}

TEST_CASE("kron_inner matches the dense expansion oracle") {
  SeededStream s(101, 0);
  const auto u = random_kron(3, 4, s);
  const auto v = random_kron(3, 4, s);
  const double dense = naive_expand(u.factors).dot(naive_expand(v.factors));
  CHECK(kron_inner(u, v) == doctest::Approx(dense).epsilon(1e-12));
}

TEST_CASE("factorization correctness over random shapes") {
  SeededStream s(7, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(s.next_below(3));
    const int q = 1 + static_cast<int>(s.next_below(6));
    const auto u = random_kron(n, q, s);
    const auto v = random_kron(n, q, s);
    const double dense = naive_expand(u.factors).dot(naive_expand(v.factors));
    const double scale = kron_norm(u) * kron_norm(v);
    CHECK(std::abs(kron_inner(u, v) - dense) <= 1e-12 * scale);
  }
}

TEST_CASE("kron_inner rejects mismatched shapes") {
  SeededStream s(3, 0);
  const auto u = random_kron(2, 3, s);
  const auto v = random_kron(2, 4, s);
  const auto w = random_kron(3, 3, s);
  CHECK_THROWS_AS((void)kron_inner(u, v), std::invalid_argument);
  CHECK_THROWS_AS((void)kron_inner(u, w), std::invalid_argument);
}

TEST_CASE("complex kron_inner conjugates the first argument") {
  KronVector<Complex> u, v;
  FactorVec<Complex> fu(2), fv(2);
  fu << Complex(0, 1), Complex(0, 0);
  fv << Complex(1, 0), Complex(0, 0);
  u.factors = {fu};
  v.factors = {fv};
  CHECK(kron_inner(u, v) == Complex(0, -1));   // conj(i) * 1
  CHECK(kron_bilinear(u, v) == Complex(0, 1)); // i * 1
}

TEST_CASE("kron_expand hand cases") {
  KronVector<double> v;
  FactorVec<double> a(2), b(2);
  a << 1, 0;
  b << 1, 0;
  v.factors = {a, b};
  const Vec<double> e = kron_expand(v);
  CHECK(e.size() == 4);
  CHECK(e(0) == 1.0);
  CHECK(e.tail(3).norm() == 0.0);

  KronVector<double> w;
  FactorVec<double> c(2), d(2);
  c << 1, 1;
  d << 1, -1;
  w.factors = {c, d};
  const Vec<double> f = kron_expand(w);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == -1.0);
  CHECK(f(2) == 1.0);
  CHECK(f(3) == -1.0);
}

TEST_CASE("kron_expand norm multiplicativity and cap") {
  SeededStream s(11, 0);
  const auto v = random_unit_kron(3, 5, s);
  CHECK(kron_expand(v).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS((void)kron_expand(v, 8), CapacityError);
}

TEST_CASE("contract_dense_kron equals a dense dot product") {
  SeededStream s(13, 0);
  const auto v = random_kron(3, 3, s);
  Vec<double> a(27);
  for (int i = 0; i < 27; ++i) a(i) = s.next_gaussian();
  CHECK(contract_dense_kron(a, v) ==
        doctest::Approx(a.dot(naive_expand(v.factors))).epsilon(1e-12));
}

TEST_CASE("matvec on every variant") {
  SeededStream s(17, 0);
  const auto v = random_kron(2, 3, s);

  SUBCASE("zero matrix") {
    const auto z = ImplicitMatrix<double>::zero(8);
    CHECK(matvec(z, v).norm() == 0.0);
  }
  SUBCASE("rank one with orthogonal query is zero") {
    auto a = basis_kron(2, 3, 0);
    KronVector<double> w = a;
    w.factors[0](0) = 0.0;
    w.factors[0](1) = 1.0;
    const auto m = ImplicitMatrix<double>::rank_one(a);
    CHECK(matvec(m, w).norm() == 0.0);
  }
  SUBCASE("spiked wigner matches its stored dense form") {
    const auto u = random_unit_kron(2, 3, s);
    const auto m = ImplicitMatrix<double>::spiked_wigner(2, 3, 0.0, u, 99);
    const auto& node = std::get<SpikedWignerMatrix>(m.node());
    const Mat<double> dense = (*node.g + node.g->transpose()) / std::sqrt(16.0);
    const Vec<double> x = kron_expand(v);
    CHECK((matvec(m, v) - dense * x).norm() <= 1e-10 * (dense * x).norm());
  }
}

TEST_CASE("vec_mat_vec examples and quadratic form oracle") {
  SeededStream s(19, 0);
  SUBCASE("rank one with itself and with an orthogonal vector") {
    const auto a = random_unit_kron(2, 4, s);
    const auto m = ImplicitMatrix<double>::rank_one(a);
    CHECK(vec_mat_vec(m, a) == doctest::Approx(1.0).epsilon(1e-10));
    KronVector<double> w = a;
    const double f0 = w.factors[0](0), f1 = w.factors[0](1);
    w.factors[0](0) = -f1;
    w.factors[0](1) = f0;
    CHECK(std::abs(vec_mat_vec(m, w)) <= 1e-20);
  }
  SUBCASE("explicit dense quadratic form") {
    Mat<double> a(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = s.next_gaussian();
    const auto m = ImplicitMatrix<double>::explicit_dense(a);
    const auto v = random_kron(2, 3, s);
    const Vec<double> x = naive_expand(v.factors);
    CHECK(vec_mat_vec(m, v) == doctest::Approx(x.dot(a * x)).epsilon(1e-12));
  }
}

TEST_CASE("oracle consistency: all variants against the dense reference") {
  SeededStream s(23, 0);
  const int n = 2, q = 4;  // D = 16
  std::vector<ImplicitMatrix<double>> mats;
  mats.push_back(ImplicitMatrix<double>::zero(16));
  mats.push_back(ImplicitMatrix<double>::rank_one(random_kron(n, q, s)));
  {
    Vec<double> a(16);
    for (int i = 0; i < 16; ++i) a(i) = s.next_gaussian();
    mats.push_back(ImplicitMatrix<double>::rank_one(a));
  }
  mats.push_back(
      ImplicitMatrix<double>::spiked_wigner(n, q, 2.5, random_unit_kron(n, q, s), 4242));
  {
    Mat<double> a(16, 16);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) a(i, j) = s.next_gaussian();
    mats.push_back(ImplicitMatrix<double>::explicit_dense(a));
  }

  for (const auto& m : mats) {
    const Mat<double> dense = to_dense(m);
    for (int rep = 0; rep < 5; ++rep) {
      const auto v = random_kron(n, q, s);
      const Vec<double> x = naive_expand(v.factors);
      const Vec<double> got = matvec(m, v);
      const Vec<double> want = dense * x;
      CHECK((got - want).norm() <= 1e-10 * (1.0 + want.norm()));
      // consistency of the quadratic path with the product path
      CHECK(vec_mat_vec(m, v) ==
            doctest::Approx(x.dot(got)).epsilon(1e-10));
    }
  }
}

TEST_CASE("spiked wigner is symmetric and seed-deterministic") {
  SeededStream s(29, 0);
  const auto u = random_unit_kron(2, 3, s);
  const auto m1 = ImplicitMatrix<double>::spiked_wigner(2, 3, 1.5, u, 77);
  const auto m2 = ImplicitMatrix<double>::spiked_wigner(2, 3, 1.5, u, 77);
  const auto& g1 = *std::get<SpikedWignerMatrix>(m1.node()).g;
  const auto& g2 = *std::get<SpikedWignerMatrix>(m2.node()).g;
  CHECK((g1 - g2).norm() == 0.0);  // bit-identical

  for (int rep = 0; rep < 5; ++rep) {
    const auto v = random_kron(2, 3, s);
    const auto w = random_kron(2, 3, s);
    const double vw = kron_expand(v).dot(matvec(m1, w));
    const double wv = kron_expand(w).dot(matvec(m1, v));
    CHECK(vw == doctest::Approx(wv).epsilon(1e-10));
  }
}

TEST_CASE("modal products") {
  SUBCASE("mode-1 contraction of a rank-one tensor leaves the other factor") {
    FactorVec<double> a(2), b(2);
    a << 3.0 / 5, 4.0 / 5;
    b << 2, -1;
    KronVector<double> v;
    v.factors = {a, b};
    const DenseTensor<double> t = tensor_from_kron(v);
    const DenseTensor<double> r = modal_product(t, 1, a);
    CHECK(r.q == 1);
    CHECK(r.entries(0) == doctest::Approx(b(0)).epsilon(1e-12));
    CHECK(r.entries(1) == doctest::Approx(b(1)).epsilon(1e-12));
  }
  SUBCASE("full contraction factorizes over modes") {
    SeededStream s(31, 0);
    const auto abc = random_kron(2, 3, s);
    const auto uvw = random_kron(2, 3, s);
    const DenseTensor<double> t = tensor_from_kron(abc);
    double want = 1.0;
    for (int i = 0; i < 3; ++i)
      want *= abc.factors[static_cast<std::size_t>(i)].dot(
          uvw.factors[static_cast<std::size_t>(i)]);
    CHECK(contract_full(t, uvw) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("sequential modal products match the dense inner product") {
    SeededStream s(37, 0);
    DenseTensor<double> t = DenseTensor<double>::zeros(2, 3);
    for (Eigen::Index i = 0; i < t.entries.size(); ++i) t.entries(i) = s.next_gaussian();
    const auto v = random_kron(2, 3, s);
    const double dense = t.entries.dot(naive_expand(v.factors));
    CHECK(contract_full(t, v) == doctest::Approx(dense).epsilon(1e-12));
  }
  SUBCASE("errors") {
    DenseTensor<double> t = DenseTensor<double>::zeros(2, 2);
    FactorVec<double> w(2);
    w << 1, 1;
    CHECK_THROWS_AS((void)modal_product(t, 0, w), std::invalid_argument);
    CHECK_THROWS_AS((void)modal_product(t, 3, w), std::invalid_argument);
    FactorVec<double> bad(3);
    bad << 1, 1, 1;
    CHECK_THROWS_AS((void)modal_product(t, 1, bad), std::invalid_argument);
  }
}

TEST_CASE("condition number") {
  SUBCASE("orthonormal columns give 1") {
    QueryMatrix<double> v(4);
    Vec<double> c1 = Vec<double>::Zero(4), c2 = Vec<double>::Zero(4);
    c1(0) = 1;
    c2(2) = 1;
    v.append(c1);
    v.append(c2);
    CHECK(v.condition_number() == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("duplicated column hits the +inf sentinel") {
    QueryMatrix<double> v(4);
    Vec<double> c(4);
    c << 1, 2, 3, 4;
    v.append(c);
    v.append(c);
    CHECK(std::isinf(v.condition_number()));
  }
  SUBCASE("2x2 singular values by hand: kappa = tan(3 pi / 8)") {
    QueryMatrix<double> v(2);
    Vec<double> c1(2), c2(2);
    c1 << 1, 0;
    c2 << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    v.append(c1);
    v.append(c2);
    CHECK(v.condition_number() ==
          doctest::Approx(std::tan(3.0 * M_PI / 8.0)).epsilon(1e-9));
    CHECK(v.condition_number() == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-9));
  }
  SUBCASE("empty matrix is an error") {
    QueryMatrix<double> v(4);
    CHECK_THROWS_AS((void)v.condition_number(), std::invalid_argument);
  }
}

TEST_CASE("gram entries match pairwise inner products") {
  SeededStream s(41, 0);
  QueryMatrix<double> v(16);
  std::vector<KronVector<double>> cols;
  for (int i = 0; i < 4; ++i) {
    cols.push_back(random_kron(2, 4, s));
    v.append(cols.back());
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double want = naive_expand(cols[static_cast<std::size_t>(i)].factors)
                              .dot(naive_expand(cols[static_cast<std::size_t>(j)].factors));
      const double norms = kron_norm(cols[static_cast<std::size_t>(i)]) *
                           kron_norm(cols[static_cast<std::size_t>(j)]);
      CHECK(std::abs(v.gram()(i, j) - want) <= 1e-10 * norms);
    }
}

TEST_CASE("projection energy") {
  SeededStream s(43, 0);
  SUBCASE("orthonormal V and u equal to the first column") {
    QueryMatrix<double> v(4);
    Vec<double> c1 = Vec<double>::Zero(4), c2 = Vec<double>::Zero(4);
    c1(0) = 1;
    c2(1) = 1;
    v.append(c1);
    v.append(c2);
    KronVector<double> u;
    FactorVec<double> f1(2), f2(2);
    f1 << 1, 0;
    f2 << 1, 0;
    u.factors = {f1, f2};  // expands to e_1 in R^4
    const ProjectionEnergy pe = projection_energy(v, u);
    CHECK(pe.per_column[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pe.total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("u orthogonal to the range") {
    QueryMatrix<double> v(4);
    Vec<double> c1 = Vec<double>::Zero(4);
    c1(3) = 1;
    v.append(c1);
    KronVector<double> u;
    FactorVec<double> f1(2), f2(2);
    f1 << 1, 0;
    f2 << 1, 0;
    u.factors = {f1, f2};
    CHECK(projection_energy(v, u).total <= 1e-12);
  }
  SUBCASE("random V against the dense pseudo-inverse oracle") {
    for (int rep = 0; rep < 20; ++rep) {
      QueryMatrix<double> v(16);
      std::vector<KronVector<double>> cols;
      for (int i = 0; i < 3; ++i) {
        cols.push_back(random_kron(2, 4, s));
        v.append(cols.back());
      }
      Mat<double> dense(16, 3);
      for (int i = 0; i < 3; ++i)
        dense.col(i) = naive_expand(cols[static_cast<std::size_t>(i)].factors);
      const auto u = random_unit_kron(2, 4, s);
      const double want = kqtest::dense_projection_energy(dense, naive_expand(u.factors));
      CHECK(projection_energy(v, u).total == doctest::Approx(want).epsilon(1e-9));
    }
  }
  SUBCASE("dependent columns are dropped and recorded") {
    QueryMatrix<double> v(4);
    Vec<double> c(4);
    c << 1, -1, 2, 0;
    v.append(c);
    v.append(Vec<double>(2.0 * c));
    KronVector<double> u;
    FactorVec<double> f1(2), f2(2);
    f1 << 1, 0;
    f2 << 0, 1;
    u.factors = {f1, f2};
    const ProjectionEnergy pe = projection_energy(v, u);
    CHECK(pe.dropped == std::vector<int>{1});
    CHECK(pe.per_column.size() == 1);
  }
}

TEST_CASE("conditioning bound holds on random unit Khatri-Rao sketches") {
  // projection_energy throws if the kappa^2 ||V^T u||^2 bound ever fails
  SeededStream s(47, 0);
  for (int rep = 0; rep < 50; ++rep) {
    QueryMatrix<double> v(64);
    for (int i = 0; i < 4; ++i) v.append(random_unit_kron(2, 6, s));
    const auto u = random_unit_kron(2, 6, s);
    CHECK_NOTHROW((void)projection_energy(v, u));
  }
}

TEST_CASE("infer_order") {
  CHECK(infer_order(16, 2) == 4);
  CHECK(infer_order(16, 4) == 2);
  CHECK(infer_order(2, 2) == 1);
  CHECK_THROWS_AS((void)infer_order(12, 2), std::invalid_argument);
  CHECK_THROWS_AS((void)infer_order(1, 2), std::invalid_argument);
}
