#pragma once

#include <memory>
#include <variant>

#include "kronquery/kron_core.hpp"
#include "kronquery/prng.hpp"

namespace kronquery {

template <class S>
struct ZeroMatrix {
  std::size_t dim = 0;
};

/// A = a a^T (no conjugation, so the quadratic form is the squared bilinear
/// measurement). Real instances are symmetric PSD with trace ||a||^2.
template <class S>
struct RankOneMatrix {
  std::variant<KronVector<S>, Vec<S>> a;
};

/// (G + G^T)/sqrt(2D) + lambda * u u^T with G the iid N(0,1) matrix drawn from
/// wigner_seed. The single D x D array G is the only dense storage; the
/// symmetrized, scaled operator is formed on the fly per product. Real only.
struct SpikedWignerMatrix {
  int n = 0;
  int q = 0;
  double lambda = 0.0;
  KronVector<double> u;  // unit-sphere factors
  std::uint64_t wigner_seed = 0;
  std::shared_ptr<const Mat<double>> g;
};

template <class S>
struct ExplicitDenseMatrix {
  Mat<S> a;
};

/// Tagged implicit operator: products are served without materializing
/// n^q x n^q storage unless the variant is inherently dense.
template <class S>
class ImplicitMatrix {
 public:
  using Node = std::variant<ZeroMatrix<S>, RankOneMatrix<S>, SpikedWignerMatrix,
                            ExplicitDenseMatrix<S>>;

  static ImplicitMatrix zero(std::size_t dim) {
    return ImplicitMatrix(Node{ZeroMatrix<S>{dim}});
  }

  static ImplicitMatrix rank_one(KronVector<S> a) {
    a.validate();
    return ImplicitMatrix(Node{RankOneMatrix<S>{std::move(a)}});
  }

  static ImplicitMatrix rank_one(Vec<S> a) {
    if (a.size() < 1) throw std::invalid_argument("rank_one: empty vector");
    return ImplicitMatrix(Node{RankOneMatrix<S>{std::move(a)}});
  }

  /// Draws G once from wigner_seed; lambda = 0 yields the null arm A_0.
  static ImplicitMatrix spiked_wigner(int n, int q, double lambda,
                                      KronVector<double> u, std::uint64_t wigner_seed,
                                      std::size_t cap = kDefaultCap) {
    static_assert(std::is_same_v<S, double>, "spiked Wigner instances are real");
    if (lambda < 0) throw std::invalid_argument("spiked_wigner: lambda must be >= 0");
    u.validate();
    if (u.n() != n || u.q() != q)
      throw std::invalid_argument("spiked_wigner: u must be an (n,q) Kronecker vector");
    const std::size_t d = u.dim();
    if (d == 0 || d > cap / d)
      throw CapacityError("spiked_wigner: D*D exceeds materialization cap");
    SeededStream s(wigner_seed, 0x5749474E45ULL);  // fixed stream for G
    auto g = std::make_shared<Mat<double>>(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        (*g)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.next_gaussian();
    SpikedWignerMatrix m{n, q, lambda, std::move(u), wigner_seed, std::move(g)};
    return ImplicitMatrix(Node{std::move(m)});
  }

  static ImplicitMatrix explicit_dense(Mat<S> a) {
    if (a.rows() != a.cols() || a.rows() < 1)
      throw std::invalid_argument("explicit_dense: matrix must be square");
    return ImplicitMatrix(Node{ExplicitDenseMatrix<S>{std::move(a)}});
  }

  const Node& node() const { return node_; }

  std::size_t dim() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
            return m.dim;
          } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
            if (std::holds_alternative<KronVector<S>>(m.a))
              return std::get<KronVector<S>>(m.a).dim();
            return static_cast<std::size_t>(std::get<Vec<S>>(m.a).size());
          } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
            return m.u.dim();
          } else {
            return static_cast<std::size_t>(m.a.rows());
          }
        },
        node_);
  }

 private:
  explicit ImplicitMatrix(Node n) : node_(std::move(n)) {}
  Node node_;
};

namespace detail {

template <class S>
void require_dim(const ImplicitMatrix<S>& a, const KronVector<S>& v) {
  if (a.dim() != v.dim())
    throw std::invalid_argument("implicit matrix / query dimension mismatch");
}

inline Vec<double> spiked_apply(const SpikedWignerMatrix& m, const Vec<double>& x) {
  const double d = static_cast<double>(m.g->rows());
  Vec<double> y = ((*m.g) * x + m.g->transpose() * x) / std::sqrt(2.0 * d);
  if (m.lambda != 0.0) {
    const Vec<double> ue = kron_expand(m.u);
    y += m.lambda * ue * ue.dot(x);
  }
  return y;
}

}  // namespace detail

/// A * expand(v). Rank-one and zero variants never form A, but the response
/// itself is D-long, so D must sit under the cap for every variant.
template <class S>
Vec<S> matvec(const ImplicitMatrix<S>& a, const KronVector<S>& v,
              std::size_t cap = kDefaultCap) {
  detail::require_dim(a, v);
  if (a.dim() > cap) throw CapacityError("matvec: response exceeds materialization cap");
  return std::visit(
      [&](const auto& m) -> Vec<S> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
          return Vec<S>::Zero(static_cast<Eigen::Index>(m.dim));
        } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
          if (std::holds_alternative<KronVector<S>>(m.a)) {
            const auto& ak = std::get<KronVector<S>>(m.a);
            const S c = kron_bilinear(ak, v);
            return kron_expand(ak, cap) * c;
          }
          const auto& ad = std::get<Vec<S>>(m.a);
          return ad * contract_dense_kron(ad, v);
        } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
          if constexpr (std::is_same_v<S, double>) {
            return detail::spiked_apply(m, kron_expand(v, cap));
          } else {
            throw std::invalid_argument("matvec: spiked Wigner instances are real");
          }
        } else {
          return m.a * kron_expand(v, cap);
        }
      },
      a.node());
}

/// A * x for an arbitrary dense query; the unrestricted (non-Kronecker) oracle
/// used by baseline policies.
template <class S>
Vec<S> matvec_dense(const ImplicitMatrix<S>& a, const Vec<S>& x) {
  if (a.dim() != static_cast<std::size_t>(x.size()))
    throw std::invalid_argument("matvec_dense: dimension mismatch");
  return std::visit(
      [&](const auto& m) -> Vec<S> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
          return Vec<S>::Zero(x.size());
        } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
          if (std::holds_alternative<KronVector<S>>(m.a)) {
            const Vec<S> ad = kron_expand(std::get<KronVector<S>>(m.a));
            return ad * ad.cwiseProduct(x).sum();
          }
          const auto& ad = std::get<Vec<S>>(m.a);
          return ad * ad.cwiseProduct(x).sum();
        } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
          if constexpr (std::is_same_v<S, double>) {
            return detail::spiked_apply(m, x);
          } else {
            throw std::invalid_argument("matvec_dense: spiked Wigner instances are real");
          }
        } else {
          return m.a * x;
        }
      },
      a.node());
}

/// v^T A v (bilinear; for a rank-one A = a a^T this is the squared linear
/// measurement and costs O(nq), with no D-sized work).
template <class S>
S vec_mat_vec(const ImplicitMatrix<S>& a, const KronVector<S>& v,
              std::size_t cap = kDefaultCap) {
  detail::require_dim(a, v);
  return std::visit(
      [&](const auto& m) -> S {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
          return S(0);
        } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
          S c;
          if (std::holds_alternative<KronVector<S>>(m.a))
            c = kron_bilinear(std::get<KronVector<S>>(m.a), v);
          else
            c = contract_dense_kron(std::get<Vec<S>>(m.a), v);
          return c * c;
        } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
          if constexpr (std::is_same_v<S, double>) {
            const Vec<double> x = kron_expand(v, cap);
            const double d = static_cast<double>(m.g->rows());
            double val = 2.0 * x.dot((*m.g) * x) / std::sqrt(2.0 * d);
            if (m.lambda != 0.0) {
              const double c = contract_dense_kron(x, m.u);
              val += m.lambda * c * c;
            }
            return val;
          } else {
            throw std::invalid_argument("vec_mat_vec: spiked Wigner instances are real");
          }
        } else {
          const Vec<S> x = kron_expand(v, cap);
          return x.cwiseProduct(m.a * x).sum();
        }
      },
      a.node());
}

template <class S>
S trace(const ImplicitMatrix<S>& a) {
  return std::visit(
      [&](const auto& m) -> S {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
          return S(0);
        } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
          // tr(a a^T) = sum_i a_i^2, tensorizing over factors for Kron a.
          if (std::holds_alternative<KronVector<S>>(m.a)) {
            S acc = S(1);
            for (const auto& f : std::get<KronVector<S>>(m.a).factors)
              acc *= f.cwiseProduct(f).sum();
            return acc;
          }
          const auto& ad = std::get<Vec<S>>(m.a);
          return ad.cwiseProduct(ad).sum();
        } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
          if constexpr (std::is_same_v<S, double>) {
            const double d = static_cast<double>(m.g->rows());
            double tr = 2.0 * m.g->trace() / std::sqrt(2.0 * d);
            const Vec<double> ue = kron_expand(m.u);
            return tr + m.lambda * ue.squaredNorm();
          } else {
            throw std::invalid_argument("trace: spiked Wigner instances are real");
          }
        } else {
          return m.a.trace();
        }
      },
      a.node());
}

template <class S>
double frobenius_norm(const ImplicitMatrix<S>& a) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
          if (std::holds_alternative<KronVector<S>>(m.a)) {
            const double nn = kron_norm(std::get<KronVector<S>>(m.a));
            return nn * nn;
          }
          return std::get<Vec<S>>(m.a).squaredNorm();
        } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
          if constexpr (std::is_same_v<S, double>) {
            const double d = static_cast<double>(m.g->rows());
            Mat<double> dense = (*m.g + m.g->transpose()) / std::sqrt(2.0 * d);
            if (m.lambda != 0.0) {
              const Vec<double> ue = kron_expand(m.u);
              dense += m.lambda * ue * ue.transpose();
            }
            return dense.norm();
          } else {
            throw std::invalid_argument("frobenius_norm: spiked Wigner instances are real");
          }
        } else {
          return m.a.norm();
        }
      },
      a.node());
}

/// Dense reference matrix; tests and small-scale oracles only.
template <class S>
Mat<S> to_dense(const ImplicitMatrix<S>& a, std::size_t cap = kDefaultCap) {
  const std::size_t d = a.dim();
  if (d == 0 || d > cap / d) throw CapacityError("to_dense: D*D exceeds cap");
  return std::visit(
      [&](const auto& m) -> Mat<S> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ZeroMatrix<S>>) {
          return Mat<S>::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        } else if constexpr (std::is_same_v<T, RankOneMatrix<S>>) {
          Vec<S> ad = std::holds_alternative<KronVector<S>>(m.a)
                          ? kron_expand(std::get<KronVector<S>>(m.a), cap)
                          : std::get<Vec<S>>(m.a);
          return ad * ad.transpose();
        } else if constexpr (std::is_same_v<T, SpikedWignerMatrix>) {
          if constexpr (std::is_same_v<S, double>) {
            const double dd = static_cast<double>(m.g->rows());
            Mat<double> dense = (*m.g + m.g->transpose()) / std::sqrt(2.0 * dd);
            if (m.lambda != 0.0) {
              const Vec<double> ue = kron_expand(m.u);
              dense += m.lambda * ue * ue.transpose();
            }
            return dense;
          } else {
            throw std::invalid_argument("to_dense: spiked Wigner instances are real");
          }
        } else {
          return m.a;
        }
      },
      a.node());
}

}  // namespace kronquery
