#pragma once

#include <limits>
#include <variant>
#include <vector>

#include "kronquery/kron_core.hpp"

namespace kronquery {

/// Ordered query columns (Kronecker-structured or expanded dense) with an
/// incrementally maintained Gram matrix. Appends are single-writer; reads are
/// safe to share once construction stops.
///
/// All-Kronecker matrices never expand: inner products tensorize through
/// kron_inner, so the Gram costs O(t^2 nq) regardless of n^q. A dense column
/// forces D under the cap and mixed pairs go through expansion.
template <class S>
class QueryMatrix {
 public:
  using Column = std::variant<KronVector<S>, Vec<S>>;

  explicit QueryMatrix(std::size_t dim, std::size_t cap = kDefaultCap)
      : dim_(dim), cap_(cap), gram_(0, 0) {}

  std::size_t dim() const { return dim_; }
  int count() const { return static_cast<int>(cols_.size()); }

  void append(KronVector<S> v) {
    v.validate();
    if (v.dim() != dim_) throw std::invalid_argument("QueryMatrix: column dimension mismatch");
    push(Column{std::move(v)});
  }

  void append(Vec<S> v) {
    if (static_cast<std::size_t>(v.size()) != dim_)
      throw std::invalid_argument("QueryMatrix: column dimension mismatch");
    if (dim_ > cap_) throw CapacityError("QueryMatrix: dense column exceeds cap");
    push(Column{std::move(v)});
  }

  const Column& column(int i) const { return cols_.at(static_cast<std::size_t>(i)); }

  /// t x t Hermitian Gram; gram(i,j) = <v_i, v_j> with conjugate-linear first slot.
  const Mat<S>& gram() const { return gram_; }

  double column_norm(int i) const {
    return std::sqrt(std::abs(gram_(i, i)));
  }

  /// sigma_max / sigma_min from the Gram spectrum. Returns the +infinity
  /// sentinel when sigma_min falls below 1e-13 * sigma_max (or under the
  /// double-precision noise floor of the Gram eigensolve, which is where exact
  /// rank deficiency lands numerically).
  double condition_number() const {
    if (cols_.empty()) throw std::invalid_argument("condition_number: empty query matrix");
    Eigen::SelfAdjointEigenSolver<Mat<S>> es(gram_, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double lmax = ev(ev.size() - 1);
    const double lmin = ev(0);
    if (lmax <= 0.0) return std::numeric_limits<double>::infinity();
    const double noise_floor = 64.0 * std::numeric_limits<double>::epsilon() *
                               static_cast<double>(cols_.size());
    if (lmin <= lmax * std::max(1e-26, noise_floor))
      return std::numeric_limits<double>::infinity();
    return std::sqrt(lmax / lmin);
  }

  /// <v_i, u> (conjugate-linear first argument).
  S column_dot(int i, const KronVector<S>& u) const {
    return std::visit(
        [&](const auto& c) -> S {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, KronVector<S>>) {
            return kron_inner(c, u);
          } else {
            return c.dot(kron_expand(u, cap_));
          }
        },
        cols_[static_cast<std::size_t>(i)]);
  }

  S column_dot(int i, const Vec<S>& u) const {
    if (static_cast<std::size_t>(u.size()) != dim_)
      throw std::invalid_argument("column_dot: dimension mismatch");
    return std::visit(
        [&](const auto& c) -> S {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, KronVector<S>>) {
            if constexpr (is_complex_scalar<S>::value) {
              KronVector<S> cc = c;
              for (auto& f : cc.factors) f = f.conjugate();
              return contract_dense_kron(u, cc);
            } else {
              return contract_dense_kron(u, c);
            }
          } else {
            return c.dot(u);
          }
        },
        cols_[static_cast<std::size_t>(i)]);
  }

  /// V^H u as a t-vector of column dots.
  template <class U>
  Vec<S> dots(const U& u) const {
    Vec<S> s(count());
    for (int i = 0; i < count(); ++i) s(i) = column_dot(i, u);
    return s;
  }

  /// Expanded D x t matrix for dense reference oracles.
  Mat<S> to_dense(std::size_t cap = kDefaultCap) const {
    if (dim_ > cap) throw CapacityError("QueryMatrix::to_dense: exceeds cap");
    Mat<S> v(static_cast<Eigen::Index>(dim_), count());
    for (int i = 0; i < count(); ++i) {
      std::visit(
          [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, KronVector<S>>)
              v.col(i) = kron_expand(c, cap);
            else
              v.col(i) = c;
          },
          cols_[static_cast<std::size_t>(i)]);
    }
    return v;
  }

 private:
  void push(Column col) {
    const int t = count();
    gram_.conservativeResize(t + 1, t + 1);
    for (int i = 0; i < t; ++i) {
      const S ip = inner(cols_[static_cast<std::size_t>(i)], col);
      gram_(i, t) = ip;
      if constexpr (is_complex_scalar<S>::value)
        gram_(t, i) = std::conj(ip);
      else
        gram_(t, i) = ip;
    }
    gram_(t, t) = inner(col, col);
    cols_.push_back(std::move(col));
  }

  S inner(const Column& a, const Column& b) const {
    if (std::holds_alternative<KronVector<S>>(a) && std::holds_alternative<KronVector<S>>(b))
      return kron_inner(std::get<KronVector<S>>(a), std::get<KronVector<S>>(b));
    const Vec<S> da = expanded(a);
    const Vec<S> db = expanded(b);
    return da.dot(db);
  }

  Vec<S> expanded(const Column& c) const {
    if (std::holds_alternative<Vec<S>>(c)) return std::get<Vec<S>>(c);
    return kron_expand(std::get<KronVector<S>>(c), cap_);
  }

  std::size_t dim_;
  std::size_t cap_;
  std::vector<Column> cols_;
  Mat<S> gram_;
};

struct ProjectionEnergy {
  std::vector<double> per_column;  ///< |<x^(i), u>|^2 over the kept orthonormal columns
  double total = 0.0;              ///< ||P u||^2
  std::vector<int> dropped;        ///< indices of dependent columns that were dropped
};

/// Gram-Schmidt orthonormalization of V's columns in order, evaluated in the
/// t-dimensional coefficient space so Kronecker columns never expand. Uses
/// modified Gram-Schmidt with one re-orthogonalization pass whenever a norm
/// drops below 1/sqrt(2) of its pre-projection value. Dependent columns are
/// dropped and recorded.
///
/// Checks the conditioning bound |<x^(i), u>|^2 <= kappa(V)^2 ||V^H u||^2
/// (within 1e-9) on every kept column and throws std::logic_error if violated.
template <class S>
ProjectionEnergy projection_energy(const QueryMatrix<S>& v, const KronVector<S>& u) {
  const int t = v.count();
  if (t < 1) throw std::invalid_argument("projection_energy: empty query matrix");
  const Mat<S>& g = v.gram();
  const Vec<S> s = v.dots(u);  // <v_j, u>

  std::vector<Vec<S>> coeff;  // x_k = V * coeff[k]
  ProjectionEnergy out;
  for (int i = 0; i < t; ++i) {
    Vec<S> c = Vec<S>::Zero(t);
    c(i) = S(1);
    const double col_norm = std::sqrt(std::abs(g(i, i)));
    double norm = col_norm;
    for (int pass = 0; pass < 2; ++pass) {
      const double before = norm;
      for (const auto& ck : coeff) {
        const S r = (ck.adjoint() * (g * c))(0);
        c -= r * ck;
      }
      norm = std::sqrt(std::max(0.0, std::real((c.adjoint() * (g * c))(0))));
      if (norm >= before / std::sqrt(2.0)) break;  // re-orthogonalize otherwise
    }
    if (norm <= 1e-12 * std::max(1.0, col_norm)) {
      out.dropped.push_back(i);
      continue;
    }
    c /= norm;
    coeff.push_back(std::move(c));
  }

  const double kappa = v.condition_number();
  const double s_sq = s.squaredNorm();
  for (const auto& ck : coeff) {
    const S dot = (ck.adjoint() * s)(0);
    const double energy = std::norm(dot);
    if (std::isfinite(kappa) && energy > kappa * kappa * s_sq + 1e-9)
      throw std::logic_error(
          "projection_energy: conditioning bound violated (per-column energy "
          "exceeds kappa^2 ||V^H u||^2)");
    out.per_column.push_back(energy);
    out.total += energy;
  }
  return out;
}

}  // namespace kronquery
