#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace kronquery {

using Real = double;
using Complex = std::complex<double>;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// One Kronecker factor, length n. Real or complex entries.
template <class S>
using FactorVec = Vec<S>;

template <class S>
struct is_complex_scalar : std::false_type {};
template <class T>
struct is_complex_scalar<std::complex<T>> : std::true_type {};

/// Thrown when a dense path would materialize more entries than the cap.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Invalid experiment or distribution configuration (maps to CLI exit 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Default materialization cap: 2^24 entries keeps dense buffers under
/// ~128 MB at 8 bytes per scalar. Dense D x D paths therefore need D <= 4096.
inline constexpr std::size_t kDefaultCap = std::size_t{1} << 24;

/// Expected normalization of a factor. Samplers produce factors matching
/// their tag; operations that care document which they expect.
enum class FactorNorm { Any, Unit, SqrtN };

template <class S>
void check_factor_norm(const FactorVec<S>& f, FactorNorm tag) {
  if (tag == FactorNorm::Unit) {
    if (std::abs(f.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("factor is not unit-normalized");
  } else if (tag == FactorNorm::SqrtN) {
    const double n = static_cast<double>(f.size());
    if (std::abs(f.squaredNorm() - n) > 1e-9 * n)
      throw std::invalid_argument("factor is not sqrt(n)-normalized");
  }
}

/// x = x_1 (x) ... (x) x_q held as its q factors of common length n.
/// The implicit dimension is n^q; nothing is expanded unless asked.
template <class S>
struct KronVector {
  std::vector<FactorVec<S>> factors;

  KronVector() = default;
  explicit KronVector(std::vector<FactorVec<S>> fs) : factors(std::move(fs)) {
    validate();
  }

  int n() const { return factors.empty() ? 0 : static_cast<int>(factors.front().size()); }
  int q() const { return static_cast<int>(factors.size()); }

  /// n^q, saturating at SIZE_MAX on overflow.
  std::size_t dim() const {
    std::size_t d = 1;
    const std::size_t nn = static_cast<std::size_t>(n());
    for (int i = 0; i < q(); ++i) {
      if (nn != 0 && d > std::numeric_limits<std::size_t>::max() / nn)
        return std::numeric_limits<std::size_t>::max();
      d *= nn;
    }
    return d;
  }

  void validate() const {
    if (factors.empty()) throw std::invalid_argument("KronVector: needs q >= 1 factors");
    const auto n0 = factors.front().size();
    if (n0 < 1) throw std::invalid_argument("KronVector: factor length must be >= 1");
    for (const auto& f : factors)
      if (f.size() != n0)
        throw std::invalid_argument("KronVector: factors must share one length");
  }
};

template <class S>
void require_same_shape(const KronVector<S>& u, const KronVector<S>& v) {
  if (u.n() != v.n() || u.q() != v.q())
    throw std::invalid_argument("KronVector shape mismatch: (n,q)=(" +
                                std::to_string(u.n()) + "," + std::to_string(u.q()) +
                                ") vs (" + std::to_string(v.n()) + "," +
                                std::to_string(v.q()) + ")");
}

/// <u, v> with the conjugate-linear first argument; tensorizes as the product
/// of per-factor inner products. Cost O(nq), never O(n^q).
template <class S>
S kron_inner(const KronVector<S>& u, const KronVector<S>& v) {
  require_same_shape(u, v);
  S acc = S(1);
  for (int i = 0; i < u.q(); ++i) acc *= u.factors[i].dot(v.factors[i]);
  return acc;
}

/// u^T v without conjugation, the measurement pairing of the finite-alphabet
/// zero-testing model. Identical to kron_inner for real scalars.
template <class S>
S kron_bilinear(const KronVector<S>& u, const KronVector<S>& v) {
  require_same_shape(u, v);
  S acc = S(1);
  for (int i = 0; i < u.q(); ++i)
    acc *= u.factors[i].cwiseProduct(v.factors[i]).sum();
  return acc;
}

/// ||x|| = prod of factor norms.
template <class S>
double kron_norm(const KronVector<S>& v) {
  double acc = 1.0;
  for (const auto& f : v.factors) acc *= f.norm();
  return acc;
}

/// Expand to the n^q-entry dense vector; entry (i_1,..,i_q) in row-major mode
/// order equals prod_j v_j[i_j].
template <class S>
Vec<S> kron_expand(const KronVector<S>& v, std::size_t cap = kDefaultCap) {
  const std::size_t d = v.dim();
  if (d > cap)
    throw CapacityError("kron_expand: dimension " + std::to_string(d) +
                        " exceeds materialization cap " + std::to_string(cap));
  Vec<S> out = Vec<S>::Ones(1);
  for (const auto& f : v.factors) {
    Vec<S> next(out.size() * f.size());
    for (Eigen::Index i = 0; i < out.size(); ++i)
      next.segment(i * f.size(), f.size()) = out(i) * f;
    out.swap(next);
  }
  return out;
}

/// <a, x_1 (x) ... (x) x_q> without expanding the Kronecker side: folds the
/// trailing mode q times. Bilinear (no conjugation). Cost O(D).
template <class S>
S contract_dense_kron(const Vec<S>& a, const KronVector<S>& v) {
  if (static_cast<std::size_t>(a.size()) != v.dim())
    throw std::invalid_argument("contract_dense_kron: dimension mismatch");
  Vec<S> cur = a;
  for (int m = v.q() - 1; m >= 0; --m) {
    const auto& f = v.factors[m];
    const Eigen::Index n = f.size();
    const Eigen::Index rows = cur.size() / n;
    Eigen::Map<const Mat<S>> grid(cur.data(), n, rows);
    Vec<S> next = grid.transpose() * f;
    cur.swap(next);
  }
  return cur(0);
}

/// Order-q tensor over an n-point mode, stored row-major in mode order:
/// index(i_1,..,i_q) = ((i_1*n + i_2)*n + ...) + i_q.
template <class S>
struct DenseTensor {
  int n = 0;
  int q = 0;
  Vec<S> entries;

  static DenseTensor zeros(int n, int q, std::size_t cap = kDefaultCap) {
    DenseTensor t;
    t.n = n;
    t.q = q;
    const std::size_t d = pow_dim(n, q);
    if (d > cap) throw CapacityError("DenseTensor: n^q exceeds cap");
    t.entries = Vec<S>::Zero(static_cast<Eigen::Index>(d));
    return t;
  }

  static std::size_t pow_dim(int n, int q) {
    std::size_t d = 1;
    for (int i = 0; i < q; ++i) {
      if (d > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(n))
        return std::numeric_limits<std::size_t>::max();
      d *= static_cast<std::size_t>(n);
    }
    return d;
  }

  void validate() const {
    if (n < 1 || q < 0) throw std::invalid_argument("DenseTensor: invalid (n,q)");
    if (static_cast<std::size_t>(entries.size()) != pow_dim(n, q))
      throw std::invalid_argument("DenseTensor: entry count must equal n^q");
  }
};

/// Tensor from an expanded Kronecker vector.
template <class S>
DenseTensor<S> tensor_from_kron(const KronVector<S>& v, std::size_t cap = kDefaultCap) {
  DenseTensor<S> t;
  t.n = v.n();
  t.q = v.q();
  t.entries = kron_expand(v, cap);
  return t;
}

/// Modal product T x_mode w: contracts the mode-`mode` fibers (1-based)
/// against w, dropping the order by one. Bilinear in w.
template <class S>
DenseTensor<S> modal_product(const DenseTensor<S>& t, int mode, const FactorVec<S>& w) {
  t.validate();
  if (mode < 1 || mode > t.q) throw std::invalid_argument("modal_product: mode out of range");
  if (w.size() != t.n) throw std::invalid_argument("modal_product: fiber length mismatch");
  const Eigen::Index n = t.n;
  Eigen::Index inner = 1;
  for (int i = 0; i < t.q - mode; ++i) inner *= n;
  const Eigen::Index outer = t.entries.size() / (inner * n);
  DenseTensor<S> out;
  out.n = t.n;
  out.q = t.q - 1;
  out.entries = Vec<S>::Zero(outer * inner);
  for (Eigen::Index o = 0; o < outer; ++o)
    for (Eigen::Index j = 0; j < n; ++j)
      out.entries.segment(o * inner, inner) +=
          w(j) * t.entries.segment((o * n + j) * inner, inner);
  return out;
}

/// Full contraction <T, u_1 (x) ... (x) u_q> as a chain of modal products.
template <class S>
S contract_full(const DenseTensor<S>& t, const KronVector<S>& v) {
  t.validate();
  if (v.n() != t.n || v.q() != t.q)
    throw std::invalid_argument("contract_full: shape mismatch");
  DenseTensor<S> cur = t;
  while (cur.q > 0) cur = modal_product(cur, cur.q, v.factors[cur.q - 1]);
  return cur.entries(0);
}

/// Frobenius norm of the tensor.
template <class S>
double tensor_norm(const DenseTensor<S>& t) {
  return t.entries.norm();
}

/// Order q >= 1 with n^q == dim, or a dimension error when no such q exists.
inline int infer_order(std::size_t dim, int n) {
  if (n < 2) {
    if (n == 1 && dim == 1) return 1;
    throw std::invalid_argument("infer_order: needs n >= 2");
  }
  std::size_t d = 1;
  int q = 0;
  while (d < dim) {
    if (d > dim / static_cast<std::size_t>(n)) break;
    d *= static_cast<std::size_t>(n);
    ++q;
  }
  if (d != dim || q == 0)
    throw std::invalid_argument("infer_order: dimension " + std::to_string(dim) +
                                " is not a positive power of n=" + std::to_string(n));
  return q;
}

}  // namespace kronquery
