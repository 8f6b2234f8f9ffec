#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "linop.hpp"

namespace expflow {

/// Highest φ index any evaluator accepts.
inline constexpr int kMaxPhiIndex = 12;

namespace detail {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

template <class T>
bool finite_scalar(const T& z) {
  if constexpr (is_complex_v<T>) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  } else {
    return std::isfinite(z);
  }
}

}  // namespace detail

/// φ_k(z) = ∫₀¹ e^{(1-τ)z} τ^{k-1}/(k-1)! dτ, with φ_0 = exp.
///
/// Small arguments (|z| < max(0.5, k)) use the Taylor series
/// Σ_m z^m/(m+k)!, summed until the term drops below 1e-18 of the partial
/// sum. Larger arguments start from e^z and apply φ_{j+1} = (φ_j - 1/j!)/z,
/// which is well conditioned once |z| exceeds the index.
template <class T>
T phi_scalar(int k, T z) {
  if (k < 0 || k > kMaxPhiIndex) {
    throw UnsupportedError("phi index " + std::to_string(k) + " outside [0, " + std::to_string(kMaxPhiIndex) + "]");
  }
  if (!detail::finite_scalar(z)) throw ArgumentError("phi_scalar: non-finite argument");

  const double r = std::abs(z);
  if (r < std::max(0.5, static_cast<double>(k))) {
    T term = T(1.0 / detail::factorial(k));
    T sum = term;
    for (int m = 1; m < 400; ++m) {
      term *= z / static_cast<double>(m + k);
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  T phi = std::exp(z);
  double inv_fact = 1.0;  // 1/j!
  for (int j = 0; j < k; ++j) {
    phi = (phi - T(inv_fact)) / z;
    inv_fact /= static_cast<double>(j + 1);
  }
  return phi;
}

/// One term α·φ_k(c·z) of a coefficient function.
struct PhiTerm {
  int k = 0;
  double alpha = 0.0;
  double scale = 1.0;

  friend bool operator==(const PhiTerm&, const PhiTerm&) = default;
};

/// A finite linear combination Σ α_j φ_{k_j}(c_j z). Scheme coefficient
/// functions (a_ij, b_i, γ_j, ...) are all represented this way. Terms with
/// equal (k, c) are merged on construction.
class PhiCombo {
 public:
  PhiCombo() = default;

  PhiCombo(std::vector<PhiTerm> terms) : terms_(std::move(terms)) { normalize(); }

  /// All terms evaluated at the common argument factor `scale`.
  PhiCombo(std::initializer_list<std::pair<int, double>> terms, double scale = 1.0) {
    for (auto [k, a] : terms) terms_.push_back({k, a, scale});
    normalize();
  }

  static PhiCombo phi(int k, double alpha = 1.0, double scale = 1.0) { return PhiCombo({PhiTerm{k, alpha, scale}}); }

  [[nodiscard]] const std::vector<PhiTerm>& terms() const { return terms_; }
  [[nodiscard]] bool empty() const { return terms_.empty(); }

  [[nodiscard]] int max_index() const {
    int m = 0;
    for (const auto& t : terms_) m = std::max(m, t.k);
    return m;
  }

  /// Distinct argument factors, ascending.
  [[nodiscard]] std::vector<double> scales() const {
    std::vector<double> s;
    for (const auto& t : terms_) s.push_back(t.scale);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  }

  /// Σ α/k!, the value at z = 0.
  [[nodiscard]] double value_at_zero() const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.alpha / detail::factorial(t.k);
    return v;
  }

  template <class T>
  [[nodiscard]] T operator()(T z) const {
    T v = T(0);
    for (const auto& t : terms_) v += t.alpha * phi_scalar(t.k, T(t.scale * z));
    return v;
  }

  PhiCombo& operator+=(const PhiCombo& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    normalize();
    return *this;
  }
  friend PhiCombo operator+(PhiCombo a, const PhiCombo& b) { return a += b; }
  friend PhiCombo operator*(double f, PhiCombo a) {
    for (auto& t : a.terms_) t.alpha *= f;
    a.normalize();
    return a;
  }
  friend PhiCombo operator-(PhiCombo a, const PhiCombo& b) { return a + (-1.0) * b; }
  friend bool operator==(const PhiCombo&, const PhiCombo&) = default;

 private:
  void normalize() {
    for (const auto& t : terms_) {
      if (t.k < 0 || t.k > kMaxPhiIndex) throw UnsupportedError("phi index out of range in combination");
    }
    std::sort(terms_.begin(), terms_.end(),
              [](const PhiTerm& a, const PhiTerm& b) { return std::tie(a.scale, a.k) < std::tie(b.scale, b.k); });
    std::vector<PhiTerm> merged;
    for (const auto& t : terms_) {
      if (!merged.empty() && merged.back().k == t.k && merged.back().scale == t.scale) {
        merged.back().alpha += t.alpha;
      } else {
        merged.push_back(t);
      }
    }
    std::erase_if(merged, [](const PhiTerm& t) { return t.alpha == 0.0; });
    terms_ = std::move(merged);
  }

  std::vector<PhiTerm> terms_;
};

template <class T>
T phi_combo_scalar(const PhiCombo& combo, T z) {
  return combo(z);
}

// ---------------------------------------------------------------------------
// Dense matrix exponential: scaling and squaring with diagonal Padé
// approximants of degree 3, 5, 7, 9 or 13, chosen from the 1-norm.

namespace detail {

template <class S>
Matrix<S> pade_solve(const Matrix<S>& U, const Matrix<S>& V) {
  Matrix<S> P = V + U;
  Matrix<S> Q = V - U;
  return Q.partialPivLu().solve(P);
}

}  // namespace detail

template <Scalar S>
Matrix<S> expm_dense(const Matrix<S>& A) {
  using Mat = Matrix<S>;
  if (A.rows() != A.cols()) throw ArgumentError("expm_dense: matrix must be square");
  const Index n = A.rows();
  if (n == 0) return Mat();
  if (!A.allFinite()) throw NumericalError("expm_dense: non-finite input");

  const Mat I = Mat::Identity(n, n);
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();

  static constexpr std::array<double, 4> theta{1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                               2.097847961257068e0};
  static constexpr std::array<int, 4> degrees{3, 5, 7, 9};
  static const std::array<std::vector<double>, 4> coeffs{
      std::vector<double>{120., 60., 12., 1.},
      std::vector<double>{30240., 15120., 3360., 420., 30., 1.},
      std::vector<double>{17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.},
      std::vector<double>{17643225600., 8821612800., 2075673600., 302702400., 30270240., 2162160., 110880., 3960.,
                          90., 1.}};

  Mat result;
  bool done = false;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (norm1 <= theta[i]) {
      const auto& b = coeffs[i];
      const int m = degrees[i];
      Mat A2 = A * A;
      Mat Apow = I;
      Mat Usum = b[1] * I;
      Mat Vsum = b[0] * I;
      for (int j = 2; j <= m; j += 2) {
        Apow = Apow * A2;
        Usum += b[j + 1] * Apow;
        Vsum += b[j] * Apow;
      }
      result = detail::pade_solve<S>(A * Usum, Vsum);
      done = true;
      break;
    }
  }
  if (!done) {
    static constexpr double theta13 = 5.371920351148152;
    static constexpr std::array<double, 14> b{64764752532480000., 32382376266240000., 7771770303897600.,
                                              1187353796428800.,  129060195264000.,   10559470521600.,
                                              670442572800.,      33522128640.,       1323241920.,
                                              40840800.,          960960.,            16380.,
                                              182.,               1.};
    int s = 0;
    if (norm1 > theta13) s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    Mat As = A / std::pow(2.0, s);
    Mat A2 = As * As, A4 = A2 * A2, A6 = A4 * A2;
    Mat U = As * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    Mat V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    result = detail::pade_solve<S>(U, V);
    for (int k = 0; k < s; ++k) result = result * result;
  }
  if (!result.allFinite()) throw NumericalError("expm_dense: overflow in matrix exponential");
  return result;
}

// ---------------------------------------------------------------------------
// Symmetric eigen-decomposition for the diagonalization path.

struct SymmetricEigen {
  Vector<double> values;
  Matrix<double> vectors;  // columns are orthonormal eigenvectors
};

/// M = QΛQᵀ for real symmetric M (Eigen's tridiagonal QR solver).
inline SymmetricEigen symmetric_eigen(const Matrix<double>& M) {
  if (M.rows() != M.cols()) throw ArgumentError("symmetric_eigen: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(M);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric_eigen: no convergence");
  return SymmetricEigen{es.eigenvalues(), es.eigenvectors()};
}

// ---------------------------------------------------------------------------
// φ_k(hM)·B for a block of vectors.

/// Evaluates φ_0(hM)B, ..., φ_kmax(hM)B through one exponential of the
/// augmented matrix [[hM, B, 0, …], [0, 0, I, …], …, [0, …, 0]] whose k-th
/// top-right block column is φ_k(hM)B.
template <Scalar S>
std::vector<Matrix<S>> phi_block_augmented(const Matrix<S>& M, double h, const Matrix<S>& B, int kmax) {
  const Index d = M.rows(), p = B.cols();
  if (M.cols() != d || B.rows() != d) throw ArgumentError("phi_dense_block: dimension mismatch");
  if (kmax < 0 || kmax > kMaxPhiIndex) throw UnsupportedError("phi_dense_block: kmax outside supported range");

  std::vector<Matrix<S>> out;
  out.reserve(kmax + 1);
  if (kmax == 0) {
    out.push_back(expm_dense<S>(Matrix<S>(h * M)) * B);
    return out;
  }
  // Normalizing B keeps the augmented norm close to ‖hM‖.
  const double bnorm = B.cwiseAbs().maxCoeff();
  const double bscale = bnorm > 0 ? bnorm : 1.0;
  const Index n = d + kmax * p;
  Matrix<S> W = Matrix<S>::Zero(n, n);
  W.topLeftCorner(d, d) = h * M;
  W.block(0, d, d, p) = B / bscale;
  for (int j = 1; j < kmax; ++j) W.block(d + (j - 1) * p, d + j * p, p, p).setIdentity();
  Matrix<S> E = expm_dense<S>(W);
  out.push_back(E.topLeftCorner(d, d) * B);
  for (int j = 1; j <= kmax; ++j) out.push_back(bscale * E.block(0, d + (j - 1) * p, d, p));
  return out;
}

/// Same quantities from an orthonormal eigen-decomposition M = QΛQᵀ.
template <Scalar S>
std::vector<Matrix<S>> phi_block_eigen(const SymmetricEigen& eig, double h, const Matrix<S>& B, int kmax) {
  std::vector<Matrix<S>> out;
  const Index d = eig.values.size();
  Matrix<S> QtB = eig.vectors.transpose().template cast<S>() * B;
  for (int k = 0; k <= kmax; ++k) {
    Vector<S> f(d);
    for (Index i = 0; i < d; ++i) f(i) = S(phi_scalar(k, h * eig.values(i)));
    out.push_back(eig.vectors.template cast<S>() * (f.asDiagonal() * QtB));
  }
  return out;
}

/// φ_k(hM)·B for k = 0..kmax. Diagonal operators are evaluated entrywise,
/// real symmetric ones through an eigen-decomposition (falling back to
/// the augmented exponential on non-convergence), everything else through the
/// augmented exponential.
template <Scalar S>
std::vector<Matrix<S>> phi_dense_block(const Matrix<S>& M, double h, const Matrix<S>& B, int kmax,
                                       Structure structure = Structure::none, Index cap = kDefaultProbeCap) {
  if (M.rows() > cap) {
    throw UnsupportedError("phi_dense_block: dimension " + std::to_string(M.rows()) + " above cap " +
                           std::to_string(cap));
  }
  if (kmax < 0 || kmax > kMaxPhiIndex) throw UnsupportedError("phi_dense_block: kmax outside supported range");
  if (B.rows() != M.rows()) throw ArgumentError("phi_dense_block: dimension mismatch");
  if (structure == Structure::diagonal) {
    std::vector<Matrix<S>> out;
    for (int k = 0; k <= kmax; ++k) {
      Vector<S> f(M.rows());
      for (Index i = 0; i < M.rows(); ++i) f(i) = phi_scalar(k, S(h * M(i, i)));
      out.push_back(f.asDiagonal() * B);
    }
    return out;
  }
  if constexpr (!is_complex_v<S>) {
    if (structure == Structure::symmetric) {
      try {
        return phi_block_eigen<S>(symmetric_eigen(M), h, B, kmax);
      } catch (const NumericalError&) {
        // augmented path below
      }
    }
  }
  return phi_block_augmented<S>(M, h, B, kmax);
}

// ---------------------------------------------------------------------------

/// Memoized full matrices φ_0(hA), …, φ_kmax(hA) for a constant operator. One
/// instance belongs to one solver; a change of step size or operator evicts
/// the stored entries.
template <Scalar S>
class PhiCache {
 public:
  using Mat = Matrix<S>;

  struct Key {
    double h = 0.0;
    std::uint64_t op_id = 0;
    int kmax = 0;
    friend auto operator<=>(const Key&, const Key&) = default;
  };

  /// Returns the cached matrices for (h, op, kmax), computing them on a miss.
  const std::vector<Mat>& get(const Operator<S>& op, double h, int kmax, Index cap = kDefaultProbeCap) {
    if (op.id() != op_id_) {
      entries_.clear();
      op_id_ = op.id();
    }
    // an entry with a larger kmax serves smaller requests
    for (auto& [key, mats] : entries_) {
      if (key.h == h && key.op_id == op.id() && key.kmax >= kmax) {
        ++uses_;
        return mats;
      }
    }
    std::erase_if(entries_, [&](const auto& e) { return e.first.h == h; });
    Mat M = op.materialize(cap);
    Mat I = Mat::Identity(M.rows(), M.cols());
    auto mats = phi_dense_block<S>(M, h, I, kmax, op.structure(), cap);
    ++computations_;
    ++uses_;
    // a handful of argument factors per step are live at once
    if (entries_.size() >= 16) entries_.clear();
    return entries_.emplace(Key{h, op.id(), kmax}, std::move(mats)).first->second;
  }

  [[nodiscard]] int computations() const { return computations_; }
  [[nodiscard]] int uses() const { return uses_; }
  void clear() {
    entries_.clear();
    op_id_ = 0;
  }

 private:
  std::map<Key, std::vector<Mat>> entries_;
  std::uint64_t op_id_ = 0;
  int computations_ = 0;
  int uses_ = 0;
};

}  // namespace expflow
