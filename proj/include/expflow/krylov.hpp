#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "linop.hpp"
#include "phifun.hpp"

namespace expflow {

/// Labels that may appear in the "maximal dimensions" statistics line, in
/// display order. F1 is F(t_n,u_n), v is ∂F/∂t, D2/D3 the Rosenbrock stage
/// differences, Y·plusA the Runge-Kutta stage vectors, GDiff· the backward
/// differences and GDiffInit· the forward differences of the startup window.
inline const std::vector<std::string>& krylov_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> l{"F1", "v", "D2", "D3"};
    for (int i = 1; i <= 5; ++i) l.push_back("Y" + std::to_string(i) + "plusA");
    for (int i = 1; i <= 6; ++i) l.push_back("GDiff" + std::to_string(i));
    for (int i = 1; i <= 6; ++i) l.push_back("GDiffInit" + std::to_string(i));
    return l;
  }();
  return labels;
}

inline bool is_krylov_label(const std::string& label) {
  const auto& l = krylov_labels();
  return std::find(l.begin(), l.end(), label) != l.end();
}

struct KrylovStats {
  long matfun_evals = 0;
  long subspaces_built = 0;
  long total_krylov_steps = 0;
  long step_reductions = 0;
  long recycled_subspaces = 0;
  long warnings = 0;
  std::map<std::string, int> max_dims;

  void note_dim(const std::string& label, int m) {
    auto& slot = max_dims[label];
    slot = std::max(slot, m);
  }

  KrylovStats& operator+=(const KrylovStats& o) {
    matfun_evals += o.matfun_evals;
    subspaces_built += o.subspaces_built;
    total_krylov_steps += o.total_krylov_steps;
    step_reductions += o.step_reductions;
    recycled_subspaces += o.recycled_subspaces;
    warnings += o.warnings;
    for (const auto& [k, v] : o.max_dims) note_dim(k, v);
    return *this;
  }
};

/// Renders the statistics block. `preamble` lines (step counters and the
/// like) are printed between the header and the Krylov fields.
inline std::string format_statistics(const KrylovStats& s,
                                     const std::vector<std::pair<std::string, long>>& preamble = {}) {
  std::ostringstream os;
  auto line = [&](const std::string& name, long value) {
    os << std::left << std::setw(51) << (name + ":") << value << '\n';
  };
  os << "statistics:\n";
  for (const auto& [name, value] : preamble) line(name, value);
  line("number of matrix function evaluation times vector", s.matfun_evals);
  line("number of Krylov subspaces", s.subspaces_built);
  line("total number of Krylov steps", s.total_krylov_steps);
  line("number of step size reductions due to Krylov", s.step_reductions);
  line("number of recycled subspaces", s.recycled_subspaces);
  os << "maximal dimensions of subspaces:   ";
  bool first = true;
  for (const auto& label : krylov_labels()) {
    auto it = s.max_dims.find(label);
    if (it == s.max_dims.end()) continue;
    os << (first ? " " : ", ") << label << ": " << it->second;
    first = false;
  }
  for (const auto& [label, m] : s.max_dims) {
    if (is_krylov_label(label)) continue;
    os << (first ? " " : ", ") << label << ": " << m;
    first = false;
  }
  if (first) os << " none";
  os << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

/// Orthonormal Krylov basis V (d × (m+1)) and Hessenberg matrix
/// H ((m+1) × m) satisfying M·V_m = V_m·H_m + H(m, m-1)·v_{m+1}·e_mᵀ.
template <Scalar S>
struct KrylovBasis {
  Matrix<S> V;
  Matrix<S> H;
  double beta = 0.0;
  int m = 0;
  bool exact = false;  // happy breakdown: span(V_m) is invariant
  std::string label;
  Vector<S> seed;
  std::uint64_t op_id = 0;

  [[nodiscard]] Matrix<S> Vm() const { return V.leftCols(m); }
  [[nodiscard]] Matrix<S> Hm() const { return H.topLeftCorner(m, m); }
  [[nodiscard]] double subdiagonal() const { return m == 0 ? 0.0 : std::abs(H(m, m - 1)); }
};

template <Scalar S>
KrylovBasis<S> krylov_seed(const Operator<S>& op, const Vector<S>& v, std::string label = {}) {
  if (v.size() != op.dim()) throw ArgumentError("krylov: seed vector has wrong length");
  const double beta = v.norm();
  if (beta == 0.0) throw ArgumentError("krylov: zero seed vector");
  KrylovBasis<S> b;
  b.V.resize(op.dim(), 1);
  b.V.col(0) = v / beta;
  b.beta = beta;
  b.label = std::move(label);
  b.seed = v;
  b.op_id = op.id();
  return b;
}

/// Extends the basis to `target_m` columns with modified Gram–Schmidt and one
/// reorthogonalization pass. Stops early on happy breakdown
/// (H(j+1,j) ≤ 1e-14·‖H‖_F) and marks the basis exact. Returns the number of
/// Arnoldi steps taken.
template <Scalar S>
int arnoldi_extend(const Operator<S>& op, KrylovBasis<S>& basis, int target_m) {
  const Index d = op.dim();
  if (basis.beta == 0.0 || basis.V.cols() == 0) throw ArgumentError("arnoldi_extend: zero seed vector");
  target_m = static_cast<int>(std::min<Index>(target_m, d));
  if (basis.exact || basis.m >= target_m) return 0;

  if (basis.V.cols() < target_m + 1) basis.V.conservativeResize(d, target_m + 1);
  {
    const Index old_r = basis.H.rows(), old_c = basis.H.cols();
    Matrix<S> H = Matrix<S>::Zero(target_m + 1, target_m);
    if (old_r > 0 && old_c > 0) H.topLeftCorner(old_r, old_c) = basis.H;
    basis.H = std::move(H);
  }
  int steps = 0;
  double hnorm2 = basis.H.squaredNorm();
  for (int j = basis.m; j < target_m; ++j) {
    Vector<S> w = op.apply(Vector<S>(basis.V.col(j)));
    const double wnorm = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) {
        const S hij = basis.V.col(i).dot(w);
        w -= hij * basis.V.col(i);
        basis.H(i, j) += hij;
      }
    }
    const double hn = w.norm();
    basis.H(j + 1, j) = S(hn);
    for (int i = 0; i <= j + 1; ++i) hnorm2 += std::norm(basis.H(i, j));
    ++steps;
    basis.m = j + 1;
    if (hn <= 1e-14 * std::max(std::sqrt(hnorm2), wnorm) || hn == 0.0) {
      basis.exact = true;
      basis.H(j + 1, j) = S(0);
      break;
    }
    basis.V.col(j + 1) = w / hn;
  }
  return steps;
}

namespace detail {

/// φ_k(hH_m)e_1 for k = 0..kmax as columns.
template <Scalar S>
Matrix<S> small_phi_columns(const KrylovBasis<S>& b, double h, int kmax) {
  Matrix<S> e1 = Matrix<S>::Zero(b.m, 1);
  e1(0, 0) = S(1);
  auto blocks = phi_dense_block<S>(b.Hm(), h, e1, kmax, Structure::none, 100000);
  Matrix<S> out(b.m, kmax + 1);
  for (int k = 0; k <= kmax; ++k) out.col(k) = blocks[k].col(0);
  return out;
}

template <Scalar S>
double estimate_from_columns(const KrylovBasis<S>& b, double h, int k, const Matrix<S>& cols) {
  if (b.exact || b.m == 0) return 0.0;
  return b.beta * b.subdiagonal() * std::abs(h) * std::abs(cols(b.m - 1, k + 1));
}

}  // namespace detail

/// A-posteriori error estimate for φ_k(hM)v ≈ β·V_m·φ_k(hH_m)e_1: the
/// leading term β·|h|·H(m+1,m)·|e_mᵀφ_{k+1}(hH_m)e_1| of the error expansion.
/// Exactly zero on happy breakdown.
template <Scalar S>
double error_estimate(const KrylovBasis<S>& basis, double h, int k) {
  if (basis.m < 1) throw ArgumentError("error_estimate: empty basis");
  if (basis.exact) return 0.0;
  auto cols = detail::small_phi_columns(basis, h, k + 1);
  return detail::estimate_from_columns(basis, h, k, cols);
}

template <Scalar S>
struct KrylovResult {
  std::vector<Vector<S>> values;
  double h_out = 0.0;
  int dim = 0;
  bool converged = true;
  bool recycled = false;
  double estimate = 0.0;
};

/// Arnoldi approximation of φ-combination actions with subspace recycling.
/// One instance belongs to one solve.
template <Scalar S>
class KrylovApproximator {
 public:
  using Vec = Vector<S>;
  using WarningSink = std::function<void(const std::string&)>;

  KrylovApproximator() = default;
  explicit KrylovApproximator(WarningSink warn) : warn_(std::move(warn)) {}

  /// Approximates combo(hM)·v for every combo in one Krylov subspace. The
  /// dimension grows until every combination's estimate is below `tol`. If
  /// `max_dim` is reached first and `allow_reduction` is set, the returned
  /// h_out < h is chosen so the estimate at the final dimension meets `tol`
  /// and the values correspond to h_out; otherwise a warning is emitted and
  /// the best available approximation at h is returned.
  KrylovResult<S> approximate(const Operator<S>& op, const Vec& v, double h, std::span<const PhiCombo> combos,
                              double tol, int max_dim, const std::string& label, bool allow_reduction = true) {
    if (combos.empty()) throw ArgumentError("krylov approximate: no combinations requested");
    if (!(tol > 0)) throw ArgumentError("krylov approximate: tolerance must be positive");
    if (v.size() != op.dim()) throw ArgumentError("krylov approximate: vector has wrong length");
    if (max_dim < 1) throw ArgumentError("krylov approximate: max_dim must be positive");

    KrylovResult<S> res;
    res.h_out = h;
    stats_.matfun_evals += static_cast<long>(combos.size());
    if (v.norm() == 0.0) {
      res.values.assign(combos.size(), Vec::Zero(op.dim()));
      return res;
    }

    KrylovBasis<S>* basis = recycle_lookup(op, v, label);
    if (basis) {
      res.recycled = true;
    } else {
      auto& slot = store_[label];
      slot = krylov_seed(op, v, label);
      basis = &slot;
      ++stats_.subspaces_built;
    }

    const int cap = static_cast<int>(std::min<Index>(max_dim, op.dim()));
    int kmin = kMaxPhiIndex;
    for (const auto& c : combos)
      for (const auto& t : c.terms()) kmin = std::min(kmin, std::max(t.k, 1));
    if (kmin == kMaxPhiIndex) kmin = 1;

    double est = 0.0;
    auto estimate = [&](double hh) {
      evaluate_small(*basis, hh, combos);
      return combo_estimate(*basis, hh, combos);
    };

    int m = std::max(basis->m, 1);
    for (;;) {
      if (basis->m < m) stats_.total_krylov_steps += arnoldi_extend(op, *basis, m);
      est = estimate(h);
      if (est <= tol || basis->exact || basis->m >= cap) break;
      const int next = basis->m < 12 ? basis->m + 1 : basis->m + 3;
      m = std::min(next, cap);
    }
    res.dim = basis->m;
    stats_.note_dim(label, basis->m);

    if (est > tol) {
      if (allow_reduction) {
        double hh = h;
        for (int it = 0; it < 200 && est > tol; ++it) {
          const double factor = std::max(0.25, std::pow(tol / est, 1.0 / kmin));
          hh *= factor;
          est = estimate(hh);
        }
        res.h_out = hh;
        ++stats_.step_reductions;
      } else {
        res.converged = false;
        ++stats_.warnings;
        if (warn_) {
          std::ostringstream os;
          os << "krylov: no convergence for '" << label << "' at maximal dimension " << cap << " (estimate " << est
             << ", tolerance " << tol << ")";
          warn_(os.str());
        }
      }
    }
    res.estimate = est;
    res.values = assemble(*basis, combos);
    return res;
  }

  /// The stored basis for `label` if it was built for the same operator and
  /// seed vector; counts a recycled subspace on a hit.
  KrylovBasis<S>* recycle_lookup(const Operator<S>& op, const Vec& v, const std::string& label) {
    auto it = store_.find(label);
    if (it == store_.end()) return nullptr;
    auto& b = it->second;
    if (b.op_id != op.id() || b.seed.size() != v.size() || !(b.seed.array() == v.array()).all()) return nullptr;
    ++stats_.recycled_subspaces;
    return &b;
  }

  /// Drops every stored basis (e.g. when the operator changes for good).
  void clear_store() { store_.clear(); }

  [[nodiscard]] const KrylovStats& stats() const { return stats_; }
  KrylovStats& stats() { return stats_; }

 private:
  // Small-problem φ columns for each argument factor at the last evaluated h.
  struct SmallEval {
    double scale;
    Matrix<S> cols;
  };

  void evaluate_small(const KrylovBasis<S>& b, double h, std::span<const PhiCombo> combos) {
    std::map<double, int> kmax;
    for (const auto& c : combos)
      for (const auto& t : c.terms()) {
        auto& slot = kmax[t.scale];
        slot = std::max(slot, t.k);
      }
    small_.clear();
    for (const auto& [scale, k] : kmax) {
      small_.push_back({scale, detail::small_phi_columns(b, scale * h, std::min(k + 1, kMaxPhiIndex))});
    }
  }

  const Matrix<S>& columns_for(double scale) const {
    for (const auto& s : small_)
      if (s.scale == scale) return s.cols;
    throw ArgumentError("krylov: internal scale lookup failed");
  }

  double combo_estimate(const KrylovBasis<S>& b, double h, std::span<const PhiCombo> combos) const {
    double worst = 0.0;
    for (const auto& c : combos) {
      double e = 0.0;
      for (const auto& t : c.terms()) {
        const auto& cols = columns_for(t.scale);
        if (t.k + 1 < cols.cols()) {
          e += std::abs(t.alpha) * detail::estimate_from_columns(b, t.scale * h, t.k, cols);
        }
      }
      worst = std::max(worst, e);
    }
    return worst;
  }

  std::vector<Vec> assemble(const KrylovBasis<S>& b, std::span<const PhiCombo> combos) const {
    std::vector<Vec> out;
    out.reserve(combos.size());
    const Matrix<S> Vm = b.Vm();
    for (const auto& c : combos) {
      Vec y = Vec::Zero(b.m);
      for (const auto& t : c.terms()) y += t.alpha * columns_for(t.scale).col(t.k);
      out.push_back(b.beta * (Vm * y));
    }
    return out;
  }

  KrylovStats stats_;
  std::map<std::string, KrylovBasis<S>> store_;
  std::vector<SmallEval> small_;
  WarningSink warn_;
};

}  // namespace expflow
