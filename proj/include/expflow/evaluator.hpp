#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "krylov.hpp"
#include "linop.hpp"
#include "phifun.hpp"

namespace expflow {

/// Matrix-function backend used by the integrators. A solve drives it through
/// four phases: init (once), register_jobs (once, with the labels the
/// integrator will use), init_step (whenever the operator may have changed)
/// and evaluate. evaluate may return h_out < |h| to force a smaller step; the
/// values then correspond to h_out (with the sign of h).
template <Scalar S = double>
class MatFunEvaluator {
 public:
  using Vec = Vector<S>;
  using WarningSink = std::function<void(const std::string&)>;

  struct Result {
    std::vector<Vec> values;
    double h_out = 0.0;  // magnitude
  };

  virtual ~MatFunEvaluator() = default;

  virtual void init(Index dim) { (void)dim; }
  virtual void register_jobs(const std::vector<std::string>& labels) { (void)labels; }
  /// `constant` marks an operator that stays fixed for the whole solve.
  virtual void init_step(const Operator<S>& op, bool constant) = 0;
  /// combo(h·M)·v for every combo (h signed, combos non-empty).
  virtual Result evaluate(const std::string& label, const Vec& v, double h, std::span<const PhiCombo> combos,
                          double tol, bool allow_reduction) = 0;

  [[nodiscard]] virtual const KrylovStats& stats() const { return stats_; }
  void set_warning_sink(WarningSink w) { warn_ = std::move(w); }

 protected:
  KrylovStats stats_;
  WarningSink warn_;
};

namespace detail {

/// Distinct argument factors of a combo list with the largest φ index each.
inline std::map<double, int> scale_kmax(std::span<const PhiCombo> combos) {
  std::map<double, int> m;
  for (const auto& c : combos)
    for (const auto& t : c.terms()) {
      auto [it, inserted] = m.emplace(t.scale, t.k);
      if (!inserted) it->second = std::max(it->second, t.k);
    }
  return m;
}

}  // namespace detail

/// Dense evaluation: full φ matrices cached for constant operators, otherwise
/// per-vector evaluation on the materialized operator (eigen-decomposition for
/// symmetric/diagonal structure, augmented exponential otherwise).
template <Scalar S = double>
class DirectEvaluator : public MatFunEvaluator<S> {
 public:
  using typename MatFunEvaluator<S>::Vec;
  using typename MatFunEvaluator<S>::Result;

  explicit DirectEvaluator(Index cap = kDefaultProbeCap) : cap_(cap) {}

  void init(Index dim) override {
    if (dim > cap_) {
      throw UnsupportedError("direct matrix functions: dimension " + std::to_string(dim) + " above cap " +
                             std::to_string(cap_) + "; use the arnoldi backend");
    }
  }

  void init_step(const Operator<S>& op, bool constant) override {
    op_ = op;
    constant_ = constant;
  }

  Result evaluate(const std::string& label, const Vec& v, double h, std::span<const PhiCombo> combos, double tol,
                  bool allow_reduction) override {
    (void)label;
    (void)tol;
    (void)allow_reduction;
    this->stats_.matfun_evals += static_cast<long>(combos.size());
    Result r{{}, std::abs(h)};
    if (v.norm() == 0.0) {
      r.values.assign(combos.size(), Vec::Zero(v.size()));
      return r;
    }
    std::map<double, std::vector<Vec>> phis;  // scale -> φ_k(c h M) v
    for (const auto& [scale, kmax] : detail::scale_kmax(combos)) {
      std::vector<Vec> cols;
      if (constant_) {
        const auto& mats = cache_.get(op_, scale * h, kmax, cap_);
        for (int k = 0; k <= kmax; ++k) cols.push_back(mats[k] * v);
      } else {
        prepare();
        std::vector<Matrix<S>> blocks;
        if (eig_) {
          if constexpr (!is_complex_v<S>) blocks = phi_block_eigen<S>(*eig_, scale * h, Matrix<S>(v), kmax);
        } else {
          blocks = phi_dense_block<S>(M_, scale * h, Matrix<S>(v), kmax,
                                      op_.structure() == Structure::diagonal ? Structure::diagonal : Structure::none,
                                      cap_);
        }
        for (auto& b : blocks) cols.push_back(b.col(0));
      }
      phis.emplace(scale, std::move(cols));
    }
    for (const auto& c : combos) {
      Vec y = Vec::Zero(v.size());
      for (const auto& t : c.terms()) y += t.alpha * phis.at(t.scale)[t.k];
      r.values.push_back(std::move(y));
    }
    return r;
  }

  [[nodiscard]] const PhiCache<S>& cache() const { return cache_; }

 private:
  void prepare() {
    if (mat_id_ == op_.id()) return;
    M_ = op_.materialize(cap_);
    eig_.reset();
    if constexpr (!is_complex_v<S>) {
      if (op_.structure() == Structure::symmetric) {
        try {
          eig_ = symmetric_eigen(M_);
        } catch (const NumericalError&) {
          eig_.reset();
        }
      }
    }
    mat_id_ = op_.id();
  }

  Index cap_;
  Operator<S> op_;
  bool constant_ = false;
  PhiCache<S> cache_;
  std::uint64_t mat_id_ = 0;
  Matrix<S> M_;
  std::optional<SymmetricEigen> eig_;
};

/// Arnoldi evaluation with error control, step reduction and recycling.
template <Scalar S = double>
class ArnoldiEvaluator : public MatFunEvaluator<S> {
 public:
  using typename MatFunEvaluator<S>::Vec;
  using typename MatFunEvaluator<S>::Result;

  explicit ArnoldiEvaluator(int max_dim = 36) : max_dim_(max_dim) {
    if (max_dim < 1) throw ConfigError("krylov max dimension must be positive");
  }

  void init_step(const Operator<S>& op, bool constant) override {
    (void)constant;
    if (op_.valid() && op.id() != op_.id()) kr_.clear_store();
    op_ = op;
  }

  Result evaluate(const std::string& label, const Vec& v, double h, std::span<const PhiCombo> combos, double tol,
                  bool allow_reduction) override {
    if (!installed_) {
      kr_ = KrylovApproximator<S>([this](const std::string& w) {
        if (this->warn_) this->warn_(w);
      });
      installed_ = true;
    }
    auto res = kr_.approximate(op_, v, h, combos, tol, max_dim_, label, allow_reduction);
    return Result{std::move(res.values), std::abs(res.h_out)};
  }

  [[nodiscard]] const KrylovStats& stats() const override { return kr_.stats(); }

 private:
  int max_dim_;
  Operator<S> op_;
  KrylovApproximator<S> kr_;
  bool installed_ = false;
};

}  // namespace expflow
