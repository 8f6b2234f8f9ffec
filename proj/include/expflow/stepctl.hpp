#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "core.hpp"

namespace expflow {

/// Norm applied to the scaled error vector.
class ErrorNorm {
 public:
  enum class Kind { max, rms, custom, gramian };
  using Function = std::function<double(const Vector<double>&)>;

  static ErrorNorm max() { return ErrorNorm(Kind::max); }
  /// Euclidean norm divided by √d.
  static ErrorNorm rms() { return ErrorNorm(Kind::rms); }

  /// User norm. It is probed for norm(0) = 0 and homogeneity by validate().
  static ErrorNorm custom(Function f) {
    if (!f) throw ConfigError("custom norm needs a function");
    ErrorNorm n(Kind::custom);
    n.fn_ = std::move(f);
    return n;
  }

  /// sqrt(wᵀGw) for a symmetric positive definite Gramian G.
  static ErrorNorm gramian(Matrix<double> g) {
    if (g.rows() != g.cols() || g.rows() == 0) throw ConfigError("Gramian must be square and non-empty");
    const double scale = g.cwiseAbs().maxCoeff();
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ConfigError("Gramian is not symmetric");
    std::mt19937 rng(12345);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 10; ++t) {
      Vector<double> v(g.rows());
      for (auto& x : v) x = nd(rng);
      if (!(v.dot(g * v) > 0)) throw ConfigError("Gramian failed the positive-definiteness probe");
    }
    ErrorNorm n(Kind::gramian);
    n.gram_ = std::move(g);
    return n;
  }

  [[nodiscard]] Kind kind() const { return kind_; }

  /// Checks the norm against dimension d (custom: zero and homogeneity probes).
  void validate(Index d) const {
    if (kind_ == Kind::gramian && gram_.rows() != d) {
      throw ConfigError("Gramian dimension " + std::to_string(gram_.rows()) + " does not match problem dimension " +
                        std::to_string(d));
    }
    if (kind_ != Kind::custom) return;
    if (fn_(Vector<double>::Zero(d)) != 0.0) throw ConfigError("custom norm: norm(0) must be 0");
    std::mt19937 rng(4711);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 5; ++t) {
      Vector<double> v(d);
      for (auto& x : v) x = nd(rng);
      const double alpha = (t % 2 ? -1.0 : 1.0) * (0.5 + t);
      const double a = fn_(Vector<double>(alpha * v)), b = std::abs(alpha) * fn_(v);
      if (!(std::abs(a - b) <= 1e-12 * std::max(std::abs(b), 1e-300))) {
        throw ConfigError("custom norm failed the homogeneity probe");
      }
    }
  }

  [[nodiscard]] double operator()(const Vector<double>& w) const {
    switch (kind_) {
      case Kind::max: return w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
      case Kind::rms: return w.size() ? w.norm() / std::sqrt(static_cast<double>(w.size())) : 0.0;
      case Kind::custom: return fn_(w);
      case Kind::gramian: return std::sqrt(std::max(0.0, w.dot(gram_ * w)));
    }
    return 0.0;
  }

 private:
  explicit ErrorNorm(Kind k) : kind_(k) {}
  Kind kind_;
  Function fn_;
  Matrix<double> gram_;
};

/// Absolute tolerance: one value or one per component.
struct AbsTol {
  Vector<double> values = Vector<double>::Constant(1, 1e-8);

  AbsTol() = default;
  AbsTol(double a) : values(Vector<double>::Constant(1, a)) {}
  AbsTol(Vector<double> v) : values(std::move(v)) {}

  [[nodiscard]] double at(Index i) const { return values.size() == 1 ? values(0) : values(i); }
};

/// ‖e ./ sc‖ with sc = atol + max(|u_n|, |u_prev|)·rtol componentwise.
/// Returns +inf for a non-finite error vector (the step must be rejected).
template <Scalar S>
double scaled_error(const Vector<S>& e, const Vector<S>& u_n, const Vector<S>& u_prev, const AbsTol& atol,
                    double rtol, const ErrorNorm& norm) {
  const Index d = e.size();
  if (u_n.size() != d || u_prev.size() != d) throw ArgumentError("scaled_error: dimension mismatch");
  if (atol.values.size() != 1 && atol.values.size() != d) throw ArgumentError("scaled_error: atol has wrong length");
  if (!(rtol > 0)) throw ArgumentError("scaled_error: rtol must be positive");
  Vector<double> w(d);
  for (Index i = 0; i < d; ++i) {
    if (!(atol.at(i) > 0)) throw ArgumentError("scaled_error: atol must be positive");
    const double sc = atol.at(i) + std::max(std::abs(u_n(i)), std::abs(u_prev(i))) * rtol;
    if constexpr (is_complex_v<S>) {
      w(i) = std::abs(e(i)) / sc;
    } else {
      w(i) = e(i) / sc;
    }
    if (!std::isfinite(w(i))) return std::numeric_limits<double>::infinity();
  }
  const double r = norm(w);
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

struct ControllerOptions {
  double safety = 0.9;
  double growth_cap = 5.0;
  double shrink_floor = 0.1;
  double min_step = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  int max_consecutive_rejections = 10;
};

struct ControllerState {
  double h_prev = 0.0;
  double err_prev = 0.0;
  bool first_step = true;
  bool after_rejection = false;
  int consecutive_rejections = 0;
};

/// Gustafsson step-size selection. `p` is the order of the error estimate's
/// leading term minus one (the embedded order). Updates `state` and returns
/// the next step size (positive, direction-free).
inline double next_step(ControllerState& state, double err, double h, int p, bool accepted,
                        const ControllerOptions& opt = {}) {
  if (!(h > 0)) throw ArgumentError("next_step: h must be positive");
  if (p < 1) throw ArgumentError("next_step: order must be at least 1");
  if (std::isnan(err) || err < 0) err = std::numeric_limits<double>::infinity();
  const double e = std::max(err, 1e-30);
  const double expo = 1.0 / (p + 1);
  double fac = opt.safety * std::pow(1.0 / e, expo);

  if (accepted) {
    if (!state.first_step && state.h_prev > 0 && state.err_prev > 0) {
      fac *= std::pow(state.err_prev / e, expo) * (h / state.h_prev);
    }
    fac = std::min(fac, opt.growth_cap);
    if (state.after_rejection) fac = std::min(fac, 1.0);
    fac = std::max(fac, opt.shrink_floor);
    state.h_prev = h;
    state.err_prev = e;
    state.first_step = false;
    state.after_rejection = false;
    state.consecutive_rejections = 0;
  } else {
    fac = std::clamp(fac, opt.shrink_floor, opt.safety);
    state.after_rejection = true;
    ++state.consecutive_rejections;
    if (state.consecutive_rejections >= opt.max_consecutive_rejections) {
      std::ostringstream os;
      os << "step size control: " << state.consecutive_rejections << " consecutive rejections (h = " << h
         << ", error = " << err << ")";
      throw IntegrationError(os.str());
    }
  }
  double hn = std::min(h * fac, opt.max_step);
  if (hn < opt.min_step) {
    std::ostringstream os;
    os << "step size control: step " << hn << " fell below MinStep " << opt.min_step << " (error " << err << ")";
    throw IntegrationError(os.str());
  }
  return hn;
}

/// User value if given, else |T − t0|·1e-4, clamped to the bounds.
inline double initial_step(double t0, double T, double user_h0, const ControllerOptions& opt = {}) {
  double h = user_h0 > 0 ? user_h0 : std::abs(T - t0) * 1e-4;
  h = std::min(h, std::abs(T - t0));
  return std::clamp(h, std::max(opt.min_step, std::numeric_limits<double>::min()), std::max(opt.max_step, opt.min_step));
}

}  // namespace expflow
