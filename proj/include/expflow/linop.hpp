#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "core.hpp"

namespace expflow {

/// Structural metadata of a linear operator. `normal` is accepted and carried
/// along, but every evaluator treats it like `none`.
enum class Structure { none, normal, symmetric, skewsymmetric, diagonal };

inline std::string_view to_string(Structure s) {
  switch (s) {
    case Structure::none: return "none";
    case Structure::normal: return "normal";
    case Structure::symmetric: return "symmetric";
    case Structure::skewsymmetric: return "skewsymmetric";
    case Structure::diagonal: return "diagonal";
  }
  return "none";
}

inline Structure parse_structure(std::string_view name) {
  for (auto s : {Structure::none, Structure::normal, Structure::symmetric, Structure::skewsymmetric,
                 Structure::diagonal}) {
    if (to_string(s) == name) return s;
  }
  throw ArgumentError("unknown structure '" + std::string(name) + "'");
}

/// Largest dimension for which a matrix-free operator may be materialized by
/// probing it with the standard basis.
inline constexpr Index kDefaultProbeCap = 512;

/// The stiff linear part (A or a Jacobian J_n) of a problem. Immutable after
/// construction; copies share storage and identity token.
template <Scalar S = double>
class Operator {
 public:
  using Vec = Vector<S>;
  using Mat = Matrix<S>;
  using Sparse = SparseMatrix<S>;
  using Action = std::function<Vec(const Vec&)>;

  enum class Kind { dense, sparse, matfree };

  Operator() = default;

  static Operator dense(Mat m, Structure structure = Structure::none) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw ArgumentError("dense operator must be square and non-empty");
    }
    Index d = m.rows();
    auto op = Operator(d, Kind::dense, structure, Payload{std::move(m)});
    op.check_structure();
    return op;
  }

  static Operator sparse(Sparse m, Structure structure = Structure::none) {
    if (m.rows() != m.cols() || m.rows() == 0) {
      throw ArgumentError("sparse operator must be square and non-empty");
    }
    m.makeCompressed();
    Index d = m.rows();
    auto op = Operator(d, Kind::sparse, structure, Payload{std::move(m)});
    op.check_structure();
    return op;
  }

  /// Matrix-free operator; `action` must be reentrant.
  static Operator matfree(Index dim, Action action, Structure structure = Structure::none) {
    if (dim <= 0) throw ArgumentError("matrix-free operator needs a positive dimension");
    if (!action) throw ArgumentError("matrix-free operator needs an action");
    return Operator(dim, Kind::matfree, structure, Payload{std::move(action)});
  }

  static Operator identity(Index dim) {
    Sparse m(dim, dim);
    m.setIdentity();
    return sparse(std::move(m), Structure::diagonal);
  }

  static Operator diagonal(const Vec& diag) {
    Sparse m(diag.size(), diag.size());
    m.reserve(Eigen::VectorXi::Constant(diag.size(), 1));
    for (Index i = 0; i < diag.size(); ++i) m.insert(i, i) = diag(i);
    return sparse(std::move(m), Structure::diagonal);
  }

  [[nodiscard]] Index dim() const { return dim_; }
  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] Structure structure() const { return structure_; }
  [[nodiscard]] bool valid() const { return payload_ != nullptr; }
  /// Identity token: equal for copies, distinct for separately built operators.
  [[nodiscard]] std::uint64_t id() const { return id_; }

  [[nodiscard]] Vec apply(const Vec& v) const {
    if (!payload_) throw ArgumentError("apply on an empty operator");
    if (v.size() != dim_) {
      throw ArgumentError("operator of dimension " + std::to_string(dim_) + " applied to vector of length " +
                          std::to_string(v.size()));
    }
    switch (kind_) {
      case Kind::dense: return std::get<Mat>(*payload_) * v;
      case Kind::sparse: return std::get<Sparse>(*payload_) * v;
      case Kind::matfree: {
        Vec out;
        try {
          out = std::get<Action>(*payload_)(v);
        } catch (const Error&) {
          throw;
        } catch (const std::exception& e) {
          throw EvaluationError(std::string("matrix-free action failed: ") + e.what());
        }
        if (out.size() != dim_) throw EvaluationError("matrix-free action returned a vector of wrong length");
        return out;
      }
    }
    return {};
  }

  /// Dense copy of the operator. Matrix-free operators are probed column by
  /// column when `dim() <= probe_cap`.
  [[nodiscard]] Mat materialize(Index probe_cap = kDefaultProbeCap) const {
    if (!payload_) throw ArgumentError("materialize on an empty operator");
    switch (kind_) {
      case Kind::dense: return std::get<Mat>(*payload_);
      case Kind::sparse: return Mat(std::get<Sparse>(*payload_));
      case Kind::matfree: {
        if (dim_ > probe_cap) {
          throw UnsupportedError("cannot materialize a matrix-free operator of dimension " + std::to_string(dim_) +
                                 " (probing cap " + std::to_string(probe_cap) + ")");
        }
        Mat m(dim_, dim_);
        Vec e = Vec::Zero(dim_);
        for (Index j = 0; j < dim_; ++j) {
          e(j) = S(1);
          m.col(j) = apply(e);
          e(j) = S(0);
        }
        return m;
      }
    }
    return {};
  }

  [[nodiscard]] Operator to_dense(Index probe_cap = kDefaultProbeCap) const {
    return dense(materialize(probe_cap), structure_);
  }

  [[nodiscard]] Operator to_sparse(Index probe_cap = kDefaultProbeCap) const {
    if (kind_ == Kind::sparse) return *this;
    return sparse(materialize(probe_cap).sparseView(), structure_);
  }

  /// Same action and storage, different structure flag (validated).
  [[nodiscard]] Operator with_structure(Structure s) const {
    Operator op = *this;
    op.structure_ = s;
    op.check_structure();
    return op;
  }

  /// The dense matrix, when stored densely.
  [[nodiscard]] const Mat* dense_storage() const {
    return payload_ && kind_ == Kind::dense ? &std::get<Mat>(*payload_) : nullptr;
  }
  [[nodiscard]] const Sparse* sparse_storage() const {
    return payload_ && kind_ == Kind::sparse ? &std::get<Sparse>(*payload_) : nullptr;
  }

 private:
  using Payload = std::variant<Mat, Sparse, Action>;

  Operator(Index dim, Kind kind, Structure structure, Payload payload)
      : dim_(dim),
        kind_(kind),
        structure_(structure),
        id_(detail::next_token()),
        payload_(std::make_shared<const Payload>(std::move(payload))) {}

  void check_structure() const {
    if (kind_ == Kind::matfree) return;
    if (structure_ == Structure::diagonal) {
      bool ok = true;
      if (kind_ == Kind::dense) {
        const auto& m = std::get<Mat>(*payload_);
        for (Index j = 0; j < dim_ && ok; ++j)
          for (Index i = 0; i < dim_ && ok; ++i)
            if (i != j && m(i, j) != S(0)) ok = false;
      } else {
        const auto& m = std::get<Sparse>(*payload_);
        for (Index r = 0; r < m.outerSize() && ok; ++r)
          for (typename Sparse::InnerIterator it(m, r); it; ++it)
            if (it.row() != it.col() && it.value() != S(0)) ok = false;
      }
      if (!ok) throw ArgumentError("operator flagged diagonal has non-zero off-diagonal entries");
      return;
    }
    if (structure_ != Structure::symmetric && structure_ != Structure::skewsymmetric) return;
    double scale = 0.0, dev = 0.0;
    const bool sym = structure_ == Structure::symmetric;
    if (kind_ == Kind::dense) {
      const auto& m = std::get<Mat>(*payload_);
      scale = m.cwiseAbs().maxCoeff();
      dev = (sym ? Mat(m - m.adjoint()) : Mat(m + m.adjoint())).cwiseAbs().maxCoeff();
    } else {
      const auto& m = std::get<Sparse>(*payload_);
      Sparse mt = m.adjoint();
      Sparse defect = sym ? Sparse(m - mt) : Sparse(m + mt);
      for (Index r = 0; r < m.outerSize(); ++r)
        for (typename Sparse::InnerIterator it(m, r); it; ++it) scale = std::max(scale, std::abs(it.value()));
      for (Index r = 0; r < defect.outerSize(); ++r)
        for (typename Sparse::InnerIterator it(defect, r); it; ++it) dev = std::max(dev, std::abs(it.value()));
    }
    if (dev > 1e-12 * scale) {
      throw ArgumentError(std::string("operator flagged ") + std::string(to_string(structure_)) +
                          " violates the structure (defect " + std::to_string(dev) + ")");
    }
  }

  Index dim_ = 0;
  Kind kind_ = Kind::dense;
  Structure structure_ = Structure::none;
  std::uint64_t id_ = 0;
  std::shared_ptr<const Payload> payload_;
};

}  // namespace expflow
