#pragma once

#include <atomic>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace expflow {

using Index = Eigen::Index;

template <class S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Row-compressed sparse storage.
template <class S>
using SparseMatrix = Eigen::SparseMatrix<S, Eigen::RowMajor>;

template <class S>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};
template <class S>
inline constexpr bool is_complex_v = is_complex<S>::value;

template <class S>
concept Scalar = std::is_same_v<S, double> || std::is_same_v<S, std::complex<double>>;

// Error hierarchy. Every error raised by the library derives from Error so
// callers can catch the whole family at once.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: dimension mismatch, non-finite argument, bad range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Request outside the documented capability (caps, unsupported paths).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Floating-point failure: overflow, eigen-solver non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent problem/option setup detected before integration starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unknown registry key.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Failure of a user-supplied callback.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// The time stepping loop could not continue (step underflow, livelock,
/// startup non-convergence).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::uint64_t next_token() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

template <class S>
double abs_max(const Vector<S>& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace detail

}  // namespace expflow
