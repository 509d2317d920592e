#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace htclip {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Every random draw in the library goes through a caller-owned engine of this type.
using Rng = std::mt19937_64;

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::int64_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::int64_t iteration_;
};

inline void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}

/// Product with the measure-theoretic convention 0 * inf = 0.
inline double mul0(double a, double b) {
  return (a == 0.0 || b == 0.0) ? 0.0 : a * b;
}

/// sgn with sgn(0) = 0.
template <typename Scalar>
inline Scalar sgn(Scalar x) {
  return static_cast<Scalar>((Scalar(0) < x) - (x < Scalar(0)));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace htclip
