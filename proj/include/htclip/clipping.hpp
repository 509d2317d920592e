#pragma once

#include "htclip/noise.hpp"
#include "htclip/types.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace htclip {

/// clip_tau(g) = min{1, tau / ||g||} g; tau = +inf leaves g untouched.
template <typename Derived>
typename Derived::PlainObject clip(const Eigen::MatrixBase<Derived>& g, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  if (!(tau > Scalar(0))) throw ContractViolation("clipping threshold must be positive");
  typename Derived::PlainObject out = g;
  if (std::isinf(tau)) return out;
  const Scalar n = out.norm();
  if (n > tau) out *= tau / n;
  return out;
}

/// The six clipping-error bounds, in theorem order.
struct ClipBounds {
  std::array<double, 6> value{};
  bool chi = false;  // (1 - alpha) tau >= ||f||; bounds 4 and 6 need it
};

ClipBounds clip_bounds(double p, double sigma_s, double sigma_l, double f_norm, double tau, double alpha);

struct ClipMeasured {
  double du_max_norm = 0.0;
  double du_sq_mean = 0.0;
  double du_cov_opnorm = 0.0;
  double db_norm = 0.0;
};

enum class ClipMethod { exact_enumeration, monte_carlo };

struct ClipErrorReport {
  double tau = kInf;
  double alpha = 0.5;
  double f_norm = 0.0;
  bool chi = false;
  double p = 2.0;
  double sigma_s = 0.0;
  double sigma_l = 0.0;
  ClipMeasured measured;
  ClipMeasured stderr_margin;  // zero for exact enumeration
  std::array<double, 6> bounds{};
  std::array<bool, 6> applicable{};
  std::array<bool, 6> pass{};
  ClipMethod method = ClipMethod::exact_enumeration;
  std::size_t samples = 0;
  double margin_k = 0.0;  // pass iff measured <= bound + margin_k * stderr

  /// Measured quantity compared against bound k (0-based).
  double measured_for(int k) const;
  double stderr_for(int k) const;
  bool all_pass() const;
};

ClipErrorReport clip_error_exact(const GradOracle& oracle, const Vector& x, const Vector& grad_true, double tau,
                                 double alpha);

ClipErrorReport clip_error_mc(const GradOracle& oracle, const Vector& x, const Vector& grad_true, double tau,
                              double alpha, std::size_t N, Rng& rng);

/// Largest absolute eigenvalue of a symmetric matrix.
double operator_norm(const Matrix& sym);

/// sup over unit e of sum_j w_j |<e, dev_j>|^p, by exact eigensolve at p = 2 and
/// multi-start fixed-point ascent otherwise (the value returned is attained).
double directional_moment_sup(const std::vector<double>& weights, const Matrix& devs, double p);

}  // namespace htclip
