#pragma once

#include "htclip/problems.hpp"
#include "htclip/types.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace htclip {

/// Declared moment bounds: E|<e, xi>|^p <= sigma_s^p for unit e, E||xi||^p <= sigma_l^p.
struct NoiseSpec {
  double p = 2.0;
  double sigma_s = 0.0;
  double sigma_l = 0.0;
};

/// Throws ConfigError unless 1 < p <= 2 and 0 <= sigma_s <= sigma_l <= sqrt(pi d / 2) sigma_s.
void validate(const NoiseSpec& noise, Index d);

/// Characteristic function exp(-gamma^a |t|^a (1 - i beta tan(pi a / 2) sgn t)).
struct StableParams {
  double alpha = 2.0;
  double beta = 0.0;
  double gamma_scale = 1.0;
};

/// Chambers-Mallows-Stuck draw.
double sample_alpha_stable(const StableParams& params, Rng& rng);

/// E|X|^p for a symmetric stable X with the given alpha and scale; needs p < alpha or alpha = 2.
double stable_abs_moment(double alpha, double p, double gamma_scale);

/// E|Z|^p / sigma^p for Z ~ N(0, sigma^2).
double gaussian_abs_moment(double p);

struct Deterministic {};
struct AdditiveGaussian {
  Vector scales;
};
struct AdditiveStable {
  std::vector<StableParams> coords;
};
/// Draws come from the objective's hard instance.
struct HardNoise {};

using OracleKind = std::variant<Deterministic, AdditiveGaussian, AdditiveStable, HardNoise>;

class GradOracle {
 public:
  GradOracle(std::shared_ptr<const CompositeObjective> objective, OracleKind kind, NoiseSpec noise);

  Vector sample(const Vector& x, Rng& rng) const;

  const CompositeObjective& objective() const { return *objective_; }
  std::shared_ptr<const CompositeObjective> objective_ptr() const { return objective_; }
  const OracleKind& kind() const { return kind_; }
  const NoiseSpec& noise() const { return noise_; }
  Index dim() const { return objective_->dim(); }

  bool is_discrete() const;

  /// Finite support as (probability, gradient) pairs. Throws CapacityError above max_outcomes.
  std::vector<std::pair<double, Vector>> support(const Vector& x, std::size_t max_outcomes = 1'000'000) const;

 private:
  std::shared_ptr<const CompositeObjective> objective_;
  OracleKind kind_;
  NoiseSpec noise_;
};

/// Moment constants implied by the noise model (exact where known, otherwise a valid upper bound).
NoiseSpec analytic_noise(const CompositeObjective& objective, const OracleKind& kind, double p);

/// Builds an oracle. Without a declaration the analytic constants are used; a declaration is validated.
GradOracle make_oracle(std::shared_ptr<const CompositeObjective> objective, OracleKind kind, double p,
                       std::optional<NoiseSpec> declared = std::nullopt);

enum class MomentMode { monte_carlo, exact };

/// p-th powers of the noise moments; the directional one is a lower estimate of the supremum.
struct MomentEstimate {
  double sigma_s_p_lower = 0.0;
  double sigma_l_p = 0.0;
};

MomentEstimate estimate_moments(const GradOracle& oracle, const Vector& x, const Vector& grad_true, double p,
                                std::size_t N, int K, Rng& rng, MomentMode mode = MomentMode::monte_carlo);

double d_eff_lower_bound_independent(std::vector<double> sigmas, double p);
double d_eff_lower_bound_iid(Index d, double p);

struct StableDeffBound {
  double value = 0.0;         // bound at the chosen epsilon
  double epsilon = 0.0;
  double epsilon_star = 0.0;  // min{p / (2 ln d - 1), 2 - p}
  double omega_d = 0.0;       // (p-1) d / (p^3 3^4 2^{4/p} e^{1/p})
};

StableDeffBound d_eff_lower_bound_stable(Index d, double p, std::optional<double> epsilon = std::nullopt);

}  // namespace htclip
