#pragma once

#include "htclip/hard_instance.hpp"
#include "htclip/noise.hpp"
#include "htclip/problems.hpp"

#include <array>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace htclip {

/// One draw xi in {-1, 0, 1}^d from D_v.
Vector sample_dv(const HardInstance& instance, Rng& rng);

/// Stochastic subgradient at x for the outcome xi.
Vector hard_stochastic_subgrad(const HardInstance& instance, const Vector& x, const Vector& xi);

/// Per-coordinate outcome probabilities (P[xi_i = -1], P[xi_i = 0], P[xi_i = +1]).
std::array<double, 3> dv_marginal(const HardInstance& instance, Index i);

enum class HardRegime { cvx_fano, cvx_twopoint, str_fano, str_twopoint };

std::string_view to_string(HardRegime regime);
HardRegime hard_regime_from_string(std::string_view name);
HardKind kind_of(HardRegime regime);

struct HardParams {
  HardRegime regime = HardRegime::cvx_fano;
  double q = 0.0;
  double theta = 0.0;
  double M = 0.0;
  double y = 0.0;  // cvx only
  double mu = 0.0;  // str only
};

HardParams hard_params(HardRegime regime, double G, double D, double mu, double sigma_l, double p, std::int64_t T,
                       Index d_star, std::optional<double> delta = std::nullopt);

/// Moment bounds on the oracle noise from the instance structure (returned as a NoiseSpec).
NoiseSpec hard_moment_bounds(const HardInstance& instance, double p);

struct HardProblem {
  std::shared_ptr<const HardInstance> instance;
  std::shared_ptr<const CompositeObjective> objective;
  GradOracle oracle;
};

/// Instance with closed-form optimum, its objective (r = 0 for cvx, (mu/2)||x||^2 for str) and oracle.
HardProblem make_hard_instance(HardKind kind, Index d, Index d_star, const HardParams& params, const Vector& v,
                               double p, std::optional<NoiseSpec> declared = std::nullopt);

struct Codebook {
  std::vector<Vector> words;  // padded to length d with +1
  Index d_star = 0;
  int min_distance = 0;       // over the first d_star coordinates
  std::size_t target_size = 0;
  std::size_t achieved_size = 0;
  bool shortfall = false;
};

int hamming_distance(const Vector& a, const Vector& b, Index n);

/// Randomized greedy code with pairwise distance >= d_star / 4.
Codebook gv_codebook(Index d_star, Index d, Rng& rng, std::size_t max_size = 4096);

/// {all ones, -1 on the first d_star coordinates}.
Codebook twopoint_codebook(Index d_star, Index d);

}  // namespace htclip
