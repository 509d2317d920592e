#include "htclip/noise.hpp"

#include "htclip/hardness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace htclip {

namespace {

constexpr double kPi = std::numbers::pi;

const HardInstance& hard_instance_of(const CompositeObjective& obj) {
  const auto* h = std::get_if<HardLoss>(&obj.f);
  if (h == nullptr) throw ConfigError("hard-instance noise needs a hard-instance objective");
  return *h->instance;
}

// Exact sup over unit e of the scale of <e, xi> for independent symmetric stable coordinates.
double stable_direction_scale(const std::vector<StableParams>& coords) {
  const double alpha = coords.front().alpha;
  if (alpha == 2.0) {
    double m = 0.0;
    for (const auto& c : coords) m = std::max(m, c.gamma_scale);
    return m;
  }
  const double r = 2.0 * alpha / (2.0 - alpha);
  double gmax = 0.0;
  for (const auto& c : coords) gmax = std::max(gmax, c.gamma_scale);
  if (gmax == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& c : coords) s += std::pow(c.gamma_scale / gmax, r);
  return gmax * std::pow(s, 1.0 / r);
}

void check_stable(const std::vector<StableParams>& coords, double p) {
  if (coords.empty()) throw ConfigError("additive-stable noise needs at least one coordinate");
  const double alpha = coords.front().alpha;
  for (const auto& c : coords) {
    if (c.alpha != alpha) throw ConfigError("additive-stable noise needs a common alpha");
    if (c.beta != 0.0) throw ConfigError("additive-stable noise must be symmetric (beta = 0)");
    if (!(c.gamma_scale >= 0.0)) throw ConfigError("stable gamma must be nonnegative");
  }
  if (!(alpha > 1.0 && alpha <= 2.0)) throw ConfigError("stable alpha must lie in (1, 2]");
  if (!(alpha > p || alpha == 2.0)) throw ConfigError("stable alpha must exceed p (finite p-th moment)");
}

}  // namespace

void validate(const NoiseSpec& noise, Index d) {
  if (!(noise.p > 1.0 && noise.p <= 2.0)) throw ConfigError("noise exponent p must lie in (1, 2]");
  if (!(noise.sigma_s >= 0.0) || !std::isfinite(noise.sigma_s)) throw ConfigError("sigma_s must be finite and >= 0");
  if (!(noise.sigma_l >= 0.0) || !std::isfinite(noise.sigma_l)) throw ConfigError("sigma_l must be finite and >= 0");
  if (noise.sigma_s > noise.sigma_l) throw ConfigError("moment ordering violated: sigma_s > sigma_l");
  const double cap = std::sqrt(kPi * static_cast<double>(d) / 2.0) * noise.sigma_s;
  if (noise.sigma_l > cap * (1.0 + 1e-12)) {
    throw ConfigError("moment bracket violated: sigma_l > sqrt(pi d / 2) sigma_s");
  }
}

double sample_alpha_stable(const StableParams& params, Rng& rng) {
  const double a = params.alpha;
  const double b = params.beta;
  require(a > 0.0 && a <= 2.0, "stable alpha must lie in (0, 2]");
  require(b >= -1.0 && b <= 1.0, "stable beta must lie in [-1, 1]");
  require(params.gamma_scale >= 0.0, "stable gamma must be nonnegative");
  if (params.gamma_scale == 0.0) return 0.0;

  double u = uniform01(rng);
  while (u == 0.0) u = uniform01(rng);
  const double V = kPi * (u - 0.5);
  const double W = -std::log1p(-uniform01(rng));  // Exp(1), argument in (0, 1]
  const double g = params.gamma_scale;

  if (a == 1.0) {
    const double h = kPi / 2.0 + b * V;
    const double X = (2.0 / kPi) * (h * std::tan(V) - b * std::log((kPi / 2.0) * W * std::cos(V) / h));
    return g * X + (2.0 / kPi) * b * g * std::log(g);
  }
  const double zeta = b * std::tan(kPi * a / 2.0);
  const double B = std::atan(zeta) / a;
  const double S = std::pow(1.0 + zeta * zeta, 1.0 / (2.0 * a));
  const double X = S * std::sin(a * (V + B)) / std::pow(std::cos(V), 1.0 / a) *
                   std::pow(std::cos(V - a * (V + B)) / W, (1.0 - a) / a);
  return g * X;
}

double gaussian_abs_moment(double p) {
  return std::pow(2.0, p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(kPi);
}

double stable_abs_moment(double alpha, double p, double gamma_scale) {
  require(p > 0.0, "moment order must be positive");
  if (alpha == 2.0) {
    // N(0, 2 gamma^2)
    return std::pow(std::sqrt(2.0) * gamma_scale, p) * gaussian_abs_moment(p);
  }
  require(p < alpha, "stable moment needs p < alpha");
  return std::pow(gamma_scale, p) * std::pow(2.0, p) * std::tgamma((1.0 + p) / 2.0) * std::tgamma(1.0 - p / alpha) /
         (std::sqrt(kPi) * std::tgamma(1.0 - p / 2.0));
}

GradOracle::GradOracle(std::shared_ptr<const CompositeObjective> objective, OracleKind kind, NoiseSpec noise)
    : objective_(std::move(objective)), kind_(std::move(kind)), noise_(noise) {
  require(objective_ != nullptr, "oracle needs an objective");
  const Index d = objective_->dim();
  if (const auto* g = std::get_if<AdditiveGaussian>(&kind_)) {
    require(g->scales.size() == d, "gaussian scales have the wrong dimension");
  } else if (const auto* s = std::get_if<AdditiveStable>(&kind_)) {
    require(static_cast<Index>(s->coords.size()) == d, "stable parameters have the wrong dimension");
  } else if (std::holds_alternative<HardNoise>(kind_)) {
    hard_instance_of(*objective_);
  }
}

bool GradOracle::is_discrete() const {
  return std::holds_alternative<Deterministic>(kind_) || std::holds_alternative<HardNoise>(kind_);
}

Vector GradOracle::sample(const Vector& x, Rng& rng) const {
  if (std::holds_alternative<HardNoise>(kind_)) {
    const HardInstance& h = hard_instance_of(*objective_);
    return hard_stochastic_subgrad(h, x, sample_dv(h, rng));
  }
  Vector g = subgrad_f(*objective_, x);
  if (const auto* gauss = std::get_if<AdditiveGaussian>(&kind_)) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < g.size(); ++i) g[i] += gauss->scales[i] * normal(rng);
  } else if (const auto* st = std::get_if<AdditiveStable>(&kind_)) {
    for (Index i = 0; i < g.size(); ++i) g[i] += sample_alpha_stable(st->coords[static_cast<std::size_t>(i)], rng);
  }
  return g;
}

std::vector<std::pair<double, Vector>> GradOracle::support(const Vector& x, std::size_t max_outcomes) const {
  if (std::holds_alternative<Deterministic>(kind_)) return {{1.0, subgrad_f(*objective_, x)}};
  if (!std::holds_alternative<HardNoise>(kind_)) throw ContractViolation("oracle has no finite support");

  const HardInstance& h = hard_instance_of(*objective_);
  const Index d = h.d;
  std::vector<std::vector<std::pair<double, double>>> coord(static_cast<std::size_t>(d));
  double count = 1.0;
  for (Index i = 0; i < d; ++i) {
    const auto m = dv_marginal(h, i);
    for (int k = 0; k < 3; ++k) {
      if (m[static_cast<std::size_t>(k)] > 0.0) coord[static_cast<std::size_t>(i)].push_back({k - 1.0, m[static_cast<std::size_t>(k)]});
    }
    count *= static_cast<double>(coord[static_cast<std::size_t>(i)].size());
  }
  if (count > static_cast<double>(max_outcomes)) {
    throw CapacityError("support has " + std::to_string(count) + " outcomes, limit is " +
                        std::to_string(max_outcomes));
  }

  std::vector<std::pair<double, Vector>> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  Vector xi(d);
  while (true) {
    double prob = 1.0;
    for (Index i = 0; i < d; ++i) {
      const auto& [value, pr] = coord[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
      xi[i] = value;
      prob *= pr;
    }
    out.emplace_back(prob, hard_stochastic_subgrad(h, x, xi));
    Index i = 0;
    for (; i < d; ++i) {
      auto& k = idx[static_cast<std::size_t>(i)];
      if (++k < coord[static_cast<std::size_t>(i)].size()) break;
      k = 0;
    }
    if (i == d) break;
  }
  return out;
}

NoiseSpec analytic_noise(const CompositeObjective& objective, const OracleKind& kind, double p) {
  NoiseSpec n{p, 0.0, 0.0};
  const Index d = objective.dim();
  if (const auto* g = std::get_if<AdditiveGaussian>(&kind)) {
    n.sigma_s = std::pow(gaussian_abs_moment(p), 1.0 / p) * g->scales.cwiseAbs().maxCoeff();
    n.sigma_l = g->scales.norm();
  } else if (const auto* st = std::get_if<AdditiveStable>(&kind)) {
    check_stable(st->coords, p);
    const double alpha = st->coords.front().alpha;
    const double m1 = stable_abs_moment(alpha, p, 1.0);
    n.sigma_s = std::pow(m1, 1.0 / p) * stable_direction_scale(st->coords);
    double sum_p = 0.0;
    double sum_sq = 0.0;
    for (const auto& c : st->coords) {
      sum_p += std::pow(c.gamma_scale, p);
      sum_sq += c.gamma_scale * c.gamma_scale;
    }
    double sl = std::pow(m1 * sum_p, 1.0 / p);
    sl = std::min(sl, std::sqrt(kPi * static_cast<double>(d) / 2.0) * n.sigma_s);
    if (alpha == 2.0) sl = std::min(sl, std::sqrt(2.0 * sum_sq));
    n.sigma_l = std::max(sl, n.sigma_s);
  } else if (std::holds_alternative<HardNoise>(kind)) {
    n = hard_moment_bounds(hard_instance_of(objective), p);
  }
  return n;
}

GradOracle make_oracle(std::shared_ptr<const CompositeObjective> objective, OracleKind kind, double p,
                       std::optional<NoiseSpec> declared) {
  require(objective != nullptr, "oracle needs an objective");
  if (!(p > 1.0 && p <= 2.0)) throw ConfigError("noise exponent p must lie in (1, 2]");
  const NoiseSpec analytic = analytic_noise(*objective, kind, p);
  const Index d = objective->dim();
  if (!declared) {
    validate(analytic, d);
    return GradOracle(std::move(objective), std::move(kind), analytic);
  }
  if (declared->p != p) throw ConfigError("declared noise exponent differs from the oracle exponent");
  validate(*declared, d);
  constexpr double slack = 1.0 - 1e-9;
  if (std::holds_alternative<AdditiveGaussian>(kind) || std::holds_alternative<AdditiveStable>(kind)) {
    if (declared->sigma_s < slack * analytic.sigma_s) {
      throw ConfigError("declared sigma_s is below the exact directional moment of the noise");
    }
  } else if (std::holds_alternative<HardNoise>(kind)) {
    if (declared->sigma_s < slack * analytic.sigma_s || declared->sigma_l < slack * analytic.sigma_l) {
      throw ConfigError("declared moments are below the hard instance's moment bounds");
    }
  }
  return GradOracle(std::move(objective), std::move(kind), *declared);
}

MomentEstimate estimate_moments(const GradOracle& oracle, const Vector& x, const Vector& grad_true, double p,
                                std::size_t N, int K, Rng& rng, MomentMode mode) {
  require(K >= 0, "direction count must be nonnegative");
  const Index d = oracle.dim();
  Matrix dirs(d, d + K);
  dirs.leftCols(d).setIdentity();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < K; ++k) {
    Vector e(d);
    do {
      for (Index i = 0; i < d; ++i) e[i] = normal(rng);
    } while (e.norm() == 0.0);
    dirs.col(d + k) = e.normalized();
  }

  Vector dir_acc = Vector::Zero(d + K);
  double l_acc = 0.0;
  auto accumulate = [&](double w, const Vector& dev) {
    l_acc += w * std::pow(dev.norm(), p);
    dir_acc += w * (dirs.transpose() * dev).cwiseAbs().array().pow(p).matrix();
  };

  if (mode == MomentMode::exact) {
    for (const auto& [prob, g] : oracle.support(x)) accumulate(prob, g - grad_true);
  } else {
    require(N >= 1000, "moment estimation needs N >= 1000");
    for (std::size_t n = 0; n < N; ++n) accumulate(1.0, oracle.sample(x, rng) - grad_true);
    dir_acc /= static_cast<double>(N);
    l_acc /= static_cast<double>(N);
  }
  return {dir_acc.maxCoeff(), l_acc};
}

double d_eff_lower_bound_independent(std::vector<double> sigmas, double p) {
  require(!sigmas.empty(), "need at least one coordinate");
  require(p > 1.0 && p <= 2.0, "p must lie in (1, 2]");
  for (double s : sigmas) require(s >= 0.0 && std::isfinite(s), "coordinate moments must be finite and >= 0");
  std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
  const double smax = sigmas.front();
  if (smax == 0.0) return 0.0;

  // Everything is scaled by smax; the ratio is scale free.
  double numerator = 0.0;
  double partial = 0.0;
  for (std::size_t j = 1; j <= sigmas.size(); ++j) {
    partial += std::pow(sigmas[j - 1] / smax, p);
    const double jj = static_cast<double>(j);
    numerator = std::max(numerator, std::pow(jj, 1.0 - 2.0 / p) * std::pow(partial, 2.0 / p));
  }
  double norm_sq = 1.0;  // ||sigma / smax||_r^2 with r = 2p / (2 - p); r = inf at p = 2
  if (p < 2.0) {
    const double r = 2.0 * p / (2.0 - p);
    double s = 0.0;
    for (double v : sigmas) s += std::pow(v / smax, r);
    norm_sq = std::pow(s, 2.0 / r);
  }
  return numerator / (std::pow(2.0, 4.0 / p - 2.0) * norm_sq);
}

double d_eff_lower_bound_iid(Index d, double p) {
  require(d >= 1, "d must be >= 1");
  require(p > 1.0 && p <= 2.0, "p must lie in (1, 2]");
  return std::pow(static_cast<double>(d), 2.0 - 2.0 / p) / std::pow(2.0, 4.0 / p - 2.0);
}

StableDeffBound d_eff_lower_bound_stable(Index d, double p, std::optional<double> epsilon) {
  require(d >= 2, "stable bound needs d >= 2");
  require(p > 1.0 && p < 2.0, "stable bound needs p in (1, 2)");
  const double dd = static_cast<double>(d);
  StableDeffBound out;
  out.epsilon_star = std::min(p / (2.0 * std::log(dd) - 1.0), 2.0 - p);
  out.epsilon = epsilon.value_or(out.epsilon_star);
  require(out.epsilon > 0.0 && out.epsilon <= out.epsilon_star, "epsilon outside (0, epsilon_star]");
  const double c = (p - 1.0) / (p * p * p * 81.0 * std::pow(2.0, 4.0 / p));
  out.value = c * std::pow(dd, 1.0 - 2.0 * out.epsilon / (p * (p + out.epsilon)));
  out.omega_d = c * dd / std::exp(1.0 / p);
  return out;
}

}  // namespace htclip
