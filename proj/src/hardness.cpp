#include "htclip/hardness.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace htclip {

std::array<double, 3> dv_marginal(const HardInstance& h, Index i) {
  const double q = h.q[i];
  const double vt = h.v[i] * h.theta[i];
  return {(1.0 - vt) * q / 2.0, 1.0 - q, (1.0 + vt) * q / 2.0};
}

Vector sample_dv(const HardInstance& h, Rng& rng) {
  Vector xi(h.d);
  for (Index i = 0; i < h.d; ++i) {
    const double u = uniform01(rng);
    const double q = h.q[i];
    if (u >= q) {
      xi[i] = 0.0;
    } else {
      xi[i] = (u < q * (1.0 + h.v[i] * h.theta[i]) / 2.0) ? 1.0 : -1.0;
    }
  }
  return xi;
}

Vector hard_stochastic_subgrad(const HardInstance& h, const Vector& x, const Vector& xi) {
  require(x.size() == h.d && xi.size() == h.d, "dimension mismatch");
  if (h.kind == HardKind::str) return -h.mu * h.M.cwiseProduct(xi);
  Vector g(h.d);
  for (Index i = 0; i < h.d; ++i) g[i] = h.M[i] * std::abs(xi[i]) * sgn(x[i] - xi[i] * h.y[i]);
  return g;
}

std::string_view to_string(HardRegime regime) {
  switch (regime) {
    case HardRegime::cvx_fano: return "cvx-fano";
    case HardRegime::cvx_twopoint: return "cvx-twopoint";
    case HardRegime::str_fano: return "str-fano";
    case HardRegime::str_twopoint: return "str-twopoint";
  }
  return "?";
}

HardRegime hard_regime_from_string(std::string_view name) {
  for (auto r : {HardRegime::cvx_fano, HardRegime::cvx_twopoint, HardRegime::str_fano, HardRegime::str_twopoint}) {
    if (to_string(r) == name) return r;
  }
  throw ConfigError("unknown hardness regime '" + std::string(name) + "'");
}

HardKind kind_of(HardRegime regime) {
  return (regime == HardRegime::cvx_fano || regime == HardRegime::cvx_twopoint) ? HardKind::cvx : HardKind::str;
}

HardParams hard_params(HardRegime regime, double G, double D, double mu, double sigma_l, double p, std::int64_t T,
                       Index d_star, std::optional<double> delta) {
  require(T >= 1, "T must be >= 1");
  require(d_star >= 1, "d_star must be >= 1");
  require(G > 0.0 && D > 0.0 && sigma_l >= 0.0, "need G > 0, D > 0, sigma_l >= 0");
  require(p > 1.0 && p <= 2.0, "p must lie in (1, 2]");
  const bool twopoint = regime == HardRegime::cvx_twopoint || regime == HardRegime::str_twopoint;
  const HardKind kind = kind_of(regime);
  if (kind == HardKind::str) require(mu > 0.0, "strongly convex regimes need mu > 0");

  const double ds = static_cast<double>(d_star);
  const double Td = static_cast<double>(T);
  HardParams out;
  out.regime = regime;
  if (twopoint) {
    require(delta.has_value(), "two-point regimes need delta");
    require(*delta > 0.0 && *delta < 0.125, "two-point regimes need delta in (0, 1/8)");
    out.theta = 0.5;
    const double th = out.theta;
    out.q = std::min(std::log(1.0 / (8.0 * *delta)) / (Td * ds * th * std::log((1.0 + th) / (1.0 - th))), 1.0);
  } else {
    out.q = 1.0 / Td;
    out.theta = 0.1;
  }
  const double q = out.q;
  const double tail = sigma_l / std::pow(4.0 * q * ds, 1.0 / p);
  if (kind == HardKind::cvx) {
    out.M = std::min(G / (q * std::sqrt(ds)), tail);
    out.y = D / std::sqrt(ds);
  } else {
    out.mu = mu;
    const double th = out.theta;
    out.M = std::min({D / (th * q * std::sqrt(ds)), G / (mu * th * q * std::sqrt(ds)), tail / mu});
  }
  return out;
}

NoiseSpec hard_moment_bounds(const HardInstance& h, double p) {
  require(p > 1.0 && p <= 2.0, "p must lie in (1, 2]");
  const double scale = (h.kind == HardKind::str) ? std::pow(h.mu, p) : 1.0;
  double full = 0.0;
  for (Index i = 0; i < h.d; ++i) full += std::pow(h.M[i], p) * h.q[i];
  double dir = 0.0;
  if (p < 2.0) {
    for (Index i = 0; i < h.d; ++i) dir += std::pow(h.M[i], 2.0 * p / (2.0 - p)) * std::pow(h.q[i], 2.0 / (2.0 - p));
    dir = std::min(std::pow(dir, (2.0 - p) / 2.0), full);  // rounding at d = 1
  } else {
    for (Index i = 0; i < h.d; ++i) dir = std::max(dir, h.M[i] * h.M[i] * h.q[i]);
  }
  return NoiseSpec{p, std::pow(4.0 * scale * dir, 1.0 / p), std::pow(4.0 * scale * full, 1.0 / p)};
}

HardProblem make_hard_instance(HardKind kind, Index d, Index d_star, const HardParams& params, const Vector& v,
                               double p, std::optional<NoiseSpec> declared) {
  require(d >= d_star && d_star >= 1, "need d >= d_star >= 1");
  require(v.size() == d, "v has the wrong dimension");
  for (Index i = 0; i < d; ++i) require(v[i] == 1.0 || v[i] == -1.0, "v must have entries in {-1, +1}");
  require(params.q >= 0.0 && params.q <= 1.0, "q must lie in [0, 1]");
  require(params.theta >= 0.0 && params.theta <= 1.0, "theta must lie in [0, 1]");
  require(kind == kind_of(params.regime), "instance kind does not match the parameter regime");

  auto h = std::make_shared<HardInstance>();
  h->kind = kind;
  h->d = d;
  h->d_star = d_star;
  h->v = v;
  h->q = Vector::Constant(d, params.q);
  h->theta = Vector::Constant(d, params.theta);
  h->M = Vector::Zero(d);
  h->M.head(d_star).setConstant(params.M);
  h->y = Vector::Zero(d);
  if (kind == HardKind::cvx) {
    h->y.head(d_star).setConstant(params.y);
    h->x_star = v.cwiseProduct(h->y);
    h->F_star = 0.0;
    for (Index i = 0; i < d; ++i) h->F_star += (1.0 - h->theta[i]) * h->q[i] * h->M[i] * std::abs(h->y[i]);
  } else {
    require(params.mu > 0.0, "strongly convex instance needs mu > 0");
    h->mu = params.mu;
    h->x_star = h->M.cwiseProduct(h->q).cwiseProduct(h->theta).cwiseProduct(v);
    h->F_star = -0.5 * h->mu * h->x_star.squaredNorm();
  }

  RKind r = ZeroReg{};
  if (kind == HardKind::str) r = QuadReg{h->mu, Vector::Zero(d)};
  auto objective = std::make_shared<const CompositeObjective>(make_objective(HardLoss{h}, r, AllSpace{d}));
  GradOracle oracle = make_oracle(objective, HardNoise{}, p, declared);
  return HardProblem{std::move(h), std::move(objective), std::move(oracle)};
}

int hamming_distance(const Vector& a, const Vector& b, Index n) {
  int count = 0;
  for (Index i = 0; i < n; ++i) count += (a[i] != b[i]);
  return count;
}

Codebook gv_codebook(Index d_star, Index d, Rng& rng, std::size_t max_size) {
  require(d_star >= 1 && d >= d_star, "need d >= d_star >= 1");
  require(max_size >= 1, "max_size must be >= 1");
  Codebook book;
  book.d_star = d_star;
  book.target_size = static_cast<std::size_t>(std::ceil(std::exp(static_cast<double>(d_star) / 8.0)));
  const std::size_t goal = std::min(book.target_size, max_size);
  const double min_gap = static_cast<double>(d_star) / 4.0;

  std::bernoulli_distribution coin(0.5);
  std::size_t rejections = 0;
  while (book.words.size() < goal && rejections < 10'000) {
    Vector w = Vector::Ones(d);
    for (Index i = 0; i < d_star; ++i) w[i] = coin(rng) ? 1.0 : -1.0;
    const bool ok = std::all_of(book.words.begin(), book.words.end(), [&](const Vector& u) {
      return static_cast<double>(hamming_distance(u, w, d_star)) >= min_gap;
    });
    if (ok) {
      book.words.push_back(std::move(w));
      rejections = 0;
    } else {
      ++rejections;
    }
  }
  book.achieved_size = book.words.size();
  book.shortfall = book.achieved_size < book.target_size;
  book.min_distance = static_cast<int>(d_star);
  for (std::size_t a = 0; a < book.words.size(); ++a) {
    for (std::size_t b = a + 1; b < book.words.size(); ++b) {
      book.min_distance = std::min(book.min_distance, hamming_distance(book.words[a], book.words[b], d_star));
    }
  }
  return book;
}

Codebook twopoint_codebook(Index d_star, Index d) {
  require(d_star >= 1 && d >= d_star, "need d >= d_star >= 1");
  Codebook book;
  book.d_star = d_star;
  Vector plus = Vector::Ones(d);
  Vector minus = plus;
  minus.head(d_star).setConstant(-1.0);
  book.words = {plus, minus};
  book.min_distance = static_cast<int>(d_star);
  book.target_size = 2;
  book.achieved_size = 2;
  return book;
}

}  // namespace htclip
