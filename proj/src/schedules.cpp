#include "htclip/schedules.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace htclip {

namespace {

constexpr std::array<std::pair<Regime, std::string_view>, 6> kRegimeNames = {{
    {Regime::cvx_hp_T, "cvx-hp-T"},
    {Regime::cvx_hp_anytime, "cvx-hp-anytime"},
    {Regime::cvx_ex_T, "cvx-ex-T"},
    {Regime::cvx_ex_anytime, "cvx-ex-anytime"},
    {Regime::str_hp, "str-hp"},
    {Regime::str_ex, "str-ex"},
}};

void check_noise(double p, double sigma_s, double sigma_l) {
  require(p > 1.0 && p <= 2.0, "p must lie in (1, 2]");
  require(sigma_s >= 0.0 && sigma_s <= sigma_l, "need 0 <= sigma_s <= sigma_l");
  require(!(sigma_s == 0.0 && sigma_l > 0.0), "sigma_s = 0 < sigma_l gives an infinite d_eff");
}

// The threshold schedule max{G / (1 - alpha), tau_c t^{1/p}}; without noise only the first term remains.
double threshold(double g_floor, double tau_c, bool noiseless, double p, std::int64_t t) {
  if (noiseless) return g_floor;
  return std::max(g_floor, tau_c * std::pow(static_cast<double>(t), 1.0 / p));
}

}  // namespace

std::string_view to_string(Regime regime) {
  for (const auto& [r, name] : kRegimeNames) {
    if (r == regime) return name;
  }
  return "?";
}

Regime regime_from_string(std::string_view name) {
  for (const auto& [r, n] : kRegimeNames) {
    if (n == name) return r;
  }
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

std::string_view to_string(Averaging mode) {
  switch (mode) {
    case Averaging::plain: return "plain";
    case Averaging::weighted: return "weighted";
    case Averaging::last: return "last";
  }
  return "?";
}

Averaging averaging_from_string(std::string_view name) {
  for (auto m : {Averaging::plain, Averaging::weighted, Averaging::last}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown averaging mode '" + std::string(name) + "'");
}

bool is_strongly_convex(Regime r) { return r == Regime::str_hp || r == Regime::str_ex; }
bool is_high_probability(Regime r) {
  return r == Regime::cvx_hp_T || r == Regime::cvx_hp_anytime || r == Regime::str_hp;
}
bool is_known_T(Regime r) { return r == Regime::cvx_hp_T || r == Regime::cvx_ex_T; }
bool is_anytime(Regime r) { return r == Regime::cvx_hp_anytime || r == Regime::cvx_ex_anytime; }
Averaging designated_averaging(Regime r) { return is_strongly_convex(r) ? Averaging::weighted : Averaging::plain; }

double d_eff_of(double sigma_s, double sigma_l) {
  require(sigma_s >= 0.0 && sigma_s <= sigma_l, "need 0 <= sigma_s <= sigma_l");
  if (sigma_l == 0.0) return 0.0;
  if (sigma_s == 0.0) return kInf;
  const double r = sigma_l / sigma_s;
  return r * r;
}

HpParams hp_params(double p, double sigma_s, double sigma_l, double delta) {
  check_noise(p, sigma_s, sigma_l);
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  HpParams out;
  if (sigma_l == 0.0) return out;
  const double L = std::log(3.0 / delta);
  const double a = sigma_s * std::pow(sigma_l, p - 1.0) / L;
  const double b = (p < 2.0) ? sigma_s * sigma_s / std::pow(sigma_l, 2.0 - p) : kInf;
  out.tau_star = std::pow(std::min(a, b), 1.0 / p);
  const double ratio = sigma_l / sigma_s;  // sqrt(d_eff)
  out.varphi_star = std::max(ratio * L, (p < 2.0) ? ratio * ratio : 0.0);
  if (out.varphi_star >= 1.0) out.psi_star = 1.0 + std::log(out.varphi_star);
  return out;
}

ExParams ex_params(double p, double sigma_s, double sigma_l) {
  check_noise(p, sigma_s, sigma_l);
  ExParams out;
  if (sigma_l == 0.0) return out;
  if (p < 2.0) {
    const double ratio = sigma_l / sigma_s;
    out.varphi_tilde_star = ratio * ratio;
    out.tau_tilde_star = std::pow(sigma_s, 2.0 / p) / std::pow(sigma_l, 2.0 / p - 1.0);
  }
  if (out.varphi_tilde_star >= 1.0) out.psi_tilde_star = 1.0 + std::log(out.varphi_tilde_star);
  return out;
}

double varphi_of(double varphi_star, double alpha, double sigma_l, double G, double p, std::int64_t T) {
  require(T >= 1, "T must be >= 1");
  require(G > 0.0, "G must be positive");
  const double inner = std::pow(1.0 - alpha, p) * varphi_star * std::pow(sigma_l / G, p) * static_cast<double>(T);
  return std::min(varphi_star, std::sqrt(inner));
}

Schedule Schedule::custom(Fn eta, Fn tau, Averaging averaging) {
  Schedule s;
  s.eta_ = std::move(eta);
  s.tau_ = std::move(tau);
  s.averaging_ = averaging;
  return s;
}

Schedule make_schedule(Regime regime, const ScheduleParams& P) {
  check_noise(P.p, P.sigma_s, P.sigma_l);
  require(P.G > 0.0, "G must be positive");
  require(P.alpha_clip > 0.0 && P.alpha_clip < 1.0, "alpha_clip must lie in (0, 1)");
  require(P.delta > 0.0 && P.delta <= 1.0, "delta must lie in (0, 1]");
  if (is_strongly_convex(regime)) {
    require(P.mu > 0.0, "regime/mu mismatch: strongly convex regimes need mu > 0");
  } else {
    require(P.mu == 0.0, "regime/mu mismatch: convex regimes need mu = 0");
    require(P.D > 0.0, "convex regimes need D > 0");
  }
  if (is_known_T(regime)) require(P.T_known.has_value() && *P.T_known >= 1, "known-T regimes need T_known >= 1");

  const double p = P.p;
  const double s = P.sigma_s;
  const double l = P.sigma_l;
  const double G = P.G;
  const double D = P.D;
  const double L = std::log(3.0 / P.delta);
  const double g_floor = G / (1.0 - P.alpha_clip);
  const bool noiseless = (l == 0.0);
  const double slp = std::pow(l, p);

  Schedule out;
  out.regime_ = regime;
  out.averaging_ = designated_averaging(regime);
  out.params_ = P;
  ScheduleConstants& c = out.constants_;
  c.d_eff = d_eff_of(s, l);
  c.ln_3_over_delta = L;

  const bool hp = is_high_probability(regime);
  double tau_c = kInf;
  if (hp) {
    const HpParams h = hp_params(p, s, l, P.delta);
    c.tau_star = h.tau_star;
    c.varphi_star = h.varphi_star;
    c.psi_star = h.psi_star;
    c.critical_time = h.varphi_star * h.varphi_star;
    tau_c = h.tau_star;
  } else {
    const ExParams e = ex_params(p, s, l);
    c.tau_tilde_star = e.tau_tilde_star;
    c.varphi_tilde_star = e.varphi_tilde_star;
    c.psi_tilde_star = e.psi_tilde_star;
    c.critical_time = e.varphi_tilde_star * e.varphi_tilde_star;
    tau_c = e.tau_tilde_star;
  }

  switch (regime) {
    case Regime::cvx_hp_T:
    case Regime::cvx_ex_T: {
      const std::int64_t T = *P.T_known;
      const double Td = static_cast<double>(T);
      const double vstar = hp ? *c.varphi_star : *c.varphi_tilde_star;
      const double varphi = varphi_of(vstar, P.alpha_clip, l, G, p, T);
      c.varphi = varphi;
      double e1 = kInf;
      if (hp) {
        e1 = (D / G) / (varphi + L);
      } else if (varphi > 0.0) {
        e1 = (D / G) / varphi;
      }
      const double e2 = (D / G) / std::sqrt((slp / std::pow(G, p) + 1.0) * Td);
      double coef = std::pow(s, 2.0 / p - 1.0) * std::pow(l, 2.0 - 2.0 / p);
      if (hp) coef += std::pow(s, 1.0 / p) * std::pow(l, 1.0 - 1.0 / p) * std::pow(L, 1.0 - 1.0 / p);
      const double e3 = (coef > 0.0) ? D / (coef * std::pow(Td, 1.0 / p)) : kInf;
      const double eta = std::min({e1, e2, e3});
      const double tau = threshold(g_floor, tau_c, noiseless, p, T);
      c.eta_star = eta;
      out.eta_ = [eta](std::int64_t) { return eta; };
      out.tau_ = [tau](std::int64_t) { return tau; };
      break;
    }
    case Regime::cvx_hp_anytime:
    case Regime::cvx_ex_anytime: {
      double gamma = kInf;
      double lambda = kInf;
      if (hp) {
        const double vp = (*c.varphi_star == 0.0) ? 0.0 : *c.varphi_star * *c.psi_star;
        gamma = (D / G) / (vp + L);
        const double tp = std::pow(tau_c, p);
        lambda = D / std::sqrt(L * L + slp / tp + s * s * std::pow(l, 2.0 * p - 2.0) / (tp * tp));
      } else {
        const double vt = *c.varphi_tilde_star;
        if (vt > 0.0) gamma = (D / G) / (vt * *c.psi_tilde_star);
        const double tp = std::pow(tau_c, p);
        const double denom = slp / tp + s * s * std::pow(l, 2.0 * p - 2.0) / (tp * tp);
        lambda = (denom > 0.0) ? D / std::sqrt(denom) : kInf;
      }
      const double eta_c = (D / G) / std::sqrt(slp / std::pow(G, p) + 1.0);
      c.gamma_star = gamma;
      c.eta_star = eta_c;
      c.lambda_star = lambda;

      // lambda_star / tau_star as a finite number: +inf without noise, D / sigma_l in the p = 2 limit.
      double lam_over_tau = kInf;
      if (!noiseless) lam_over_tau = std::isinf(tau_c) ? D / l : lambda / tau_c;
      out.eta_ = [gamma, eta_c, lam_over_tau, p](std::int64_t t) {
        const double td = static_cast<double>(t);
        return std::min({gamma, eta_c / std::sqrt(td), lam_over_tau / std::pow(td, 1.0 / p)});
      };
      out.tau_ = [g_floor, tau_c, noiseless, p](std::int64_t t) { return threshold(g_floor, tau_c, noiseless, p, t); };
      break;
    }
    case Regime::str_hp:
    case Regime::str_ex: {
      const double mu = P.mu;
      out.eta_ = [mu](std::int64_t t) { return 6.0 / (mu * static_cast<double>(t)); };
      out.tau_ = [g_floor, tau_c, noiseless, p](std::int64_t t) { return threshold(g_floor, tau_c, noiseless, p, t); };
      break;
    }
  }
  return out;
}

double gamma_t(std::int64_t t, double mu) {
  require(t >= 1, "gamma_t needs t >= 1");
  require(mu > 0.0, "gamma_t needs mu > 0");
  const double td = static_cast<double>(t);
  return td * (td + 4.0) * (td + 5.0) / 30.0;
}

double gamma_t_product(std::int64_t t, double mu) {
  require(t >= 1, "gamma_t needs t >= 1");
  require(mu > 0.0, "gamma_t needs mu > 0");
  auto eta = [mu](std::int64_t s) { return 6.0 / (mu * static_cast<double>(s)); };
  double prod = 1.0;
  for (std::int64_t s = 2; s <= t; ++s) prod *= (1.0 + mu * eta(s - 1)) / (1.0 + mu * eta(s) / 2.0);
  return prod;
}

}  // namespace htclip
