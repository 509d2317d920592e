#include "htclip/json_io.hpp"

#include <cmath>

namespace htclip {

using nlohmann::json;

json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json json_number(const std::optional<double>& v) { return v ? json_number(*v) : json(nullptr); }

json json_vector(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(json_number(v[i]));
  return out;
}

json to_json(const NoiseSpec& noise) {
  return {{"p", noise.p},
          {"sigma_s", json_number(noise.sigma_s)},
          {"sigma_l", json_number(noise.sigma_l)},
          {"d_eff", json_number(d_eff_of(noise.sigma_s, noise.sigma_l))}};
}

json to_json(const ScheduleConstants& c) {
  return {{"d_eff", json_number(c.d_eff)},
          {"ln_3_over_delta", json_number(c.ln_3_over_delta)},
          {"tau_star", json_number(c.tau_star)},
          {"varphi_star", json_number(c.varphi_star)},
          {"psi_star", json_number(c.psi_star)},
          {"tau_tilde_star", json_number(c.tau_tilde_star)},
          {"varphi_tilde_star", json_number(c.varphi_tilde_star)},
          {"psi_tilde_star", json_number(c.psi_tilde_star)},
          {"varphi", json_number(c.varphi)},
          {"eta_star", json_number(c.eta_star)},
          {"gamma_star", json_number(c.gamma_star)},
          {"lambda_star", json_number(c.lambda_star)},
          {"critical_time", json_number(c.critical_time)}};
}

json to_json(const ClipErrorReport& r) {
  auto measured = [](const ClipMeasured& m) {
    return json{{"du_max_norm", json_number(m.du_max_norm)},
                {"du_sq_mean", json_number(m.du_sq_mean)},
                {"du_cov_opnorm", json_number(m.du_cov_opnorm)},
                {"db_norm", json_number(m.db_norm)}};
  };
  json bounds = json::array();
  for (int k = 0; k < 6; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    bounds.push_back({{"index", k + 1},
                      {"bound", json_number(r.bounds[ku])},
                      {"measured", json_number(r.measured_for(k))},
                      {"applicable", r.applicable[ku]},
                      {"pass", r.pass[ku]}});
  }
  json method = {{"kind", r.method == ClipMethod::exact_enumeration ? "exact-enumeration" : "monte-carlo"},
                 {"samples", r.samples}};
  if (r.method == ClipMethod::monte_carlo) {
    method["margin_k"] = r.margin_k;
    method["stderr"] = measured(r.stderr_margin);
  }
  return {{"tau", json_number(r.tau)},
          {"alpha", r.alpha},
          {"f_norm", json_number(r.f_norm)},
          {"chi", r.chi},
          {"p", r.p},
          {"sigma_s", json_number(r.sigma_s)},
          {"sigma_l", json_number(r.sigma_l)},
          {"measured", measured(r.measured)},
          {"bounds", bounds},
          {"method", method},
          {"all_pass", r.all_pass()}};
}

json to_json(const HardParams& p) {
  json j = {{"regime", to_string(p.regime)}, {"q", p.q}, {"theta", p.theta}, {"M", p.M}};
  if (kind_of(p.regime) == HardKind::cvx) {
    j["y"] = p.y;
  } else {
    j["mu"] = p.mu;
  }
  return j;
}

json to_json(const HardInstance& h) {
  return {{"kind", h.kind == HardKind::cvx ? "cvx" : "str"},
          {"d", h.d},
          {"d_star", h.d_star},
          {"v", json_vector(h.v)},
          {"q", json_vector(h.q)},
          {"theta", json_vector(h.theta)},
          {"M", json_vector(h.M)},
          {"y", json_vector(h.y)},
          {"mu", h.mu},
          {"x_star", json_vector(h.x_star)},
          {"F_star", json_number(h.F_star)}};
}

json to_json(const Codebook& c) {
  return {{"d_star", c.d_star},
          {"min_distance", c.min_distance},
          {"target_size", c.target_size},
          {"achieved_size", c.achieved_size},
          {"shortfall", c.shortfall}};
}

json to_json(const StableDeffBound& b) {
  return {{"value", json_number(b.value)},
          {"epsilon", json_number(b.epsilon)},
          {"epsilon_star", json_number(b.epsilon_star)},
          {"omega_d", json_number(b.omega_d)}};
}

json to_json(const MomentEstimate& e) {
  return {{"sigma_s_p_lower", json_number(e.sigma_s_p_lower)}, {"sigma_l_p", json_number(e.sigma_l_p)}};
}

}  // namespace htclip
