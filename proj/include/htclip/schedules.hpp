#pragma once

#include "htclip/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

namespace htclip {

enum class Regime { cvx_hp_T, cvx_hp_anytime, cvx_ex_T, cvx_ex_anytime, str_hp, str_ex };
enum class Averaging { plain, weighted, last };

std::string_view to_string(Regime regime);
Regime regime_from_string(std::string_view name);
std::string_view to_string(Averaging mode);
Averaging averaging_from_string(std::string_view name);

bool is_strongly_convex(Regime regime);
bool is_high_probability(Regime regime);
bool is_known_T(Regime regime);
bool is_anytime(Regime regime);
Averaging designated_averaging(Regime regime);

struct ScheduleParams {
  double p = 2.0;
  double sigma_s = 0.0;
  double sigma_l = 0.0;
  double G = 1.0;
  double D = 1.0;
  double mu = 0.0;
  double delta = 0.1;
  double alpha_clip = 0.5;
  std::optional<std::int64_t> T_known;
};

/// sigma_l^2 / sigma_s^2 with 0/0 = 0.
double d_eff_of(double sigma_s, double sigma_l);

struct HpParams {
  double tau_star = kInf;
  double varphi_star = 0.0;
  std::optional<double> psi_star;  // defined when varphi_star >= 1
};

HpParams hp_params(double p, double sigma_s, double sigma_l, double delta);

struct ExParams {
  double tau_tilde_star = kInf;
  double varphi_tilde_star = 0.0;
  std::optional<double> psi_tilde_star;
};

ExParams ex_params(double p, double sigma_s, double sigma_l);

/// min{varphi_star, sqrt((1 - alpha)^p varphi_star (sigma_l / G)^p T)}
double varphi_of(double varphi_star, double alpha, double sigma_l, double G, double p, std::int64_t T);

/// Resolved constants; entries that do not apply to a regime stay empty.
struct ScheduleConstants {
  double d_eff = 0.0;
  double ln_3_over_delta = 0.0;
  std::optional<double> tau_star;
  std::optional<double> varphi_star;
  std::optional<double> psi_star;
  std::optional<double> tau_tilde_star;
  std::optional<double> varphi_tilde_star;
  std::optional<double> psi_tilde_star;
  std::optional<double> varphi;  // T-dependent, known-T regimes
  std::optional<double> eta_star;
  std::optional<double> gamma_star;
  std::optional<double> lambda_star;
  std::optional<double> critical_time;  // varphi_star^2, informational
};

class Schedule {
 public:
  using Fn = std::function<double(std::int64_t)>;

  /// Arbitrary step/threshold functions, for experiments outside the theorem presets.
  static Schedule custom(Fn eta, Fn tau, Averaging averaging = Averaging::plain);

  double eta(std::int64_t t) const { return eta_(t); }
  double tau(std::int64_t t) const { return tau_(t); }

  std::optional<Regime> regime() const { return regime_; }
  Averaging averaging() const { return averaging_; }
  const ScheduleParams& params() const { return params_; }
  const ScheduleConstants& constants() const { return constants_; }

 private:
  friend Schedule make_schedule(Regime regime, const ScheduleParams& params);

  std::optional<Regime> regime_;
  Averaging averaging_ = Averaging::plain;
  ScheduleParams params_;
  ScheduleConstants constants_;
  Fn eta_;
  Fn tau_;
};

Schedule make_schedule(Regime regime, const ScheduleParams& params);

/// Closed form t(t+4)(t+5)/30 for the stepsizes 6/(mu t).
double gamma_t(std::int64_t t, double mu);

/// The defining product over s = 2..t of (1 + mu eta_{s-1}) / (1 + mu eta_s / 2).
double gamma_t_product(std::int64_t t, double mu);

}  // namespace htclip
