#include "htclip/schedules.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace htclip;

namespace {

ScheduleParams params(double p, double s, double l, double mu = 0.0, std::optional<std::int64_t> T = std::nullopt) {
  ScheduleParams P;
  P.p = p;
  P.sigma_s = s;
  P.sigma_l = l;
  P.mu = mu;
  P.T_known = T;
  return P;
}

constexpr Regime kAll[] = {Regime::cvx_hp_T, Regime::cvx_hp_anytime, Regime::cvx_ex_T,
                           Regime::cvx_ex_anytime, Regime::str_hp, Regime::str_ex};

}  // namespace

TEST(Schedules, RegimeNamesRoundTrip) {
  for (Regime r : kAll) EXPECT_EQ(regime_from_string(to_string(r)), r);
  EXPECT_THROW(regime_from_string("cvx"), ConfigError);
  EXPECT_EQ(designated_averaging(Regime::str_ex), Averaging::weighted);
  EXPECT_EQ(designated_averaging(Regime::cvx_hp_T), Averaging::plain);
}

TEST(Schedules, EffectiveDimension) {
  EXPECT_EQ(d_eff_of(0, 0), 0.0);
  EXPECT_EQ(d_eff_of(1, 1), 1.0);
  EXPECT_EQ(d_eff_of(1, 2), 4.0);
  EXPECT_THROW(d_eff_of(2, 1), ContractViolation);
}

TEST(Schedules, HighProbabilityConstants) {
  const double delta = 3.0 / std::exp(2.0);
  const HpParams h = hp_params(2.0, 1.0, 1.0, delta);
  EXPECT_NEAR(h.tau_star, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(h.tau_star, 0.70711, 1e-5);
  EXPECT_NEAR(h.varphi_star, 2.0, 1e-12);
  ASSERT_TRUE(h.psi_star.has_value());
  EXPECT_NEAR(*h.psi_star, 1.0 + std::log(2.0), 1e-12);

  const HpParams z = hp_params(1.5, 0.0, 0.0, 0.1);
  EXPECT_TRUE(std::isinf(z.tau_star));
  EXPECT_EQ(z.varphi_star, 0.0);
  EXPECT_FALSE(z.psi_star.has_value());
}

TEST(Schedules, InExpectationConstants) {
  const ExParams a = ex_params(2.0, 0.7, 3.0);
  EXPECT_TRUE(std::isinf(a.tau_tilde_star));
  EXPECT_EQ(a.varphi_tilde_star, 0.0);

  const ExParams b = ex_params(1.5, 1.0, 2.0);
  EXPECT_NEAR(b.varphi_tilde_star, 4.0, 1e-12);
  EXPECT_NEAR(b.tau_tilde_star, 2.0 / std::pow(4.0, 2.0 / 3.0), 1e-12);
  EXPECT_NEAR(b.tau_tilde_star, 0.79370, 1e-5);

  const ExParams c = ex_params(1.3, 1.7, 1.7);
  EXPECT_NEAR(c.varphi_tilde_star, 1.0, 1e-12);
  EXPECT_NEAR(c.tau_tilde_star, 1.7, 1e-12);
}

TEST(Schedules, ThresholdTimesPhiIdentity) {
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const double p = 1.0 + uniform01(rng) + 1e-6;
    const double l = 0.01 + 10.0 * uniform01(rng);
    const double s = l * (0.02 + 0.98 * uniform01(rng));
    const double delta = 0.001 + 0.999 * uniform01(rng);
    const HpParams h = hp_params(p, s, l, delta);
    EXPECT_NEAR(h.tau_star * std::pow(h.varphi_star, 1.0 / p), l, 1e-12 * l);
    const ExParams e = ex_params(p, s, l);
    EXPECT_NEAR(e.tau_tilde_star * std::pow(e.varphi_tilde_star, 1.0 / p), l, 1e-12 * l);
  }
  // p = 2 in expectation: inf * 0, resolved to +inf thresholds and no clipping.
  const ExParams e = ex_params(2.0, 1.0, 2.0);
  EXPECT_TRUE(std::isinf(e.tau_tilde_star));
}

TEST(Schedules, StronglyConvexStepsizes) {
  const Schedule s = make_schedule(Regime::str_hp, params(1.5, 1.0, 2.0, 1.0));
  EXPECT_DOUBLE_EQ(s.eta(1), 6.0);
  EXPECT_DOUBLE_EQ(s.eta(2), 3.0);
  EXPECT_DOUBLE_EQ(s.eta(10), 0.6);
  EXPECT_EQ(s.averaging(), Averaging::weighted);
}

TEST(Schedules, NoiselessKnownHorizon) {
  const double delta = 0.05;
  for (std::int64_t T : {1, 4, 100, 10000}) {
    ScheduleParams P = params(1.5, 0.0, 0.0, 0.0, T);
    P.G = 2.0;
    P.D = 3.0;
    P.delta = delta;
    const Schedule s = make_schedule(Regime::cvx_hp_T, P);
    EXPECT_EQ(s.tau(1), 4.0);
    EXPECT_EQ(s.tau(T), 4.0);
    const double expect = std::min(1.5 / std::log(3.0 / delta), 1.5 / std::sqrt(static_cast<double>(T)));
    EXPECT_NEAR(s.eta(1), expect, 1e-14);
  }
}

TEST(Schedules, SquareIntegrableInExpectationDoesNotClip) {
  const Schedule s = make_schedule(Regime::cvx_ex_T, params(2.0, 1.0, 2.0, 0.0, 100));
  EXPECT_TRUE(std::isinf(s.tau(1)));
  EXPECT_TRUE(std::isinf(s.tau(100)));
  EXPECT_GT(s.eta(1), 0.0);
  const Schedule a = make_schedule(Regime::cvx_ex_anytime, params(2.0, 1.0, 2.0));
  EXPECT_TRUE(std::isinf(a.tau(7)));
  EXPECT_TRUE(std::isfinite(a.eta(7)));
}

TEST(Schedules, AnytimeConstants) {
  ScheduleParams P = params(1.5, 1.0, 2.0);
  P.delta = 3.0 / std::exp(2.0);  // ln(3/delta) = 2
  const Schedule s = make_schedule(Regime::cvx_hp_anytime, P);
  const auto& c = s.constants();
  EXPECT_NEAR(*c.varphi_star, 4.0, 1e-12);
  EXPECT_NEAR(*c.psi_star, 1.0 + std::log(4.0), 1e-12);
  EXPECT_NEAR(*c.gamma_star, 1.0 / (4.0 * (1.0 + std::log(4.0)) + 2.0), 1e-12);
  EXPECT_NEAR(*c.gamma_star, 0.086616, 1e-6);
  EXPECT_NEAR(*c.eta_star, 1.0 / std::sqrt(std::pow(2.0, 1.5) + 1.0), 1e-12);
  const double tp = std::pow(*c.tau_star, 1.5);
  EXPECT_NEAR(*c.lambda_star, 1.0 / std::sqrt(4.0 + std::pow(2.0, 1.5) / tp + 2.0 / (tp * tp)), 1e-12);
  for (std::int64_t t : {1, 2, 50, 1000}) {
    const double td = static_cast<double>(t);
    const double eta = std::min({*c.gamma_star, *c.eta_star / std::sqrt(td),
                                 *c.lambda_star / (*c.tau_star * std::pow(td, 1.0 / 1.5))});
    EXPECT_NEAR(s.eta(t), eta, 1e-14);
    EXPECT_NEAR(s.tau(t), std::max(2.0, *c.tau_star * std::pow(td, 1.0 / 1.5)), 1e-12);
  }
}

TEST(Schedules, KnownHorizonStepsize) {
  const std::int64_t T = 1000;
  ScheduleParams P = params(1.5, 0.5, 1.0, 0.0, T);
  P.G = 1.0;
  P.D = 2.0;
  P.delta = 0.1;
  const Schedule s = make_schedule(Regime::cvx_hp_T, P);
  const auto& c = s.constants();
  const double L = std::log(30.0);
  const double Td = static_cast<double>(T);
  const double phi = std::min(*c.varphi_star, std::sqrt(std::pow(0.5, 1.5) * *c.varphi_star * Td));
  const double e1 = 2.0 / (phi + L);
  const double e2 = 2.0 / std::sqrt(2.0 * Td);
  const double coef = std::pow(0.5, 2.0 / 1.5 - 1.0) + std::pow(0.5, 1.0 / 1.5) * std::pow(L, 1.0 - 1.0 / 1.5);
  const double e3 = 2.0 / (coef * std::pow(Td, 1.0 / 1.5));
  EXPECT_NEAR(s.eta(1), std::min({e1, e2, e3}), 1e-14);
  EXPECT_NEAR(s.eta(T), s.eta(1), 0.0);
  EXPECT_NEAR(s.tau(5), std::max(2.0, *c.tau_star * std::pow(Td, 1.0 / 1.5)), 1e-12);
}

TEST(Schedules, GammaExamples) {
  EXPECT_DOUBLE_EQ(gamma_t(1, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(gamma_t(2, 1.0), 2.8);
  EXPECT_DOUBLE_EQ(gamma_t(4, 1.0), 9.6);
  EXPECT_NEAR(gamma_t_product(2, 1.0), 2.8, 1e-14);
  EXPECT_NEAR(gamma_t_product(4, 3.0), 9.6, 1e-13);
  EXPECT_THROW(gamma_t(0, 1.0), ContractViolation);
}

TEST(Schedules, GammaClosedFormMatchesProduct) {
  for (double mu : {0.1, 1.0, 10.0}) {
    double prod = 1.0;
    for (std::int64_t t = 1; t <= 10000; ++t) {
      if (t >= 2) {
        const double a = 6.0 / (mu * static_cast<double>(t - 1));
        const double b = 6.0 / (mu * static_cast<double>(t));
        prod *= (1.0 + mu * a) / (1.0 + mu * b / 2.0);
      }
      const double g = gamma_t(t, mu);
      ASSERT_LE(std::abs(g - prod), 1e-9 * g) << "t=" << t << " mu=" << mu;
      const double eta = 6.0 / (mu * static_cast<double>(t));
      const double td = static_cast<double>(t);
      ASSERT_NEAR(g * eta, (td + 4) * (td + 5) / (5 * mu), 1e-10 * g * eta);
    }
    EXPECT_NEAR(gamma_t_product(500, mu), gamma_t(500, mu), 1e-9 * gamma_t(500, mu));
  }
}

TEST(Schedules, PositivityFloorsAndMonotonicity) {
  Rng rng(12);
  for (int k = 0; k < 40; ++k) {
    const double p = (k % 4 == 0) ? 2.0 : 1.0 + uniform01(rng) + 1e-6;
    const double l = (k % 5 == 0) ? 0.0 : 0.1 + 3.0 * uniform01(rng);
    const double s = l * (0.1 + 0.9 * uniform01(rng));
    for (Regime r : kAll) {
      ScheduleParams P = params(p, s, l, is_strongly_convex(r) ? 0.5 + uniform01(rng) : 0.0,
                                is_known_T(r) ? std::optional<std::int64_t>(1 + k * 1000) : std::nullopt);
      P.G = 0.5 + uniform01(rng);
      P.D = 0.5 + uniform01(rng);
      P.alpha_clip = 0.2 + 0.6 * uniform01(rng);
      const Schedule sch = make_schedule(r, P);
      const double floor = P.G / (1.0 - P.alpha_clip);
      double prev = kInf;
      for (std::int64_t t = 1; t <= 1'000'000; t = t * 3 + 1) {
        const double e = sch.eta(t);
        ASSERT_GT(e, 0.0);
        ASSERT_GE(sch.tau(t), floor);
        if (!is_known_T(r)) {
          ASSERT_LE(e, prev);
        }
        prev = e;
      }
    }
  }
}

TEST(Schedules, PhiSaturates) {
  Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    const double p = 1.1 + 0.9 * uniform01(rng);
    const double l = 0.1 + 2.0 * uniform01(rng);
    const double s = l * (0.1 + 0.9 * uniform01(rng));
    const double G = 0.5 + uniform01(rng);
    const double a = 0.2 + 0.6 * uniform01(rng);
    const double vstar = hp_params(p, s, l, 0.1).varphi_star;
    const double crit = std::pow(G, p) * vstar / (std::pow(1 - a, p) * std::pow(l, p));
    for (std::int64_t T : {1LL, 10LL, 1000LL, 100000LL}) EXPECT_LE(varphi_of(vstar, a, l, G, p, T), vstar);
    const auto Tc = static_cast<std::int64_t>(std::ceil(crit));
    EXPECT_NEAR(varphi_of(vstar, a, l, G, p, Tc), vstar, 1e-12 * vstar);
    EXPECT_NEAR(varphi_of(vstar, a, l, G, p, 10 * Tc), vstar, 1e-12 * vstar);
  }
}

TEST(Schedules, Mismatches) {
  EXPECT_THROW(make_schedule(Regime::str_hp, params(1.5, 1, 2, 0.0)), ContractViolation);
  EXPECT_THROW(make_schedule(Regime::cvx_hp_anytime, params(1.5, 1, 2, 1.0)), ContractViolation);
  EXPECT_THROW(make_schedule(Regime::cvx_ex_T, params(1.5, 1, 2)), ContractViolation);
  EXPECT_THROW(make_schedule(Regime::cvx_ex_anytime, params(1.5, 2, 1)), ContractViolation);
  try {
    make_schedule(Regime::str_ex, params(1.5, 1, 2, 0.0));
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("regime/mu mismatch"), std::string::npos);
  }
}

TEST(Schedules, CustomSchedule) {
  const Schedule s = Schedule::custom([](std::int64_t t) { return 1.0 / t; }, [](std::int64_t) { return kInf; });
  EXPECT_FALSE(s.regime().has_value());
  EXPECT_EQ(s.eta(4), 0.25);
  EXPECT_TRUE(std::isinf(s.tau(1)));
}
