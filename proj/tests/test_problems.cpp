#include "htclip/hardness.hpp"
#include "htclip/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace htclip;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector random_vector(Index d, Rng& rng, double scale = 3.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

// Minimizes the raw prox objective by projected gradient descent with central differences.
// Everything here is written from the definition, independent of the library closed form.
Vector numeric_prox(double mu, const Vector& center, std::optional<double> radius, const Vector& x_t, const Vector& g,
                    double eta, double s, const Vector& x1) {
  const Index d = x_t.size();
  auto h = [&](const Vector& x) {
    double v = g.dot(x) + (x - x_t).squaredNorm() / (2.0 * eta);
    if (mu > 0.0) v += 0.5 * mu * (x - center).squaredNorm();
    if (s > 0.0) v += 0.5 * s * (x - x1).squaredNorm();
    return v;
  };
  auto proj = [&](Vector x) {
    if (radius && x.norm() > *radius) x *= *radius / x.norm();
    return x;
  };
  const double L = 1.0 / eta + mu + s;
  Vector x = proj(x_t);
  for (int it = 0; it < 4000; ++it) {
    Vector grad(d);
    for (Index i = 0; i < d; ++i) {
      const double step = 1e-5 * std::max(1.0, std::abs(x[i]));
      Vector a = x, b = x;
      a[i] += step;
      b[i] -= step;
      grad[i] = (h(a) - h(b)) / (2.0 * step);
    }
    x = proj(x - grad / L);
  }
  return x;
}

}  // namespace

TEST(Problems, EvalFExamples) {
  const auto abs1 = make_objective(AbsSum{vec({1}), vec({0})}, ZeroReg{}, AllSpace{1});
  EXPECT_EQ(eval_F(abs1, vec({0})), 0.0);

  const auto quad = make_objective(AbsSum{vec({0}), vec({0})}, QuadReg{2.0, vec({0})}, AllSpace{1});
  EXPECT_DOUBLE_EQ(eval_F(quad, vec({3})), 9.0);

  // Hard-cvx value as the expectation of M|x - xi y| over the three outcomes of xi.
  HardParams hp{HardRegime::cvx_fano, 0.5, 0.1, 1.0, 1.0, 0.0};
  const HardProblem prob = make_hard_instance(HardKind::cvx, 1, 1, hp, vec({1}), 2.0,
                                              NoiseSpec{2.0, 2.0, 2.0});
  const double q = 0.5, th = 0.1, M = 1.0, y = 1.0, x = 1.0;
  const double expect = (1 - q) * M * std::abs(x) + q * (1 + th) / 2 * M * std::abs(x - y) +
                        q * (1 - th) / 2 * M * std::abs(x + y) - (1 - q) * M * std::abs(x);
  EXPECT_NEAR(eval_F(*prob.objective, vec({1})), expect, 1e-15);
  EXPECT_NEAR(eval_F(*prob.objective, vec({1})), 0.45, 1e-15);
}

TEST(Problems, SubgradExamples) {
  const auto a1 = make_objective(AbsSum{vec({1}), vec({0})}, ZeroReg{}, AllSpace{1});
  EXPECT_EQ(subgrad_f(a1, vec({0}))[0], 0.0);
  const auto a2 = make_objective(AbsSum{vec({2}), vec({0})}, ZeroReg{}, AllSpace{1});
  EXPECT_EQ(subgrad_f(a2, vec({-3}))[0], -2.0);
  const auto e = make_objective(EuclidNorm{1.0, vec({0, 0})}, ZeroReg{}, AllSpace{2});
  const Vector g = subgrad_f(e, vec({3, 4}));
  EXPECT_NEAR(g[0], 0.6, 1e-15);
  EXPECT_NEAR(g[1], 0.8, 1e-15);
  EXPECT_EQ(subgrad_f(e, vec({0, 0})).norm(), 0.0);
}

TEST(Problems, DimensionMismatchThrows) {
  const auto e = make_objective(EuclidNorm{1.0, vec({0, 0})}, ZeroReg{}, AllSpace{2});
  EXPECT_THROW(eval_F(e, vec({1})), ContractViolation);
}

TEST(Problems, ProxExamples) {
  Vector out = prox_step(ZeroReg{}, AllSpace{2}, vec({2, 0}), vec({1, 0}), 1.0);
  EXPECT_EQ(out, vec({1, 0}));
  out = prox_step(QuadReg{1.0, vec({0, 0})}, AllSpace{2}, vec({2, 0}), vec({0, 0}), 1.0);
  EXPECT_NEAR(out[0], 1.0, 1e-15);
  const Vector oracle = numeric_prox(1.0, vec({0, 0}), std::nullopt, vec({2, 0}), vec({0, 0}), 1.0, 0.0, vec({0, 0}));
  EXPECT_NEAR((out - oracle).norm(), 0.0, 1e-8);
  out = prox_step(ZeroReg{}, Ball{vec({0, 0}), 1.0}, vec({2, 0}), vec({0, 0}), 1.0);
  EXPECT_NEAR(out[0], 1.0, 1e-15);
  EXPECT_THROW(prox_step(ZeroReg{}, AllSpace{2}, vec({2, 0}), vec({0, 0}), 0.0), ContractViolation);
}

TEST(Problems, StabilizedProxExamples) {
  // eta_t = eta_next: anchor weight vanishes and the result is the plain prox, bit for bit.
  const Vector x_t = vec({0.3, -1.7});
  const Vector g = vec({0.25, 0.5});
  EXPECT_EQ(stabilized_prox_step(QuadReg{0.7, vec({1, 1})}, Ball{vec({0, 0}), 1.5}, x_t, vec({0, 1}), g, 0.4, 0.4),
            prox_step(QuadReg{0.7, vec({1, 1})}, Ball{vec({0, 0}), 1.5}, x_t, g, 0.4));

  // x1 = 0, x_t = 1, g = 0, eta 1 -> 0.5: x = 0.5.
  Vector out = stabilized_prox_step(ZeroReg{}, AllSpace{1}, vec({1}), vec({0}), vec({0}), 1.0, 0.5);
  EXPECT_NEAR(out[0], 0.5, 1e-15);
  // Same with g = 1: x = 0.
  out = stabilized_prox_step(ZeroReg{}, AllSpace{1}, vec({1}), vec({0}), vec({1}), 1.0, 0.5);
  EXPECT_NEAR(out[0], 0.0, 1e-15);
  // x1 = x_t = 1, g = 1: the anchor pulls toward 1, giving 0.5 (checked against the numeric minimizer).
  out = stabilized_prox_step(ZeroReg{}, AllSpace{1}, vec({1}), vec({1}), vec({1}), 1.0, 0.5);
  const Vector oracle = numeric_prox(0.0, vec({0}), std::nullopt, vec({1}), vec({1}), 1.0, 1.0, vec({1}));
  EXPECT_NEAR(out[0], oracle[0], 1e-8);
  EXPECT_NEAR(out[0], 0.5, 1e-15);

  EXPECT_THROW(stabilized_prox_step(ZeroReg{}, AllSpace{1}, vec({1}), vec({0}), vec({0}), 0.5, 1.0),
               ContractViolation);
}

TEST(Problems, ProjectExamples) {
  EXPECT_EQ(project(AllSpace{2}, vec({5, 5})), vec({5, 5}));
  Vector p = project(Ball{vec({0, 0}), 1.0}, vec({3, 4}));
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);
  p = project(Ball{vec({1, 0}), 2.0}, vec({4, 0}));
  EXPECT_NEAR(p[0], 3.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
}

TEST(Problems, ProxMatchesNumericMinimizer) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = 1 + trial % 3;
    const bool quad = trial % 2 == 0;
    const bool ball = (trial / 2) % 2 == 0;
    const double mu = quad ? 0.1 + 2.0 * uniform01(rng) : 0.0;
    const Vector center = random_vector(d, rng);
    const std::optional<double> radius = ball ? std::optional<double>(0.5 + 2.0 * uniform01(rng)) : std::nullopt;
    RKind r = ZeroReg{};
    if (quad) r = QuadReg{mu, center};
    Domain dom = AllSpace{d};
    if (radius) dom = Ball{Vector::Zero(d), *radius};
    const Vector x_t = random_vector(d, rng);
    const Vector g = random_vector(d, rng);
    const double eta = 0.05 + uniform01(rng);
    const double eta_next = eta * (0.2 + 0.8 * uniform01(rng));
    const Vector x1 = project(dom, random_vector(d, rng));

    const Vector a = prox_step(r, dom, x_t, g, eta);
    EXPECT_LE((a - numeric_prox(mu, center, radius, x_t, g, eta, 0.0, x1)).norm(), 1e-6);
    EXPECT_TRUE(in_domain(dom, a));

    const double s = (eta / eta_next - 1.0) / eta;
    const Vector b = stabilized_prox_step(r, dom, x_t, x1, g, eta, eta_next);
    EXPECT_LE((b - numeric_prox(mu, center, radius, x_t, g, eta, s, x1)).norm(), 1e-6);
    EXPECT_TRUE(in_domain(dom, b));
  }
}

TEST(Problems, SubgradientInequalityAndLipschitz) {
  Rng rng(5);
  const Index d = 3;
  const Vector M = vec({0.5, 1.0, 2.0});
  const Vector y = vec({1, -1, 0.5});
  std::vector<CompositeObjective> objs = {
      make_objective(AbsSum{M, y}, ZeroReg{}, AllSpace{d}),
      make_objective(EuclidNorm{1.5, y}, ZeroReg{}, AllSpace{d}),
  };
  HardParams hp{HardRegime::cvx_fano, 0.3, 0.1, 1.2, 0.7, 0.0};
  const HardProblem hard = make_hard_instance(HardKind::cvx, d, d, hp, vec({1, -1, 1}), 2.0, NoiseSpec{2, 5, 5});
  objs.push_back(*hard.objective);

  for (const auto& obj : objs) {
    for (int k = 0; k < 10000; ++k) {
      const Vector x = random_vector(d, rng);
      const Vector z = random_vector(d, rng);
      const Vector g = subgrad_f(obj, x);
      EXPECT_GE(eval_f(obj, z), eval_f(obj, x) + g.dot(z - x) - 1e-9);
      EXPECT_LE(g.norm(), obj.lipschitz_G + 1e-12);
    }
  }
}

TEST(Problems, OptimumIsMinimal) {
  Rng rng(9);
  const Index d = 3;
  const Vector y = vec({0.2, -0.1, 0.3});
  std::vector<CompositeObjective> objs = {
      make_objective(AbsSum{vec({1, 2, 3}), y}, ZeroReg{}, AllSpace{d}),
      make_objective(EuclidNorm{1.0, y}, QuadReg{0.5, y}, Ball{Vector::Zero(d), 1.0}),
      make_objective(Linear{vec({1, -2, 0.5})}, ZeroReg{}, Ball{Vector::Zero(d), 2.0}),
  };
  for (const auto& obj : objs) {
    ASSERT_TRUE(obj.optimum.has_value());
    EXPECT_EQ(obj.mu > 0.0, std::holds_alternative<QuadReg>(obj.r));
    for (int k = 0; k < 1000; ++k) {
      const Vector x = project(obj.domain, random_vector(d, rng, 1.0));
      EXPECT_LE(obj.optimum->F_star, eval_F(obj, x) + 1e-9);
    }
  }
}

TEST(Problems, ReductionPreservesF) {
  Rng rng(3);
  const Index d = 2;
  // f = (mu/2)||x||^2 written as a zero loss plus the quadratic; the reduced loss is identically 0.
  auto src0 = std::make_shared<const CompositeObjective>(
      make_objective(AbsSum{Vector::Zero(d), Vector::Zero(d)}, QuadReg{2.0, Vector::Zero(d)}, AllSpace{d}));
  const auto red0 = reduce_strongly_convex(src0, 2.0, Vector::Zero(d));
  EXPECT_EQ(std::get<QuadReg>(red0.r).mu, 2.0);
  for (int k = 0; k < 100; ++k) EXPECT_NEAR(eval_f(red0, random_vector(d, rng)), 0.0, 1e-12);

  auto src = std::make_shared<const CompositeObjective>(
      make_objective(EuclidNorm{1.0, vec({1, 2})}, QuadReg{0.8, vec({0.5, 0})}, AllSpace{d}));
  const auto red = reduce_strongly_convex(src, 0.8, vec({-1, 1}));
  EXPECT_DOUBLE_EQ(red.lipschitz_G, 5.0 * src->lipschitz_G);
  for (int k = 0; k < 1000; ++k) {
    const Vector x = random_vector(d, rng);
    EXPECT_NEAR(eval_F(red, x), eval_F(*src, x), 1e-12);
  }

  HardParams hp{HardRegime::str_fano, 0.5, 0.1, 1.0, 0.0, 2.0};
  const HardProblem hard = make_hard_instance(HardKind::str, d, d, hp, vec({1, -1}), 2.0, NoiseSpec{2, 5, 5});
  const auto red_h = reduce_strongly_convex(hard.objective, 2.0, Vector::Zero(d));
  for (int k = 0; k < 1000; ++k) {
    const Vector x = random_vector(d, rng);
    EXPECT_NEAR(eval_F(red_h, x), eval_F(*hard.objective, x), 1e-12);
  }
  EXPECT_THROW(reduce_strongly_convex(src, 0.0, vec({0, 0})), ContractViolation);
}
