#include "htclip/clipping.hpp"
#include "htclip/hardness.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace htclip;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

HardProblem dv_instance(Index d, double q, double theta, double p = 2.0) {
  HardParams hp{HardRegime::cvx_fano, q, theta, 1.0, 1.0, 0.0};
  Vector v = Vector::Ones(d);
  for (Index i = 1; i < d; i += 2) v[i] = -1.0;
  return make_hard_instance(HardKind::cvx, d, d, hp, v, p, NoiseSpec{p, 10.0, 10.0});
}

// Brute-force reference: enumerates {-1,0,1}^d directly from the marginal formula.
struct Brute {
  double du_max = 0, du_sq = 0, cov_op = 0, db = 0;
};

Brute brute_force(const HardInstance& h, const Vector& x, const Vector& grad, double tau) {
  const Index d = h.d;
  std::vector<std::pair<double, Vector>> out;
  std::vector<int> xi(static_cast<std::size_t>(d), -1);
  while (true) {
    double w = 1.0;
    Vector g(d);
    for (Index i = 0; i < d; ++i) {
      const int s = xi[static_cast<std::size_t>(i)];
      const double q = h.q[i], th = h.theta[i], vi = h.v[i];
      w *= s == 0 ? 1 - q : (s == 1 ? (1 + vi * th) * q / 2 : (1 - vi * th) * q / 2);
      const double z = x[i] - s * h.y[i];
      g[i] = h.M[i] * std::abs(s) * ((z > 0) - (z < 0));
    }
    const double n = g.norm();
    if (n > tau) g *= tau / n;
    out.emplace_back(w, g);
    Index k = 0;
    while (k < d && xi[static_cast<std::size_t>(k)] == 1) xi[static_cast<std::size_t>(k++)] = -1;
    if (k == d) break;
    ++xi[static_cast<std::size_t>(k)];
  }
  Vector mean = Vector::Zero(d);
  for (const auto& [w, g] : out) mean += w * g;
  Brute b;
  Matrix cov = Matrix::Zero(d, d);
  for (const auto& [w, g] : out) {
    const Vector du = g - mean;
    if (w > 0) b.du_max = std::max(b.du_max, du.norm());
    b.du_sq += w * du.squaredNorm();
    cov += w * du * du.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  b.cov_op = es.eigenvalues().cwiseAbs().maxCoeff();
  b.db = (mean - grad).norm();
  return b;
}

}  // namespace

TEST(Clipping, ClipExamples) {
  EXPECT_EQ(clip(vec({3, 4}), 2.5), vec({1.5, 2.0}));
  EXPECT_EQ(clip(vec({0, 0}), 1.0), vec({0, 0}));
  EXPECT_EQ(clip(vec({1e300, -3}), kInf), vec({1e300, -3}));
  EXPECT_THROW(clip(vec({1, 1}), 0.0), ContractViolation);
  EXPECT_THROW(clip(vec({1, 1}), -1.0), ContractViolation);
}

TEST(Clipping, NonexpansiveAndBounded) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 100'000; ++k) {
    Vector a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    const double tau = 0.1 + 5.0 * uniform01(rng);
    const Vector ca = clip(a, tau), cb = clip(b, tau);
    EXPECT_LE((ca - cb).norm(), (a - b).norm() + 1e-12);
    EXPECT_LE(ca.norm(), std::min(a.norm(), tau) * (1 + 1e-15));
  }
}

TEST(Clipping, BoundExamples) {
  ClipBounds b = clip_bounds(1.5, 0.0, 0.0, 0.0, 3.0, 0.5);
  EXPECT_EQ(b.value[0], 6.0);
  for (int k = 1; k < 6; ++k) EXPECT_EQ(b.value[static_cast<std::size_t>(k)], 0.0);

  b = clip_bounds(2.0, 1.0, 2.0, 1.0, 4.0, 0.5);
  EXPECT_DOUBLE_EQ(b.value[1], 16.0);
  EXPECT_DOUBLE_EQ(b.value[5], 1.0);
  EXPECT_TRUE(b.chi);

  // Growing tau at p < 2: bound 2 grows, bounds 5 and 6 shrink toward 0.
  double prev2 = 0, prev5 = kInf, prev6 = kInf;
  for (double tau = 1.0; tau < 1e8; tau *= 10) {
    b = clip_bounds(1.5, 1.0, 2.0, 0.5, tau, 0.5);
    EXPECT_GT(b.value[1], prev2);
    EXPECT_LT(b.value[4], prev5);
    EXPECT_LT(b.value[5], prev6);
    prev2 = b.value[1];
    prev5 = b.value[4];
    prev6 = b.value[5];
  }
  EXPECT_LT(prev5, 1e-3);
  EXPECT_FALSE(clip_bounds(1.5, 1.0, 2.0, 3.0, 4.0, 0.5).chi);
}

TEST(Clipping, BoundFormulasIndependent) {
  Rng rng(2);
  for (int k = 0; k < 1000; ++k) {
    const double p = 1.0 + uniform01(rng) + 1e-9;
    const double l = 3.0 * uniform01(rng) + 0.01;
    const double s = l * (0.1 + 0.9 * uniform01(rng));
    const double f = 2.0 * uniform01(rng);
    const double tau = 0.1 + 10.0 * uniform01(rng);
    const double a = 0.05 + 0.9 * uniform01(rng);
    const ClipBounds b = clip_bounds(p, s, l, f, tau, a);
    const double ref[6] = {
        2 * tau,
        4 * std::pow(l, p) * std::pow(tau, 2 - p),
        4 * std::pow(s, p) * std::pow(tau, 2 - p) + 4 * f * f,
        4 * std::pow(s, p) * std::pow(tau, 2 - p) + 4 * std::pow(a, 1 - p) * std::pow(l, p) * f * f / std::pow(tau, p),
        std::sqrt(2.0) * (std::pow(l, p - 1) + std::pow(f, p - 1)) * s * std::pow(tau, 1 - p) +
            2 * (std::pow(l, p) + std::pow(f, p)) * f / std::pow(tau, p),
        s * std::pow(l, p - 1) * std::pow(tau, 1 - p) + std::pow(a, 1 - p) * std::pow(l, p) * f / std::pow(tau, p)};
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(b.value[static_cast<std::size_t>(i)], ref[i], 1e-12 * (1 + ref[i]));
    EXPECT_EQ(b.chi, (1 - a) * tau >= f);
  }
}

TEST(Clipping, OperatorNorm) {
  EXPECT_NEAR(operator_norm(Matrix::Identity(3, 3)), 1.0, 1e-14);
  Matrix D = Vector(vec({1, 5, 2})).asDiagonal();
  EXPECT_NEAR(operator_norm(D), 5.0, 1e-14);
  const Vector u = vec({1, 2, 1, 1});  // ||u||^2 = 7
  EXPECT_NEAR(operator_norm(u * u.transpose()), 7.0, 1e-13);
  Matrix A(2, 2);
  A << 0, 1, 2, 0;
  EXPECT_THROW(operator_norm(A), ContractViolation);
  // Power-iteration branch.
  Rng rng(3);
  const Index n = 80;
  Matrix B(n, n);
  std::normal_distribution<double> nd(0, 1);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) B(i, j) = nd(rng);
  const Matrix S = B + B.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  EXPECT_NEAR(operator_norm(S), es.eigenvalues().cwiseAbs().maxCoeff(), 1e-8 * es.eigenvalues().cwiseAbs().maxCoeff());
}

TEST(Clipping, ExactZeroNoise) {
  auto obj = std::make_shared<const CompositeObjective>(
      make_objective(EuclidNorm{1.0, Vector::Zero(2)}, ZeroReg{}, AllSpace{2}));
  const GradOracle o = make_oracle(obj, Deterministic{}, 2.0);
  const Vector x = vec({1, 1});
  const auto rep = clip_error_exact(o, x, subgrad_f(*obj, x), 2.0, 0.5);
  EXPECT_EQ(rep.measured.du_max_norm, 0.0);
  EXPECT_EQ(rep.measured.du_sq_mean, 0.0);
  EXPECT_EQ(rep.measured.du_cov_opnorm, 0.0);
  EXPECT_EQ(rep.measured.db_norm, 0.0);
  EXPECT_TRUE(rep.all_pass());
}

TEST(Clipping, ExactSymmetricPointHasNoBias) {
  const HardProblem prob = dv_instance(1, 0.5, 0.0);
  const Vector x = vec({0});
  const auto rep = clip_error_exact(prob.oracle, x, subgrad_f(*prob.objective, x), 10.0, 0.5);
  EXPECT_EQ(rep.samples, 3u);
  EXPECT_NEAR(rep.measured.db_norm, 0.0, 1e-15);
}

TEST(Clipping, ExactMatchesBruteForceWithActiveClipping) {
  const HardProblem prob = dv_instance(3, 0.5, 0.1);
  const Vector x = vec({0.3, -0.2, 0.1});
  const Vector grad = subgrad_f(*prob.objective, x);
  const double tau = 1.5;  // clips the outcomes with two or three nonzero coordinates
  const auto rep = clip_error_exact(prob.oracle, x, grad, tau, 0.5);
  const Brute b = brute_force(*prob.instance, x, grad, tau);
  EXPECT_EQ(rep.samples, 27u);
  EXPECT_NEAR(rep.measured.du_max_norm, b.du_max, 1e-12);
  EXPECT_NEAR(rep.measured.du_sq_mean, b.du_sq, 1e-12);
  EXPECT_NEAR(rep.measured.du_cov_opnorm, b.cov_op, 1e-12);
  EXPECT_NEAR(rep.measured.db_norm, b.db, 1e-12);
  EXPECT_LE(rep.measured.du_cov_opnorm, rep.measured.du_sq_mean + 1e-15);
}

TEST(Clipping, ExactBoundsHoldOnGrid) {
  for (Index d = 1; d <= 4; ++d) {
    for (double q : {0.3, 0.7}) {
      for (double th : {0.0, 0.1}) {
        for (double p : {1.5, 2.0}) {
          const HardProblem prob = dv_instance(d, q, th, p);
          const Vector x = Vector::LinSpaced(d, -0.4, 0.4);
          const Vector grad = subgrad_f(*prob.objective, x);
          // chi = 1 everywhere at tau = 2||grad|| with alpha = 1/2; tau below ||grad|| still keeps 1, 2, 3, 5.
          for (double tau : {2.0 * std::max(grad.norm(), 1e-3), 0.5 * grad.norm() + 1e-3}) {
            const auto rep = clip_error_exact(prob.oracle, x, grad, tau, 0.5);
            for (int k : {0, 1, 2, 4}) EXPECT_TRUE(rep.pass[static_cast<std::size_t>(k)]) << "bound " << k + 1;
            if (rep.chi) {
              EXPECT_TRUE(rep.all_pass());
            }
            EXPECT_LE(rep.measured.du_cov_opnorm, rep.measured.du_sq_mean + 1e-15);
          }
        }
      }
    }
  }
}

TEST(Clipping, CapacityErrorOnHugeSupport) {
  const HardProblem prob = dv_instance(14, 0.5, 0.1);
  const Vector x = Vector::Zero(14);
  EXPECT_THROW(clip_error_exact(prob.oracle, x, subgrad_f(*prob.objective, x), 2.0, 0.5), CapacityError);
}

TEST(Clipping, MonteCarloDeterministicIsZero) {
  auto obj = std::make_shared<const CompositeObjective>(
      make_objective(EuclidNorm{1.0, Vector::Zero(2)}, ZeroReg{}, AllSpace{2}));
  const GradOracle o = make_oracle(obj, Deterministic{}, 2.0);
  Rng rng(4);
  const Vector x = vec({1, 1});
  const auto rep = clip_error_mc(o, x, subgrad_f(*obj, x), 2.0, 0.5, 10'000, rng);
  EXPECT_NEAR(rep.measured.du_sq_mean, 0.0, 1e-20);
  EXPECT_NEAR(rep.measured.db_norm, 0.0, 1e-12);
  EXPECT_THROW(clip_error_mc(o, x, subgrad_f(*obj, x), 2.0, 0.5, 9'999, rng), ContractViolation);
}

TEST(Clipping, MonteCarloGaussianUnclipped) {
  const Index d = 4;
  auto obj = std::make_shared<const CompositeObjective>(
      make_objective(EuclidNorm{1.0, Vector::Zero(d)}, ZeroReg{}, AllSpace{d}));
  const GradOracle o = make_oracle(obj, AdditiveGaussian{Vector::Ones(d)}, 2.0);
  Rng rng(5);
  const Vector x = Vector::Ones(d);
  const auto rep = clip_error_mc(o, x, subgrad_f(*obj, x), kInf, 0.5, 1'000'000, rng);
  EXPECT_LE(rep.measured.db_norm, 3.0 * rep.stderr_margin.db_norm);
  EXPECT_NEAR(rep.measured.du_sq_mean, 4.0, 0.05);
}

TEST(Clipping, MonteCarloAgreesWithExact) {
  const HardProblem prob = dv_instance(3, 0.5, 0.1);
  const Vector x = vec({0.3, -0.2, 0.1});
  const Vector grad = subgrad_f(*prob.objective, x);
  const auto ex = clip_error_exact(prob.oracle, x, grad, 1.5, 0.5);
  Rng rng(6);
  const auto mc = clip_error_mc(prob.oracle, x, grad, 1.5, 0.5, 1'000'000, rng);
  EXPECT_LE(std::abs(mc.measured.du_sq_mean - ex.measured.du_sq_mean), 5 * mc.stderr_margin.du_sq_mean);
  EXPECT_LE(std::abs(mc.measured.du_cov_opnorm - ex.measured.du_cov_opnorm), 5 * mc.stderr_margin.du_cov_opnorm);
  EXPECT_LE(std::abs(mc.measured.db_norm - ex.measured.db_norm), 5 * mc.stderr_margin.db_norm);
  // Sample support is the same; only the centring mean differs.
  EXPECT_NEAR(mc.measured.du_max_norm, ex.measured.du_max_norm, 0.01);
}
