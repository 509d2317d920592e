#include "htclip/clipping.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace htclip {

namespace {

constexpr std::array<int, 6> kMeasuredSlot = {0, 1, 2, 2, 3, 3};

double slot(const ClipMeasured& m, int s) {
  switch (s) {
    case 0: return m.du_max_norm;
    case 1: return m.du_sq_mean;
    case 2: return m.du_cov_opnorm;
    default: return m.db_norm;
  }
}

void finish(ClipErrorReport& rep) {
  const ClipBounds b = clip_bounds(rep.p, rep.sigma_s, rep.sigma_l, rep.f_norm, rep.tau, rep.alpha);
  rep.bounds = b.value;
  rep.chi = b.chi;
  for (int k = 0; k < 6; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    rep.applicable[ku] = (k != 3 && k != 5) || rep.chi;
    rep.pass[ku] = !rep.applicable[ku] || rep.measured_for(k) <= rep.bounds[ku] + rep.margin_k * rep.stderr_for(k);
  }
}

double pow_or_zero(double base, double e) { return base == 0.0 ? 0.0 : std::pow(base, e); }

}  // namespace

ClipBounds clip_bounds(double p, double sigma_s, double sigma_l, double f_norm, double tau, double alpha) {
  require(tau > 0.0, "clipping threshold must be positive");
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(p > 1.0 && p <= 2.0, "p must lie in (1, 2]");
  const double f = f_norm;
  const double ssp = pow_or_zero(sigma_s, p);
  const double slp = pow_or_zero(sigma_l, p);
  const double t2p = std::pow(tau, 2.0 - p);
  const double t1p = std::pow(tau, 1.0 - p);
  const double tmp = std::pow(tau, -p);
  const double a1p = std::pow(alpha, 1.0 - p);

  ClipBounds b;
  b.chi = (1.0 - alpha) * tau >= f;
  b.value[0] = 2.0 * tau;
  b.value[1] = 4.0 * mul0(slp, t2p);
  b.value[2] = 4.0 * mul0(ssp, t2p) + 4.0 * f * f;
  b.value[3] = 4.0 * mul0(ssp, t2p) + 4.0 * a1p * mul0(slp * f * f, tmp);
  b.value[4] = std::sqrt(2.0) * mul0((pow_or_zero(sigma_l, p - 1.0) + pow_or_zero(f, p - 1.0)) * sigma_s, t1p) +
               2.0 * mul0((slp + pow_or_zero(f, p)) * f, tmp);
  b.value[5] = mul0(sigma_s * pow_or_zero(sigma_l, p - 1.0), t1p) + a1p * mul0(slp * f, tmp);
  return b;
}

double ClipErrorReport::measured_for(int k) const { return slot(measured, kMeasuredSlot[static_cast<std::size_t>(k)]); }

double ClipErrorReport::stderr_for(int k) const {
  return slot(stderr_margin, kMeasuredSlot[static_cast<std::size_t>(k)]);
}

bool ClipErrorReport::all_pass() const {
  return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
}

double operator_norm(const Matrix& sym) {
  require(sym.rows() == sym.cols(), "operator_norm needs a square matrix");
  const Index d = sym.rows();
  if (d == 0) return 0.0;
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  require((sym - sym.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, "operator_norm needs a symmetric matrix");

  if (d <= 64) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  // Power iteration on sym^2 so that +-lambda pairs do not stall it.
  Vector x(d);
  for (Index i = 0; i < d; ++i) x[i] = 1.0 + 1e-3 * static_cast<double>(i % 7);
  x.normalize();
  double est = 0.0;
  for (int it = 0; it < 100000; ++it) {
    const Vector ax = sym * x;
    const double next = ax.norm();
    if (next == 0.0) return 0.0;
    Vector y = sym * ax;
    const double yn = y.norm();
    if (yn == 0.0) return next;
    x = y / yn;
    if (std::abs(next - est) <= 1e-10 * next) return next;
    est = next;
  }
  return est;
}

double directional_moment_sup(const std::vector<double>& weights, const Matrix& devs, double p) {
  const Index d = devs.rows();
  require(static_cast<Index>(weights.size()) == devs.cols(), "one weight per deviation");
  if (d == 0 || devs.cols() == 0) return 0.0;
  Matrix second = Matrix::Zero(d, d);
  for (Index j = 0; j < devs.cols(); ++j) second += weights[static_cast<std::size_t>(j)] * devs.col(j) * devs.col(j).transpose();
  if (p == 2.0) return operator_norm(second);

  const Eigen::Map<const Vector> w(weights.data(), static_cast<Index>(weights.size()));
  auto value = [&](const Vector& e) { return w.dot((devs.transpose() * e).cwiseAbs().array().pow(p).matrix()); };

  std::vector<Vector> starts;
  for (Index i = 0; i < d; ++i) starts.push_back(Vector::Unit(d, i));
  starts.push_back(Vector::Ones(d).normalized());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(second);
  starts.push_back(solver.eigenvectors().col(d - 1));
  Rng rng(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < 16; ++k) {
    Vector e(d);
    for (Index i = 0; i < d; ++i) e[i] = normal(rng);
    if (e.norm() > 0.0) starts.push_back(e.normalized());
  }

  // e <- grad / ||grad|| never decreases a convex p-homogeneous function on the sphere.
  double best = 0.0;
  for (Vector e : starts) {
    double cur = value(e);
    for (int it = 0; it < 500; ++it) {
      const Vector s = devs.transpose() * e;
      Vector coef(s.size());
      for (Index j = 0; j < s.size(); ++j) coef[j] = w[j] * std::pow(std::abs(s[j]), p - 1.0) * sgn(s[j]);
      const Vector grad = devs * coef;
      const double gn = grad.norm();
      if (gn == 0.0) break;
      const Vector next = grad / gn;
      const double nv = value(next);
      if (nv <= cur * (1.0 + 1e-15)) {
        cur = std::max(cur, nv);
        break;
      }
      e = next;
      cur = nv;
    }
    best = std::max(best, cur);
  }
  return best;
}

ClipErrorReport clip_error_exact(const GradOracle& oracle, const Vector& x, const Vector& grad_true, double tau,
                                 double alpha) {
  require(grad_true.size() == oracle.dim(), "grad_true has the wrong dimension");
  const auto outcomes = oracle.support(x);
  const Index d = oracle.dim();
  const auto n = static_cast<Index>(outcomes.size());

  ClipErrorReport rep;
  rep.method = ClipMethod::exact_enumeration;
  rep.tau = tau;
  rep.alpha = alpha;
  rep.f_norm = grad_true.norm();
  rep.p = oracle.noise().p;
  rep.samples = outcomes.size();

  std::vector<double> w(static_cast<std::size_t>(n));
  Matrix clipped(d, n);
  Matrix devs(d, n);
  Vector mean = Vector::Zero(d);
  double sigma_l_p = 0.0;
  for (Index j = 0; j < n; ++j) {
    const auto& [prob, g] = outcomes[static_cast<std::size_t>(j)];
    w[static_cast<std::size_t>(j)] = prob;
    clipped.col(j) = clip(g, tau);
    devs.col(j) = g - grad_true;
    mean += prob * clipped.col(j);
    sigma_l_p += prob * std::pow(devs.col(j).norm(), rep.p);
  }

  Matrix cov = Matrix::Zero(d, d);
  for (Index j = 0; j < n; ++j) {
    const double prob = w[static_cast<std::size_t>(j)];
    const Vector du = clipped.col(j) - mean;
    if (prob > 0.0) rep.measured.du_max_norm = std::max(rep.measured.du_max_norm, du.norm());
    rep.measured.du_sq_mean += prob * du.squaredNorm();
    cov += prob * du * du.transpose();
  }
  rep.measured.du_cov_opnorm = operator_norm(0.5 * (cov + cov.transpose()));
  rep.measured.db_norm = (mean - grad_true).norm();

  rep.sigma_l = std::pow(sigma_l_p, 1.0 / rep.p);
  rep.sigma_s = std::pow(directional_moment_sup(w, devs, rep.p), 1.0 / rep.p);
  finish(rep);
  return rep;
}

ClipErrorReport clip_error_mc(const GradOracle& oracle, const Vector& x, const Vector& grad_true, double tau,
                              double alpha, std::size_t N, Rng& rng) {
  require(N >= 10'000, "Monte Carlo clipping check needs N >= 1e4");
  require(grad_true.size() == oracle.dim(), "grad_true has the wrong dimension");
  const Index d = oracle.dim();
  const double Nd = static_cast<double>(N);

  ClipErrorReport rep;
  rep.method = ClipMethod::monte_carlo;
  rep.tau = tau;
  rep.alpha = alpha;
  rep.f_norm = grad_true.norm();
  rep.p = oracle.noise().p;
  rep.sigma_s = oracle.noise().sigma_s;
  rep.sigma_l = oracle.noise().sigma_l;
  rep.samples = N;
  rep.margin_k = 3.0;

  // Pass 1: the mean of the clipped gradient.
  Vector sum = Vector::Zero(d);
  Vector sum_sq = Vector::Zero(d);
  for (std::size_t n = 0; n < N; ++n) {
    const Vector gc = clip(oracle.sample(x, rng), tau);
    sum += gc;
    sum_sq += gc.cwiseAbs2();
  }
  const Vector mean = sum / Nd;
  const Vector var = (sum_sq / Nd - mean.cwiseAbs2()).cwiseMax(0.0) * (Nd / (Nd - 1.0));
  rep.measured.db_norm = (mean - grad_true).norm();
  rep.stderr_margin.db_norm = std::sqrt(var.sum() / Nd);

  // Pass 2: centered moments on fresh draws.
  Matrix cov = Matrix::Zero(d, d);
  double s2 = 0.0;
  double s4 = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const Vector du = clip(oracle.sample(x, rng), tau) - mean;
    const double sq = du.squaredNorm();
    rep.measured.du_max_norm = std::max(rep.measured.du_max_norm, std::sqrt(sq));
    s2 += sq;
    s4 += sq * sq;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(du);
  }
  const Matrix full = Matrix(cov.selfadjointView<Eigen::Lower>()) / Nd;
  rep.measured.du_sq_mean = s2 / Nd;
  rep.measured.du_cov_opnorm = operator_norm(full);
  const double m4 = s4 / Nd;
  rep.stderr_margin.du_sq_mean = std::sqrt(std::max(0.0, m4 - rep.measured.du_sq_mean * rep.measured.du_sq_mean) / Nd);
  // Var((e.du)^2) <= E||du||^4 for every unit e.
  rep.stderr_margin.du_cov_opnorm = std::sqrt(m4 / Nd);
  rep.stderr_margin.du_max_norm = rep.stderr_margin.db_norm;
  finish(rep);
  return rep;
}

}  // namespace htclip
