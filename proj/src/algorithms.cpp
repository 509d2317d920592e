#include "htclip/algorithms.hpp"

#include "htclip/clipping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace htclip {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_inputs(const CompositeObjective& obj, const GradOracle& oracle, const Schedule& schedule, std::int64_t T,
                  const Vector& x1) {
  require(T >= 1, "T must be >= 1");
  require(x1.size() == obj.dim() && oracle.dim() == obj.dim(), "dimension mismatch");
  require(in_domain(obj.domain, x1), "x_1 must lie in the domain");
  if (const auto regime = schedule.regime()) {
    require(is_strongly_convex(*regime) == (obj.mu > 0.0), "regime/mu mismatch between schedule and objective");
  }
}

void fill_subopt(Checkpoint& cp, const CompositeObjective& obj) {
  if (!obj.optimum) {
    cp.subopt_plain = cp.subopt_weighted = cp.subopt_last = cp.dist_sq_to_opt = kNaN;
    return;
  }
  const Optimum& opt = *obj.optimum;
  cp.subopt_plain = eval_F(obj, cp.x_plain) - opt.F_star;
  cp.subopt_weighted = eval_F(obj, cp.x_weighted) - opt.F_star;
  cp.subopt_last = eval_F(obj, cp.x_last) - opt.F_star;
  cp.dist_sq_to_opt = (cp.x_last - opt.x_star).squaredNorm();
}

Trajectory run(const CompositeObjective& obj, const GradOracle& oracle, const Schedule& schedule, std::int64_t T,
               const Vector& x1, Rng& rng, RecordStride stride, bool stabilized) {
  check_inputs(obj, oracle, schedule, T, x1);
  if (stabilized) require(obj.mu == 0.0, "the stabilized method is only defined for mu = 0");

  const auto times = checkpoint_times(T, stride);
  auto next_cp = times.begin();

  Trajectory traj;
  traj.T = T;
  traj.stride = stride;
  Vector x = x1;
  Vector avg_plain = Vector::Zero(x1.size());
  Vector avg_weighted = Vector::Zero(x1.size());
  double weight_sum = 0.0;

  for (std::int64_t t = 1; t <= T; ++t) {
    const Vector g = oracle.sample(x, rng);
    const double tau = schedule.tau(t);
    const double eta = schedule.eta(t);
    if (g.norm() > tau) ++traj.clip_events;
    const Vector gc = clip(g, tau);
    if (stabilized) {
      const double eta_next = schedule.eta(t + 1);
      require(eta_next <= eta, "the stabilized method needs a nonincreasing stepsize");
      x = stabilized_prox_step(obj.r, obj.domain, x, x1, gc, eta, eta_next);
    } else {
      x = prox_step(obj.r, obj.domain, x, gc, eta);
    }
    if (!x.allFinite()) throw NumericalFailure("non-finite iterate at iteration " + std::to_string(t), t);

    const double td = static_cast<double>(t);
    avg_plain += (x - avg_plain) / td;
    const double w = (td + 4.0) * (td + 5.0);
    weight_sum += w;
    avg_weighted += (w / weight_sum) * (x - avg_weighted);

    if (next_cp != times.end() && *next_cp == t) {
      Checkpoint cp;
      cp.t = t;
      cp.x_plain = avg_plain;
      cp.x_weighted = avg_weighted;
      cp.x_last = x;
      fill_subopt(cp, obj);
      traj.checkpoints.push_back(std::move(cp));
      ++next_cp;
    }
  }
  traj.x_last = std::move(x);
  traj.avg_plain = std::move(avg_plain);
  traj.avg_weighted = std::move(avg_weighted);
  return traj;
}

}  // namespace

std::vector<std::int64_t> checkpoint_times(std::int64_t T, const RecordStride& stride) {
  require(T >= 1, "T must be >= 1");
  std::vector<std::int64_t> out;
  if (stride.kind == RecordStride::Kind::linear) {
    require(stride.value >= 1.0, "linear stride must be >= 1");
    const auto step = static_cast<std::int64_t>(stride.value);
    for (std::int64_t t = step; t < T; t += step) out.push_back(t);
  } else {
    require(stride.value > 1.0, "geometric ratio must be > 1");
    double t = 1.0;
    while (t < static_cast<double>(T)) {
      const auto ti = static_cast<std::int64_t>(std::ceil(t - 1e-9));
      if (out.empty() || ti > out.back()) out.push_back(ti);
      t *= stride.value;
    }
  }
  if (out.empty() || out.back() != T) out.push_back(T);
  return out;
}

Trajectory run_clipped_sgd(const CompositeObjective& obj, const GradOracle& oracle, const Schedule& schedule,
                           std::int64_t T, const Vector& x1, Rng& rng, RecordStride stride) {
  return run(obj, oracle, schedule, T, x1, rng, stride, false);
}

Trajectory run_stabilized_clipped_sgd(const CompositeObjective& obj, const GradOracle& oracle,
                                      const Schedule& schedule, std::int64_t T, const Vector& x1, Rng& rng,
                                      RecordStride stride) {
  return run(obj, oracle, schedule, T, x1, rng, stride, true);
}

Vector average(const Trajectory& traj, Averaging mode) {
  require(traj.T >= 1, "empty trajectory");
  switch (mode) {
    case Averaging::plain: return traj.avg_plain;
    case Averaging::weighted: return traj.avg_weighted;
    case Averaging::last: return traj.x_last;
  }
  return traj.x_last;
}

std::vector<SuboptRow> suboptimality_series(const Trajectory& traj, const CompositeObjective& obj) {
  require(obj.optimum.has_value(), "suboptimality needs a known optimum");
  std::vector<SuboptRow> rows;
  rows.reserve(traj.checkpoints.size());
  for (const Checkpoint& cp : traj.checkpoints) {
    SuboptRow row;
    row.t = cp.t;
    row.raw = {cp.subopt_plain, cp.subopt_weighted, cp.subopt_last};
    for (std::size_t k = 0; k < 3; ++k) {
      if (row.raw[k] < -1e-9) throw NumericalFailure("suboptimality below -1e-9", cp.t);
      row.clamped[k] = std::max(row.raw[k], 0.0);
    }
    row.mu_dist_sq = obj.mu * cp.dist_sq_to_opt;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace htclip
