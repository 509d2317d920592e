#pragma once

#include "htclip/noise.hpp"
#include "htclip/problems.hpp"
#include "htclip/schedules.hpp"
#include "htclip/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace htclip {

struct RecordStride {
  enum class Kind { linear, geometric };
  Kind kind = Kind::geometric;
  double value = 2.0;  // step for linear, ratio for geometric
};

/// Iterations 1..T at which a checkpoint is recorded; always ends with T.
std::vector<std::int64_t> checkpoint_times(std::int64_t T, const RecordStride& stride);

/// Aggregates after t steps. Suboptimality fields are raw F - F_star (NaN without a known optimum).
struct Checkpoint {
  std::int64_t t = 0;
  Vector x_plain;
  Vector x_weighted;
  Vector x_last;
  double subopt_plain = 0.0;
  double subopt_weighted = 0.0;
  double subopt_last = 0.0;
  double dist_sq_to_opt = 0.0;  // ||x_{t+1} - x_star||^2
};

struct Trajectory {
  std::int64_t T = 0;
  RecordStride stride;
  Vector x_last;
  Vector avg_plain;     // (1/T) sum x_{t+1}
  Vector avg_weighted;  // weights (t+4)(t+5)
  std::vector<Checkpoint> checkpoints;
  std::int64_t clip_events = 0;
};

Trajectory run_clipped_sgd(const CompositeObjective& obj, const GradOracle& oracle, const Schedule& schedule,
                           std::int64_t T, const Vector& x1, Rng& rng, RecordStride stride = {});

Trajectory run_stabilized_clipped_sgd(const CompositeObjective& obj, const GradOracle& oracle,
                                      const Schedule& schedule, std::int64_t T, const Vector& x1, Rng& rng,
                                      RecordStride stride = {});

Vector average(const Trajectory& traj, Averaging mode);

struct SuboptRow {
  std::int64_t t = 0;
  std::array<double, 3> raw{};      // plain, weighted, last
  std::array<double, 3> clamped{};  // max(raw, 0); raw below -1e-9 throws
  double mu_dist_sq = 0.0;
};

std::vector<SuboptRow> suboptimality_series(const Trajectory& traj, const CompositeObjective& obj);

}  // namespace htclip
