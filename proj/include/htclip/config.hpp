#pragma once

#include "htclip/algorithms.hpp"
#include "htclip/hardness.hpp"
#include "htclip/schedules.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace htclip {

enum class ProblemKind { abs_sum, euclid_norm, hard };
enum class NoiseKind { deterministic, gaussian, stable, hard };
enum class Algorithm { clipped, stabilized };
enum class CodebookKind { gv, twopoint };

struct ProblemConfig {
  ProblemKind kind = ProblemKind::euclid_norm;
  Index d = 1;
  double G = 1.0;
  double mu = 0.0;
  double D = 1.0;
  std::optional<double> ball_radius;  // centered at the origin; empty means all-space
  std::optional<std::vector<double>> x1_offset;  // empty means x_1 = 0
};

struct NoiseConfig {
  NoiseKind kind = NoiseKind::deterministic;
  double p = 2.0;
  std::optional<double> sigma_s;
  std::optional<double> sigma_l;
  StableParams stable;
  std::vector<double> scales;  // gaussian, one per coordinate after resolution
};

struct ScheduleConfig {
  Regime regime = Regime::cvx_hp_T;
  double delta = 0.1;
  double alpha_clip = 0.5;
  Algorithm algorithm = Algorithm::clipped;
};

struct HardnessConfig {
  HardRegime regime = HardRegime::cvx_fano;
  Index d_star = 1;
  CodebookKind codebook = CodebookKind::gv;
};

struct TGrid {
  std::int64_t min = 1;
  std::int64_t max = 1;
  double ratio = 2.0;
};

struct RunConfig {
  TGrid T_grid;
  std::int64_t trials = 1;
  std::uint64_t master_seed = 0;
  RecordStride record_stride;
};

struct EvalConfig {
  std::vector<double> quantile_levels;  // default {1 - delta}
  std::vector<Averaging> averaging;     // default: the regime's designated mode
  std::int64_t moment_samples = 10'000;
  int fit_drop_smallest = 1;
  std::optional<std::pair<double, double>> expect_slope;  // [lo, hi] on the first averaging mode
};

struct ExperimentConfig {
  ProblemConfig problem;
  NoiseConfig noise;
  ScheduleConfig schedule;
  std::optional<HardnessConfig> hardness;
  RunConfig run;
  EvalConfig eval;
  std::string output_dir = "out";
};

/// Strict parse: unknown keys and inconsistent settings raise ConfigError naming the key.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_file(const std::string& path);

/// Fully resolved form; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);

/// FNV-1a over the canonical JSON of everything except output.
std::string config_digest(const ExperimentConfig& config);

/// Geometric grid min, min*ratio, ... (rounded, deduplicated) up to max.
std::vector<std::int64_t> t_grid(const TGrid& grid);

std::string_view to_string(ProblemKind kind);
std::string_view to_string(NoiseKind kind);
std::string_view to_string(Algorithm algorithm);
std::string_view to_string(CodebookKind kind);

}  // namespace htclip
