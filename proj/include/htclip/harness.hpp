#pragma once

#include "htclip/algorithms.hpp"
#include "htclip/config.hpp"
#include "htclip/hardness.hpp"
#include "htclip/noise.hpp"
#include "htclip/schedules.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace htclip {

/// SplitMix64 finalizer applied to master + golden * (trial * 2^32 + tag); injective in (trial, tag) below 2^32.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index, std::uint64_t stream_tag);

/// Stream tags. Trials of the k-th grid point use tag k.
inline constexpr std::uint64_t kMomentTag = 1ULL << 20;
inline constexpr std::uint64_t kCodebookTag = 1ULL << 21;

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // unbiased; 0 for n = 1
  std::vector<double> levels;
  std::vector<double> quantiles;  // nearest rank, r = ceil(level n)
};

Summary summarize(std::vector<double> values, const std::vector<double>& levels);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

/// OLS of ln(error) on ln(T).
RateFit fit_rate(const std::vector<double>& T_values, const std::vector<double>& errors);

/// One concrete problem for a grid point: objective, oracle, start point and schedule.
struct ProblemSetup {
  std::shared_ptr<const CompositeObjective> objective;
  std::shared_ptr<const GradOracle> oracle;
  std::shared_ptr<const HardInstance> instance;  // hard problems only
  Vector x1;
  double D = 0.0;  // ||x_star - x_1||
  Schedule schedule;
};

/// Codebook for a hard configuration (empty for other kinds).
std::optional<Codebook> build_codebook(const ExperimentConfig& config);

ProblemSetup build_problem(const ExperimentConfig& config, std::int64_t T, const Vector* codeword = nullptr);

struct PerT {
  std::int64_t T = 0;
  std::vector<Summary> subopt;  // one per eval.averaging entry
  double mu_dist2_mean = 0.0;
  double clip_rate = 0.0;  // clip events per iteration
  std::vector<double> codeword_means;  // hard problems: mean of the first averaging mode per codeword
};

struct ExperimentResult {
  ExperimentConfig config;
  std::string config_digest;
  std::vector<PerT> per_T;
  std::vector<std::optional<RateFit>> fits;  // one per averaging mode
  std::optional<RateFit> fit_mu_dist2;       // strongly convex regimes
  nlohmann::json manifest;
  std::vector<std::string> warnings;
  bool assertions_pass = true;
};

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads = 1);

/// Writes series.csv (plus series_<mode>.csv for extra modes), fit.csv, codewords.csv for hard
/// problems, and manifest.json. Files are staged and renamed only after all of them are written.
void persist(const ExperimentResult& result, const std::filesystem::path& out_dir);

std::string format_double(double v);

}  // namespace htclip
