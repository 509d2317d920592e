#include "htclip/harness.hpp"

#include "htclip/json_io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#ifndef HTCLIP_GIT_DESCRIBE
#define HTCLIP_GIT_DESCRIBE "unknown"
#endif

namespace htclip {

using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index, std::uint64_t stream_tag) {
  std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * ((trial_index << 32) + stream_tag);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Summary summarize(std::vector<double> values, const std::vector<double>& levels) {
  require(!values.empty(), "summarize needs at least one value");
  Summary s;
  s.n = values.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  std::sort(values.begin(), values.end());
  s.levels = levels;
  for (double level : levels) {
    require(level > 0.0 && level < 1.0, "quantile levels must lie in (0, 1)");
    auto r = static_cast<std::size_t>(std::ceil(level * n - 1e-9));
    r = std::clamp<std::size_t>(r, 1, s.n);
    s.quantiles.push_back(values[r - 1]);
  }
  return s;
}

RateFit fit_rate(const std::vector<double>& T_values, const std::vector<double>& errors) {
  require(T_values.size() == errors.size(), "one error per T");
  require(T_values.size() >= 3, "fit_rate needs at least 3 points");
  const std::size_t n = T_values.size();
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(T_values[i] > 0.0 && errors[i] > 0.0, "fit_rate needs positive T and errors");
    x[i] = std::log(T_values[i]);
    y[i] = std::log(errors[i]);
  }
  const double nd = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "fit_rate needs at least two distinct T");
  RateFit f;
  f.n_points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ssr += r * r;
  }
  f.slope_stderr = std::sqrt(ssr / (nd - 2.0) / sxx);
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

std::string short_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Domain make_domain(const ExperimentConfig& c) {
  if (c.problem.ball_radius) return Ball{Vector::Zero(c.problem.d), *c.problem.ball_radius};
  return AllSpace{c.problem.d};
}

Vector start_point(const ExperimentConfig& c) {
  if (c.problem.x1_offset) return Eigen::Map<const Vector>(c.problem.x1_offset->data(), c.problem.d);
  return Vector::Zero(c.problem.d);
}

std::optional<NoiseSpec> declared_noise(const ExperimentConfig& c) {
  if (!c.noise.sigma_s && !c.noise.sigma_l) return std::nullopt;
  if (!c.noise.sigma_s || !c.noise.sigma_l) throw ConfigError("noise: declare both sigma_s and sigma_l or neither");
  return NoiseSpec{c.noise.p, *c.noise.sigma_s, *c.noise.sigma_l};
}

}  // namespace

std::optional<Codebook> build_codebook(const ExperimentConfig& config) {
  if (!config.hardness) return std::nullopt;
  const HardnessConfig& h = *config.hardness;
  if (h.codebook == CodebookKind::twopoint) return twopoint_codebook(h.d_star, config.problem.d);
  Rng rng(derive_seed(config.run.master_seed, 0, kCodebookTag));
  return gv_codebook(h.d_star, config.problem.d, rng);
}

ProblemSetup build_problem(const ExperimentConfig& c, std::int64_t T, const Vector* codeword) {
  const Index d = c.problem.d;
  ProblemSetup s;
  s.x1 = start_point(c);

  if (c.problem.kind == ProblemKind::hard) {
    const HardnessConfig& h = *c.hardness;
    const HardKind kind = kind_of(h.regime);
    const bool twopoint = h.regime == HardRegime::cvx_twopoint || h.regime == HardRegime::str_twopoint;
    const HardParams params = hard_params(h.regime, c.problem.G, c.problem.D, c.problem.mu, *c.noise.sigma_l,
                                          c.noise.p, T, h.d_star,
                                          twopoint ? std::optional<double>(c.schedule.delta) : std::nullopt);
    const Vector v = codeword ? *codeword : Vector::Ones(d);
    HardProblem hp = make_hard_instance(kind, d, h.d_star, params, v, c.noise.p, declared_noise(c));
    s.instance = hp.instance;
    s.objective = hp.objective;
    s.oracle = std::make_shared<const GradOracle>(std::move(hp.oracle));
  } else {
    const double sd = std::sqrt(static_cast<double>(d));
    const Vector y = Vector::Constant(d, c.problem.D / sd);
    FKind f;
    if (c.problem.kind == ProblemKind::abs_sum) {
      f = AbsSum{Vector::Constant(d, c.problem.G / sd), y};
    } else {
      f = EuclidNorm{c.problem.G, y};
    }
    RKind r = ZeroReg{};
    if (c.problem.mu > 0.0) r = QuadReg{c.problem.mu, y};
    s.objective = std::make_shared<const CompositeObjective>(make_objective(std::move(f), std::move(r), make_domain(c)));

    OracleKind kind = Deterministic{};
    if (c.noise.kind == NoiseKind::gaussian) {
      kind = AdditiveGaussian{Eigen::Map<const Vector>(c.noise.scales.data(), d)};
    } else if (c.noise.kind == NoiseKind::stable) {
      kind = AdditiveStable{std::vector<StableParams>(static_cast<std::size_t>(d), c.noise.stable)};
    }
    s.oracle = std::make_shared<const GradOracle>(make_oracle(s.objective, std::move(kind), c.noise.p, declared_noise(c)));
  }

  if (!s.objective->optimum) throw ConfigError("problem: the optimum has no closed form (is the center inside the domain?)");
  if (!in_domain(s.objective->domain, s.x1)) throw ConfigError("problem.x1_mode: x_1 must lie in the domain");
  s.D = (s.objective->optimum->x_star - s.x1).norm();
  if (!is_strongly_convex(c.schedule.regime) && !(s.D > 0.0)) {
    throw ConfigError("problem.x1_mode: x_1 coincides with the optimum, so D = 0");
  }

  const NoiseSpec& noise = s.oracle->noise();
  ScheduleParams sp;
  sp.p = noise.p;
  sp.sigma_s = noise.sigma_s;
  sp.sigma_l = noise.sigma_l;
  sp.G = c.problem.G;
  sp.D = s.D;
  sp.mu = c.problem.mu;
  sp.delta = c.schedule.delta;
  sp.alpha_clip = c.schedule.alpha_clip;
  if (is_known_T(c.schedule.regime)) sp.T_known = T;
  s.schedule = make_schedule(c.schedule.regime, sp);
  return s;
}

namespace {

struct TrialOutcome {
  std::vector<double> subopt;  // per averaging mode, clamped at 0
  double mu_dist2 = 0.0;
  std::int64_t clip_events = 0;
};

TrialOutcome run_trial(const ExperimentConfig& c, const ProblemSetup& s, std::int64_t T, std::uint64_t seed) {
  Rng rng(seed);
  const CompositeObjective& obj = *s.objective;
  Trajectory traj = c.schedule.algorithm == Algorithm::stabilized
                        ? run_stabilized_clipped_sgd(obj, *s.oracle, s.schedule, T, s.x1, rng, c.run.record_stride)
                        : run_clipped_sgd(obj, *s.oracle, s.schedule, T, s.x1, rng, c.run.record_stride);
  TrialOutcome out;
  const Optimum& opt = *obj.optimum;
  for (Averaging mode : c.eval.averaging) {
    const double raw = eval_F(obj, average(traj, mode)) - opt.F_star;
    if (raw < -1e-9) throw NumericalFailure("suboptimality below -1e-9", T);
    out.subopt.push_back(std::max(raw, 0.0));
  }
  out.mu_dist2 = c.problem.mu * (traj.x_last - opt.x_star).squaredNorm();
  out.clip_events = traj.clip_events;
  return out;
}

std::optional<RateFit> fit_series(const std::vector<double>& Ts, const std::vector<double>& ys, int drop,
                                  std::vector<std::string>& warnings, const std::string& label) {
  std::size_t start = 0;
  while (start < static_cast<std::size_t>(drop) && Ts.size() - start > 3) ++start;
  if (Ts.size() - start < 3) {
    warnings.push_back("fit for " + label + " skipped: fewer than 3 grid points");
    return std::nullopt;
  }
  std::vector<double> x(Ts.begin() + static_cast<std::ptrdiff_t>(start), Ts.end());
  std::vector<double> y(ys.begin() + static_cast<std::ptrdiff_t>(start), ys.end());
  if (std::any_of(y.begin(), y.end(), [](double v) { return !(v > 0.0); })) {
    warnings.push_back("fit for " + label + " skipped: nonpositive mean error");
    return std::nullopt;
  }
  return fit_rate(x, y);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, unsigned threads) {
  const std::vector<std::int64_t> Ts = t_grid(config.run.T_grid);
  const auto trials = static_cast<std::size_t>(config.run.trials);
  ExperimentResult result;
  result.config = config;
  result.config_digest = config_digest(config);

  const std::optional<Codebook> codebook = build_codebook(config);
  const std::size_t n_words = codebook ? std::min(codebook->words.size(), trials) : 1;

  // setups[k][w]: grid point k, codeword w.
  std::vector<std::vector<ProblemSetup>> setups(Ts.size());
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    for (std::size_t w = 0; w < n_words; ++w) {
      setups[k].push_back(build_problem(config, Ts[k], codebook ? &codebook->words[w] : nullptr));
    }
  }

  if (static_cast<double>(trials) < 10.0 / config.schedule.delta) {
    result.warnings.push_back("run.trials = " + std::to_string(trials) + " is below 10/delta = " +
                              short_double(10.0 / config.schedule.delta) +
                              "; the (1 - delta)-quantile is poorly resolved");
  }
  if (codebook && codebook->shortfall) {
    result.warnings.push_back("codebook reached " + std::to_string(codebook->achieved_size) + " of " +
                              std::to_string(codebook->target_size) + " words");
  }

  const std::size_t n_jobs = Ts.size() * trials;
  std::vector<TrialOutcome> outcomes(n_jobs);
  std::vector<std::exception_ptr> errors(n_jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < n_jobs; j = next.fetch_add(1)) {
      const std::size_t k = j / trials;
      const std::size_t i = j % trials;
      const std::uint64_t seed = derive_seed(config.run.master_seed, i, k);
      try {
        outcomes[j] = run_trial(config, setups[k][i % n_words], Ts[k], seed);
      } catch (const NumericalFailure& e) {
        errors[j] = std::make_exception_ptr(NumericalFailure(
            std::string(e.what()) + " (T = " + std::to_string(Ts[k]) + ", trial " + std::to_string(i) +
                ", seed " + std::to_string(seed) + ")",
            e.iteration()));
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_jobs)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t n_modes = config.eval.averaging.size();
  std::vector<std::vector<double>> means(n_modes);
  std::vector<double> mu_means;
  std::vector<double> Td;
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    PerT row;
    row.T = Ts[k];
    double mu_sum = 0.0;
    double clip_sum = 0.0;
    std::vector<double> word_sum(n_words, 0.0);
    std::vector<std::size_t> word_n(n_words, 0);
    for (std::size_t m = 0; m < n_modes; ++m) {
      std::vector<double> vals(trials);
      for (std::size_t i = 0; i < trials; ++i) vals[i] = outcomes[k * trials + i].subopt[m];
      row.subopt.push_back(summarize(vals, config.eval.quantile_levels));
      means[m].push_back(row.subopt.back().mean);
    }
    for (std::size_t i = 0; i < trials; ++i) {
      const TrialOutcome& o = outcomes[k * trials + i];
      mu_sum += o.mu_dist2;
      clip_sum += static_cast<double>(o.clip_events);
      word_sum[i % n_words] += o.subopt.front();
      ++word_n[i % n_words];
    }
    row.mu_dist2_mean = mu_sum / static_cast<double>(trials);
    row.clip_rate = clip_sum / (static_cast<double>(trials) * static_cast<double>(Ts[k]));
    if (codebook) {
      for (std::size_t w = 0; w < n_words; ++w) row.codeword_means.push_back(word_sum[w] / static_cast<double>(word_n[w]));
    }
    mu_means.push_back(row.mu_dist2_mean);
    Td.push_back(static_cast<double>(Ts[k]));
    result.per_T.push_back(std::move(row));
  }

  for (std::size_t m = 0; m < n_modes; ++m) {
    result.fits.push_back(fit_series(Td, means[m], config.eval.fit_drop_smallest, result.warnings,
                                     std::string(to_string(config.eval.averaging[m]))));
  }
  if (is_strongly_convex(config.schedule.regime)) {
    result.fit_mu_dist2 = fit_series(Td, mu_means, config.eval.fit_drop_smallest, result.warnings, "mu_dist2");
  }
  if (config.eval.expect_slope) {
    const auto& f = result.fits.front();
    result.assertions_pass =
        f && f->slope >= config.eval.expect_slope->first && f->slope <= config.eval.expect_slope->second;
  }

  // Manifest: everything that determines the numbers, nothing about how they were scheduled on threads.
  json m;
  m["config"] = to_json(config);
  m["config_digest"] = result.config_digest;
  m["git_describe"] = HTCLIP_GIT_DESCRIBE;
  m["master_seed"] = config.run.master_seed;
  const ProblemSetup& first = setups.front().front();
  m["noise"] = to_json(first.oracle->noise());
  m["D"] = first.D;
  json sched = json::array();
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    const ProblemSetup& s = setups[k].front();
    sched.push_back({{"T", Ts[k]}, {"tau_T", json_number(s.schedule.tau(Ts[k]))},
                     {"eta_T", json_number(s.schedule.eta(Ts[k]))}, {"constants", to_json(s.schedule.constants())}});
  }
  m["schedule"] = sched;

  {
    Rng rng(derive_seed(config.run.master_seed, 0, kMomentTag));
    const Vector g = subgrad_f(*first.objective, first.x1);
    const auto N = static_cast<std::size_t>(config.eval.moment_samples);
    MomentEstimate est;
    std::string mode = "exact";
    try {
      if (!first.oracle->is_discrete()) throw CapacityError("continuous noise");
      est = estimate_moments(*first.oracle, first.x1, g, config.noise.p, N, 8, rng, MomentMode::exact);
    } catch (const CapacityError&) {
      mode = "monte-carlo";
      est = estimate_moments(*first.oracle, first.x1, g, config.noise.p, N, 8, rng, MomentMode::monte_carlo);
    }
    json mj = to_json(est);
    mj["mode"] = mode;
    mj["samples"] = mode == "exact" ? json(nullptr) : json(N);
    mj["at"] = "x1";
    m["moments"] = mj;
  }
  if (codebook) m["codebook"] = to_json(*codebook);
  m["warnings"] = result.warnings;
  result.manifest = std::move(m);
  return result;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string series_csv(const ExperimentResult& r, std::size_t mode) {
  std::ostringstream os;
  os << "T,n,mean,std";
  for (double level : r.config.eval.quantile_levels) os << ",q_" << short_double(level);
  os << ",mu_dist2_mean,clip_rate\n";
  for (const PerT& row : r.per_T) {
    const Summary& s = row.subopt[mode];
    os << row.T << ',' << s.n << ',' << format_double(s.mean) << ',' << format_double(s.std);
    for (double q : s.quantiles) os << ',' << format_double(q);
    os << ',' << format_double(row.mu_dist2_mean) << ',' << format_double(row.clip_rate) << '\n';
  }
  return os.str();
}

std::string fit_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "series,slope,intercept,slope_stderr,r2,n_points\n";
  auto line = [&](const std::string& name, const std::optional<RateFit>& f) {
    os << name;
    if (f) {
      os << ',' << format_double(f->slope) << ',' << format_double(f->intercept) << ','
         << format_double(f->slope_stderr) << ',' << format_double(f->r2) << ',' << f->n_points;
    } else {
      os << ",nan,nan,nan,nan,0";
    }
    os << '\n';
  };
  for (std::size_t m = 0; m < r.fits.size(); ++m) line(std::string(to_string(r.config.eval.averaging[m])), r.fits[m]);
  if (is_strongly_convex(r.config.schedule.regime)) line("mu_dist2", r.fit_mu_dist2);
  return os.str();
}

std::string codewords_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "T,codeword,mean\n";
  for (const PerT& row : r.per_T) {
    for (std::size_t w = 0; w < row.codeword_means.size(); ++w) {
      os << row.T << ',' << w << ',' << format_double(row.codeword_means[w]) << '\n';
    }
  }
  return os.str();
}

}  // namespace

void persist(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  if (result.per_T.empty()) throw ConfigError("run.T_grid: empty grid, nothing to write");
  std::vector<std::pair<std::string, std::string>> files;
  const auto& modes = result.config.eval.averaging;
  files.emplace_back("series.csv", series_csv(result, 0));
  for (std::size_t m = 1; m < modes.size(); ++m) {
    files.emplace_back("series_" + std::string(to_string(modes[m])) + ".csv", series_csv(result, m));
  }
  files.emplace_back("fit.csv", fit_csv(result));
  if (result.config.hardness) files.emplace_back("codewords.csv", codewords_csv(result));
  files.emplace_back("manifest.json", result.manifest.dump(2) + "\n");

  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> staged;
  try {
    for (const auto& [name, content] : files) {
      const auto tmp = out_dir / ("." + name + ".tmp");
      write_file(tmp, content);
      staged.push_back(tmp);
    }
  } catch (...) {
    for (const auto& p : staged) std::filesystem::remove(p);
    throw;
  }
  for (std::size_t i = 0; i < files.size(); ++i) std::filesystem::rename(staged[i], out_dir / files[i].first);
}

}  // namespace htclip
