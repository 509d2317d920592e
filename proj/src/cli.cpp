#include "htclip/cli.hpp"

#include "htclip/clipping.hpp"
#include "htclip/config.hpp"
#include "htclip/harness.hpp"
#include "htclip/json_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace htclip {

using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool json = false;
};

unsigned resolve_threads(const Globals& g) {
  if (g.threads) return std::max(1u, *g.threads);
  if (const char* env = std::getenv("HTCLIP_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("HTCLIP_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentConfig load_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required for this subcommand");
  ExperimentConfig c = parse_config_file(g.config);
  if (g.seed) c.run.master_seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

int cmd_run(const Globals& g, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = load_config(g);
  const ExperimentResult r = run_experiment(c, resolve_threads(g));
  persist(r, c.output_dir);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';

  if (g.json) {
    json rows = json::array();
    for (const PerT& row : r.per_T) {
      const Summary& s = row.subopt.front();
      rows.push_back({{"T", row.T},
                      {"n", s.n},
                      {"mean", json_number(s.mean)},
                      {"std", json_number(s.std)},
                      {"quantiles", s.quantiles},
                      {"mu_dist2_mean", json_number(row.mu_dist2_mean)},
                      {"clip_rate", json_number(row.clip_rate)}});
    }
    json fit = nullptr;
    if (const auto& f = r.fits.front()) {
      fit = {{"slope", f->slope}, {"intercept", f->intercept}, {"slope_stderr", f->slope_stderr}, {"r2", f->r2}};
    }
    out << json{{"config_digest", r.config_digest},
                {"out_dir", c.output_dir},
                {"per_T", rows},
                {"fit", fit},
                {"assertions_pass", r.assertions_pass},
                {"warnings", r.warnings}}
               .dump(2)
        << '\n';
  } else {
    out << "config_digest " << r.config_digest << '\n';
    for (const PerT& row : r.per_T) {
      out << "T=" << row.T << " mean=" << num(row.subopt.front().mean) << " clip_rate=" << num(row.clip_rate)
          << '\n';
    }
    if (const auto& f = r.fits.front()) {
      out << "slope " << num(f->slope) << " +- " << num(f->slope_stderr) << " (r2 " << num(f->r2) << ")\n";
    }
    if (c.eval.expect_slope) out << (r.assertions_pass ? "PASS" : "FAIL") << " expect_slope\n";
    out << "wrote " << c.output_dir << '\n';
  }
  return r.assertions_pass ? 0 : 1;
}

int cmd_schedule(const Globals& g, std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  const std::vector<std::int64_t> Ts = t_grid(c.run.T_grid);
  const std::optional<Codebook> codebook = build_codebook(c);
  const Vector* word = codebook ? &codebook->words.front() : nullptr;

  json rows = json::array();
  json top;
  for (std::size_t k = 0; k < Ts.size(); ++k) {
    const ProblemSetup s = build_problem(c, Ts[k], word);
    const Schedule& sch = s.schedule;
    if (k == 0) {
      const ScheduleParams& p = sch.params();
      top = to_json(sch.constants());
      top["regime"] = to_string(c.schedule.regime);
      top["averaging"] = to_string(sch.averaging());
      top["params"] = {{"p", p.p},           {"sigma_s", p.sigma_s}, {"sigma_l", p.sigma_l},
                       {"G", p.G},           {"D", p.D},             {"mu", p.mu},
                       {"delta", p.delta},   {"alpha_clip", p.alpha_clip}};
    }
    rows.push_back({{"T", Ts[k]},
                    {"varphi", json_number(sch.constants().varphi)},
                    {"eta_star", json_number(sch.constants().eta_star)},
                    {"eta_1", json_number(sch.eta(1))},
                    {"eta_T", json_number(sch.eta(Ts[k]))},
                    {"tau_1", json_number(sch.tau(1))},
                    {"tau_T", json_number(sch.tau(Ts[k]))}});
  }
  top["per_T"] = rows;

  if (g.json) {
    out << top.dump(2) << '\n';
  } else {
    for (const auto& [key, value] : top.items()) {
      if (key == "per_T" || key == "params") continue;
      out << key << " = " << (value.is_null() ? "-" : value.dump()) << '\n';
    }
    for (const auto& row : rows) {
      out << "T=" << row["T"].dump() << " eta_T=" << row["eta_T"].dump() << " tau_T=" << row["tau_T"].dump() << '\n';
    }
  }
  return 0;
}

struct ClipArgs {
  std::optional<double> tau;
  double tau_factor = 2.0;
  double alpha = 0.5;
  std::size_t samples = 100'000;
  bool exact = false;
  std::optional<std::int64_t> T;
};

int cmd_clip_verify(const Globals& g, const ClipArgs& a, std::ostream& out) {
  const ExperimentConfig c = load_config(g);
  const std::int64_t T = a.T.value_or(t_grid(c.run.T_grid).front());
  const std::optional<Codebook> codebook = build_codebook(c);
  const ProblemSetup s = build_problem(c, T, codebook ? &codebook->words.front() : nullptr);
  const double tau = a.tau.value_or(a.tau_factor * c.problem.G);
  const Vector grad = subgrad_f(*s.objective, s.x1);

  ClipErrorReport rep;
  bool done = false;
  if (a.exact || s.oracle->is_discrete()) {
    try {
      rep = clip_error_exact(*s.oracle, s.x1, grad, tau, a.alpha);
      done = true;
    } catch (const CapacityError&) {
      if (a.exact) throw;
    }
  }
  if (!done) {
    Rng rng(derive_seed(c.run.master_seed, 0, 1ULL << 22));
    rep = clip_error_mc(*s.oracle, s.x1, grad, tau, a.alpha, a.samples, rng);
  }

  if (g.json) {
    out << to_json(rep).dump(2) << '\n';
  } else {
    for (int k = 0; k < 6; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      out << "bound " << k + 1 << ": measured " << num(rep.measured_for(k)) << " vs " << num(rep.bounds[ku]) << ' '
          << (!rep.applicable[ku] ? "SKIP" : rep.pass[ku] ? "PASS" : "FAIL") << '\n';
    }
  }
  return rep.all_pass() ? 0 : 1;
}

struct DeffArgs {
  std::string variant;
  std::optional<std::int64_t> d;
  double p = 2.0;
  std::vector<double> sigmas;
  std::optional<double> epsilon;
};

int cmd_deff(const Globals& g, const DeffArgs& a, std::ostream& out) {
  json j = {{"variant", a.variant}, {"p", a.p}};
  double value = 0.0;
  if (a.variant == "iid") {
    if (!a.d) throw ConfigError("--d is required for the iid variant");
    value = d_eff_lower_bound_iid(static_cast<Index>(*a.d), a.p);
    j["d"] = *a.d;
  } else if (a.variant == "independent") {
    if (a.sigmas.empty()) throw ConfigError("--sigmas is required for the independent variant");
    value = d_eff_lower_bound_independent(a.sigmas, a.p);
    j["sigmas"] = a.sigmas;
  } else if (a.variant == "stable") {
    if (!a.d) throw ConfigError("--d is required for the stable variant");
    const StableDeffBound b = d_eff_lower_bound_stable(static_cast<Index>(*a.d), a.p, a.epsilon);
    value = b.value;
    j["d"] = *a.d;
    j["stable"] = to_json(b);
  } else {
    throw ConfigError("--variant must be iid, independent or stable");
  }
  j["value"] = json_number(value);
  if (g.json) {
    out << j.dump(2) << '\n';
  } else {
    out << num(value) << '\n';
  }
  return 0;
}

struct HardArgs {
  std::optional<std::string> regime;
  std::optional<std::int64_t> d;
  std::optional<std::int64_t> d_star;
  double G = 1.0;
  double D = 1.0;
  std::optional<double> mu;
  std::optional<double> sigma_l;
  double p = 2.0;
  std::optional<std::int64_t> T;
  double delta = 0.1;
};

int cmd_hardness(const Globals& g, const HardArgs& a, std::ostream& out) {
  json j;
  if (!g.config.empty()) {
    const ExperimentConfig c = load_config(g);
    if (!c.hardness) throw ConfigError("hardness: the config has no hardness section");
    const std::int64_t T = a.T.value_or(t_grid(c.run.T_grid).front());
    const std::optional<Codebook> codebook = build_codebook(c);
    const ProblemSetup s = build_problem(c, T, &codebook->words.front());
    j["T"] = T;
    j["instance"] = to_json(*s.instance);
    j["declared_noise"] = to_json(s.oracle->noise());
    j["moment_bounds"] = to_json(hard_moment_bounds(*s.instance, c.noise.p));
    j["lipschitz_G"] = s.objective->lipschitz_G;
    j["codebook"] = to_json(*codebook);
  } else {
    if (!a.regime || !a.d_star || !a.sigma_l || !a.T) {
      throw ConfigError("hardness needs --config, or --regime, --d-star, --sigma-l and --T");
    }
    const HardRegime regime = hard_regime_from_string(*a.regime);
    const HardKind kind = kind_of(regime);
    const bool twopoint = regime == HardRegime::cvx_twopoint || regime == HardRegime::str_twopoint;
    const Index d_star = static_cast<Index>(*a.d_star);
    const Index d = static_cast<Index>(a.d.value_or(*a.d_star));
    const double mu = a.mu.value_or(kind == HardKind::str ? 1.0 : 0.0);
    const HardParams params = hard_params(regime, a.G, a.D, mu, *a.sigma_l, a.p, *a.T, d_star,
                                          twopoint ? std::optional<double>(a.delta) : std::nullopt);
    Rng rng(derive_seed(g.seed.value_or(0), 0, kCodebookTag));
    Vector v = Vector::Ones(d);
    for (Index i = 0; i < d_star; ++i) v[i] = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    const HardProblem hp = make_hard_instance(kind, d, d_star, params, v, a.p);
    j["T"] = *a.T;
    j["params"] = to_json(params);
    j["instance"] = to_json(*hp.instance);
    j["declared_noise"] = to_json(hp.oracle.noise());
    j["moment_bounds"] = to_json(hard_moment_bounds(*hp.instance, a.p));
    j["lipschitz_G"] = hp.objective->lipschitz_G;
  }
  if (g.json) {
    out << j.dump(2) << '\n';
  } else {
    const json& inst = j["instance"];
    out << "kind " << inst["kind"].get<std::string>() << ", d = " << inst["d"] << ", d_star = " << inst["d_star"]
        << '\n';
    out << "F_star = " << inst["F_star"].dump() << '\n';
    out << "x_star = " << inst["x_star"].dump() << '\n';
    out << "declared sigma_s = " << j["declared_noise"]["sigma_s"].dump()
        << ", sigma_l = " << j["declared_noise"]["sigma_l"].dump() << '\n';
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clipped SGD under heavy-tailed noise: schedules, verifiers and experiments", "htclip"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "experiment configuration (JSON)");
  app.add_option("--out", g.out, "output directory, overrides output.dir");
  app.add_option("--seed", g.seed, "master seed, overrides run.master_seed");
  app.add_option("--threads", g.threads, "worker threads (fallback: HTCLIP_THREADS)")->check(CLI::PositiveNumber);
  app.add_flag("--json", g.json, "machine-readable output");

  auto* run = app.add_subcommand("run", "run an experiment and write series.csv, fit.csv, manifest.json");
  auto* schedule = app.add_subcommand("schedule", "print resolved schedule constants");

  ClipArgs ca;
  auto* clip = app.add_subcommand("clip-verify", "check the clipping-error bounds at x_1");
  clip->add_option("--tau", ca.tau, "clipping threshold");
  clip->add_option("--tau-factor", ca.tau_factor, "threshold as a multiple of G when --tau is absent");
  clip->add_option("--alpha", ca.alpha, "alpha in (0, 1)");
  clip->add_option("--samples", ca.samples, "Monte Carlo sample count");
  clip->add_flag("--exact", ca.exact, "force exact enumeration");
  clip->add_option("--T", ca.T, "grid point used to build the instance");

  DeffArgs da;
  auto* deff = app.add_subcommand("deff", "effective-dimension lower bounds");
  deff->add_option("--variant", da.variant, "iid, independent or stable")->required();
  deff->add_option("--d", da.d, "dimension");
  deff->add_option("--p", da.p, "moment order in (1, 2]");
  deff->add_option("--sigmas", da.sigmas, "per-coordinate moments")->delimiter(',');
  deff->add_option("--epsilon", da.epsilon, "stable variant: alpha - p");

  HardArgs ha;
  auto* hard = app.add_subcommand("hardness", "materialize a lower-bound instance");
  hard->add_option("--regime", ha.regime, "cvx-fano, cvx-twopoint, str-fano or str-twopoint");
  hard->add_option("--d", ha.d, "ambient dimension (default d_star)");
  hard->add_option("--d-star", ha.d_star, "active dimension");
  hard->add_option("--G", ha.G, "Lipschitz constant");
  hard->add_option("--D", ha.D, "distance scale");
  hard->add_option("--mu", ha.mu, "strong convexity modulus");
  hard->add_option("--sigma-l", ha.sigma_l, "noise scale sigma_l");
  hard->add_option("--p", ha.p, "moment order in (1, 2]");
  hard->add_option("--T", ha.T, "horizon");
  hard->add_option("--delta", ha.delta, "failure probability (two-point regimes)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(g, out, err);
    if (schedule->parsed()) return cmd_schedule(g, out);
    if (clip->parsed()) return cmd_clip_verify(g, ca, out);
    if (deff->parsed()) return cmd_deff(g, da, out);
    if (hard->parsed()) return cmd_hardness(g, ha, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ContractViolation& e) {
    err << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const NumericalFailure& e) {
    err << "numerical failure at iteration " << e.iteration() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace htclip
