#include "htclip/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace htclip {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); }

// Object view that remembers which keys were read, so leftovers can be rejected.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  const json* get(const std::string& name) {
    seen_.insert(name);
    auto it = node_.find(name);
    if (it == node_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  bool has(const std::string& name) const {
    auto it = node_.find(name);
    return it != node_.end() && !it->is_null();
  }

  double number(const std::string& name, std::optional<double> fallback = std::nullopt) {
    const json* v = get(name);
    if (!v) {
      if (!fallback) fail(key(name), "required number is missing");
      return *fallback;
    }
    if (!v->is_number()) fail(key(name), "expected a number");
    return v->get<double>();
  }

  std::optional<double> opt_number(const std::string& name) {
    if (!has(name)) {
      get(name);
      return std::nullopt;
    }
    return number(name);
  }

  std::int64_t integer(const std::string& name, std::optional<std::int64_t> fallback = std::nullopt) {
    const json* v = get(name);
    if (!v) {
      if (!fallback) fail(key(name), "required integer is missing");
      return *fallback;
    }
    if (!v->is_number_integer()) fail(key(name), "expected an integer");
    return v->get<std::int64_t>();
  }

  std::string string(const std::string& name, std::optional<std::string> fallback = std::nullopt) {
    const json* v = get(name);
    if (!v) {
      if (!fallback) fail(key(name), "required string is missing");
      return *fallback;
    }
    if (!v->is_string()) fail(key(name), "expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (const auto& [k, _] : node_.items()) {
      if (!seen_.count(k)) fail(key(k), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, std::size_t N>
E enum_from(const std::string& key, const std::string& value, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [e, name] : table) {
    if (name == value) return e;
  }
  std::string allowed;
  for (const auto& [e, name] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  fail(key, "unknown value '" + value + "' (allowed: " + allowed + ")");
}

constexpr std::array<std::pair<ProblemKind, std::string_view>, 3> kProblemKinds = {
    {{ProblemKind::abs_sum, "abs-sum"}, {ProblemKind::euclid_norm, "euclid-norm"}, {ProblemKind::hard, "hard"}}};
constexpr std::array<std::pair<NoiseKind, std::string_view>, 4> kNoiseKinds = {{{NoiseKind::deterministic, "deterministic"},
                                                                                {NoiseKind::gaussian, "gaussian"},
                                                                                {NoiseKind::stable, "stable"},
                                                                                {NoiseKind::hard, "hard"}}};
constexpr std::array<std::pair<Algorithm, std::string_view>, 2> kAlgorithms = {
    {{Algorithm::clipped, "clipped"}, {Algorithm::stabilized, "stabilized"}}};
constexpr std::array<std::pair<CodebookKind, std::string_view>, 2> kCodebooks = {
    {{CodebookKind::gv, "gv"}, {CodebookKind::twopoint, "twopoint"}}};

template <typename E, std::size_t N>
std::string_view name_of(E e, const std::array<std::pair<E, std::string_view>, N>& table) {
  for (const auto& [k, name] : table) {
    if (k == e) return name;
  }
  return "?";
}

std::vector<double> number_list(const json& v, const std::string& key) {
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void parse_problem(Section& s, ProblemConfig& c) {
  c.kind = enum_from(s.key("kind"), s.string("kind"), kProblemKinds);
  const std::int64_t d = s.integer("d");
  if (d < 1) fail(s.key("d"), "must be >= 1");
  c.d = static_cast<Index>(d);
  c.G = s.number("G", 1.0);
  if (!(c.G > 0.0)) fail(s.key("G"), "must be positive");
  c.mu = s.number("mu", 0.0);
  if (!(c.mu >= 0.0)) fail(s.key("mu"), "must be nonnegative");
  c.D = s.number("D", 1.0);
  if (!(c.D > 0.0)) fail(s.key("D"), "must be positive");

  if (const json* dom = s.get("domain")) {
    if (dom->is_string()) {
      if (dom->get<std::string>() != "all-space") fail(s.key("domain"), "expected \"all-space\" or a ball object");
    } else {
      Section ds(*dom, s.key("domain"));
      const std::string kind = ds.string("kind");
      if (kind == "ball") {
        c.ball_radius = ds.number("radius");
        if (!(*c.ball_radius > 0.0)) fail(ds.key("radius"), "must be positive");
      } else if (kind != "all-space") {
        fail(ds.key("kind"), "expected all-space or ball");
      }
      ds.finish();
    }
  }

  if (const json* x1 = s.get("x1_mode")) {
    if (x1->is_string()) {
      if (x1->get<std::string>() != "origin") fail(s.key("x1_mode"), "expected \"origin\" or {\"offset\": [...]}");
    } else {
      Section xs(*x1, s.key("x1_mode"));
      const json* off = xs.get("offset");
      if (!off) fail(xs.key("offset"), "required array is missing");
      c.x1_offset = number_list(*off, xs.key("offset"));
      if (static_cast<Index>(c.x1_offset->size()) != c.d) fail(xs.key("offset"), "length must equal problem.d");
      xs.finish();
    }
  }
  s.finish();
}

void parse_noise(Section& s, NoiseConfig& c, Index d) {
  c.kind = enum_from(s.key("kind"), s.string("kind"), kNoiseKinds);
  c.p = s.number("p", 2.0);
  if (!(c.p > 1.0 && c.p <= 2.0)) fail(s.key("p"), "must lie in (1, 2]");
  c.sigma_s = s.opt_number("sigma_s");
  c.sigma_l = s.opt_number("sigma_l");
  if (c.sigma_s && !(*c.sigma_s >= 0.0)) fail(s.key("sigma_s"), "must be nonnegative");
  if (c.sigma_l && !(*c.sigma_l >= 0.0)) fail(s.key("sigma_l"), "must be nonnegative");
  if (c.sigma_s && c.sigma_l && *c.sigma_s > *c.sigma_l) {
    fail(s.key("sigma_s"), "moment ordering violated: need sigma_s <= sigma_l");
  }

  if (const json* st = s.get("stable")) {
    if (c.kind != NoiseKind::stable) fail(s.key("stable"), "only allowed with kind = stable");
    Section ss(*st, s.key("stable"));
    c.stable.alpha = ss.number("alpha");
    c.stable.beta = ss.number("beta", 0.0);
    c.stable.gamma_scale = ss.number("gamma", 1.0);
    ss.finish();
    if (!(c.stable.alpha > 1.0 && c.stable.alpha <= 2.0)) fail(ss.key("alpha"), "must lie in (1, 2]");
    if (c.stable.beta != 0.0) fail(ss.key("beta"), "only symmetric noise (beta = 0) is supported in experiments");
    if (!(c.stable.gamma_scale >= 0.0)) fail(ss.key("gamma"), "must be nonnegative");
    if (!(c.p < c.stable.alpha || c.stable.alpha == 2.0)) {
      fail(ss.key("alpha"), "the p-th moment is infinite: need alpha > p (or alpha = 2)");
    }
  } else if (c.kind == NoiseKind::stable) {
    fail(s.key("stable"), "required for kind = stable");
  }

  if (const json* sc = s.get("scales")) {
    if (c.kind != NoiseKind::gaussian) fail(s.key("scales"), "only allowed with kind = gaussian");
    c.scales = sc->is_number() ? std::vector<double>{sc->get<double>()} : number_list(*sc, s.key("scales"));
    if (c.scales.size() == 1) c.scales.assign(static_cast<std::size_t>(d), c.scales.front());
    if (static_cast<Index>(c.scales.size()) != d) fail(s.key("scales"), "need one scale or one per coordinate");
    for (double v : c.scales) {
      if (!(v >= 0.0)) fail(s.key("scales"), "scales must be nonnegative");
    }
  } else if (c.kind == NoiseKind::gaussian) {
    c.scales.assign(static_cast<std::size_t>(d), 1.0);
  }
  s.finish();
}

}  // namespace

std::string_view to_string(ProblemKind kind) { return name_of(kind, kProblemKinds); }
std::string_view to_string(NoiseKind kind) { return name_of(kind, kNoiseKinds); }
std::string_view to_string(Algorithm algorithm) { return name_of(algorithm, kAlgorithms); }
std::string_view to_string(CodebookKind kind) { return name_of(kind, kCodebooks); }

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");

  const json* pj = root.get("problem");
  if (!pj) fail("problem", "required section is missing");
  Section ps(*pj, "problem");
  parse_problem(ps, c.problem);

  const json* nj = root.get("noise");
  if (!nj) fail("noise", "required section is missing");
  Section ns(*nj, "noise");
  parse_noise(ns, c.noise, c.problem.d);

  const json* sj = root.get("schedule");
  if (!sj) fail("schedule", "required section is missing");
  {
    Section ss(*sj, "schedule");
    try {
      c.schedule.regime = regime_from_string(ss.string("regime"));
    } catch (const ConfigError& e) {
      fail("schedule.regime", e.what());
    }
    c.schedule.delta = ss.number("delta", 0.1);
    if (!(c.schedule.delta > 0.0 && c.schedule.delta <= 1.0)) fail("schedule.delta", "must lie in (0, 1]");
    c.schedule.alpha_clip = ss.number("alpha_clip", 0.5);
    if (!(c.schedule.alpha_clip > 0.0 && c.schedule.alpha_clip < 1.0)) fail("schedule.alpha_clip", "must lie in (0, 1)");
    c.schedule.algorithm = enum_from("schedule.algorithm", ss.string("algorithm", "clipped"), kAlgorithms);
    ss.finish();
  }

  if (const json* hj = root.get("hardness")) {
    Section hs(*hj, "hardness");
    HardnessConfig h;
    try {
      h.regime = hard_regime_from_string(hs.string("regime"));
    } catch (const ConfigError& e) {
      fail("hardness.regime", e.what());
    }
    if (hs.has("d_star")) {
      const std::int64_t ds = hs.integer("d_star");
      if (ds < 1) fail("hardness.d_star", "must be >= 1");
      h.d_star = static_cast<Index>(ds);
    } else {
      hs.get("d_star");
      if (!c.noise.sigma_s || !c.noise.sigma_l || *c.noise.sigma_s == 0.0) {
        fail("hardness.d_star", "required unless noise.sigma_s and noise.sigma_l are both given");
      }
      const double r = *c.noise.sigma_l / *c.noise.sigma_s;
      h.d_star = static_cast<Index>(std::ceil(r * r - 1e-9));
    }
    h.codebook = enum_from("hardness.codebook", hs.string("codebook", "gv"), kCodebooks);
    hs.finish();
    c.hardness = h;
  }

  if (const json* rj = root.get("run")) {
    Section rs(*rj, "run");
    if (const json* g = rs.get("T_grid")) {
      Section gs(*g, "run.T_grid");
      c.run.T_grid.min = gs.integer("min");
      c.run.T_grid.max = gs.integer("max", c.run.T_grid.min);
      c.run.T_grid.ratio = gs.number("ratio", 2.0);
      gs.finish();
    } else {
      fail("run.T_grid", "required object {min, max, ratio} is missing");
    }
    c.run.trials = rs.integer("trials", 1);
    if (const json* ms = rs.get("master_seed")) {
      if (!ms->is_number_unsigned() && !(ms->is_number_integer() && ms->get<std::int64_t>() >= 0)) {
        fail("run.master_seed", "expected a nonnegative integer");
      }
      c.run.master_seed = ms->get<std::uint64_t>();
    }
    if (const json* st = rs.get("record_stride")) {
      if (st->is_number()) {
        c.run.record_stride = RecordStride{RecordStride::Kind::geometric, st->get<double>()};
      } else {
        Section ss(*st, "run.record_stride");
        const std::string kind = ss.string("kind", "geometric");
        if (kind == "linear") {
          c.run.record_stride.kind = RecordStride::Kind::linear;
        } else if (kind != "geometric") {
          fail("run.record_stride.kind", "expected linear or geometric");
        }
        c.run.record_stride.value = ss.number("value", 2.0);
        ss.finish();
      }
    }
    rs.finish();
  } else {
    fail("run", "required section is missing");
  }

  if (const json* ej = root.get("eval")) {
    Section es(*ej, "eval");
    if (const json* q = es.get("quantile_levels")) c.eval.quantile_levels = number_list(*q, "eval.quantile_levels");
    if (const json* a = es.get("averaging")) {
      if (!a->is_array()) fail("eval.averaging", "expected an array of strings");
      for (const auto& m : *a) {
        if (!m.is_string()) fail("eval.averaging", "expected an array of strings");
        try {
          c.eval.averaging.push_back(averaging_from_string(m.get<std::string>()));
        } catch (const ConfigError& e) {
          fail("eval.averaging", e.what());
        }
      }
    }
    c.eval.moment_samples = es.integer("moment_samples", 10'000);
    c.eval.fit_drop_smallest = static_cast<int>(es.integer("fit_drop_smallest", 1));
    if (const json* sl = es.get("expect_slope")) {
      const auto v = number_list(*sl, "eval.expect_slope");
      if (v.size() != 2 || !(v[0] <= v[1])) fail("eval.expect_slope", "expected [lo, hi] with lo <= hi");
      c.eval.expect_slope = std::make_pair(v[0], v[1]);
    }
    es.finish();
  }

  if (const json* oj = root.get("output")) {
    Section os(*oj, "output");
    c.output_dir = os.string("dir", "out");
    os.finish();
  }
  root.finish();

  // Cross-field rules.
  const bool strong = is_strongly_convex(c.schedule.regime);
  if (strong != (c.problem.mu > 0.0)) {
    fail("problem.mu", std::string("regime/mu mismatch: regime ") + std::string(to_string(c.schedule.regime)) +
                           (strong ? " needs mu > 0" : " needs mu = 0"));
  }
  if (c.schedule.algorithm == Algorithm::stabilized && c.problem.mu != 0.0) {
    fail("schedule.algorithm", "the stabilized method needs mu = 0");
  }
  if ((c.problem.kind == ProblemKind::hard) != (c.noise.kind == NoiseKind::hard)) {
    fail("noise.kind", "hard noise and the hard problem kind go together");
  }
  if ((c.problem.kind == ProblemKind::hard) != c.hardness.has_value()) {
    fail("hardness", c.hardness ? "only allowed with problem.kind = hard" : "required for problem.kind = hard");
  }
  if (c.hardness) {
    HardnessConfig& h = *c.hardness;
    const bool hard_str = kind_of(h.regime) == HardKind::str;
    if (hard_str != strong) fail("hardness.regime", "instance kind must match the schedule regime");
    if (h.d_star > c.problem.d) fail("hardness.d_star", "must not exceed problem.d");
    if (!c.noise.sigma_l || !(*c.noise.sigma_l > 0.0)) fail("noise.sigma_l", "hard instances need sigma_l > 0");
    if (!c.noise.sigma_s) c.noise.sigma_s = *c.noise.sigma_l / std::sqrt(static_cast<double>(h.d_star));
    if ((h.regime == HardRegime::cvx_twopoint || h.regime == HardRegime::str_twopoint) &&
        !(c.schedule.delta < 0.125)) {
      fail("schedule.delta", "two-point instances need delta < 1/8");
    }
  }
  if (c.problem.ball_radius && c.problem.x1_offset) {
    Vector x1 = Eigen::Map<const Vector>(c.problem.x1_offset->data(), c.problem.d);
    if (x1.norm() > *c.problem.ball_radius * (1.0 + 1e-12)) fail("problem.x1_mode", "x_1 must lie in the domain");
  }

  const TGrid& g = c.run.T_grid;
  if (g.min < 1) fail("run.T_grid.min", "must be >= 1");
  if (g.max < g.min) fail("run.T_grid", "empty grid: max < min");
  if (!(g.ratio > 1.0)) fail("run.T_grid.ratio", "must be > 1");
  if (c.run.trials < 1) fail("run.trials", "must be >= 1");
  if (c.run.record_stride.kind == RecordStride::Kind::geometric ? !(c.run.record_stride.value > 1.0)
                                                                 : !(c.run.record_stride.value >= 1.0)) {
    fail("run.record_stride", "geometric ratio must be > 1, linear step >= 1");
  }

  if (c.eval.quantile_levels.empty()) c.eval.quantile_levels = {1.0 - c.schedule.delta};
  for (double q : c.eval.quantile_levels) {
    if (!(q > 0.0 && q < 1.0)) fail("eval.quantile_levels", "levels must lie in (0, 1)");
  }
  if (c.eval.averaging.empty()) c.eval.averaging = {designated_averaging(c.schedule.regime)};
  if (c.eval.moment_samples < 1000) fail("eval.moment_samples", "must be >= 1000");
  if (c.eval.fit_drop_smallest < 0) fail("eval.fit_drop_smallest", "must be >= 0");
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json j;
  json& p = j["problem"];
  p["kind"] = to_string(c.problem.kind);
  p["d"] = c.problem.d;
  p["G"] = c.problem.G;
  p["mu"] = c.problem.mu;
  p["D"] = c.problem.D;
  if (c.problem.ball_radius) {
    p["domain"] = {{"kind", "ball"}, {"radius", *c.problem.ball_radius}};
  } else {
    p["domain"] = "all-space";
  }
  if (c.problem.x1_offset) {
    p["x1_mode"] = {{"offset", *c.problem.x1_offset}};
  } else {
    p["x1_mode"] = "origin";
  }

  json& n = j["noise"];
  n["kind"] = to_string(c.noise.kind);
  n["p"] = c.noise.p;
  if (c.noise.sigma_s) n["sigma_s"] = *c.noise.sigma_s;
  if (c.noise.sigma_l) n["sigma_l"] = *c.noise.sigma_l;
  if (c.noise.kind == NoiseKind::stable) {
    n["stable"] = {{"alpha", c.noise.stable.alpha}, {"beta", c.noise.stable.beta}, {"gamma", c.noise.stable.gamma_scale}};
  }
  if (c.noise.kind == NoiseKind::gaussian) n["scales"] = c.noise.scales;

  j["schedule"] = {{"regime", to_string(c.schedule.regime)},
                   {"delta", c.schedule.delta},
                   {"alpha_clip", c.schedule.alpha_clip},
                   {"algorithm", to_string(c.schedule.algorithm)}};
  if (c.hardness) {
    j["hardness"] = {{"regime", to_string(c.hardness->regime)},
                     {"d_star", c.hardness->d_star},
                     {"codebook", to_string(c.hardness->codebook)}};
  }
  j["run"] = {{"T_grid", {{"min", c.run.T_grid.min}, {"max", c.run.T_grid.max}, {"ratio", c.run.T_grid.ratio}}},
              {"trials", c.run.trials},
              {"master_seed", c.run.master_seed},
              {"record_stride",
               {{"kind", c.run.record_stride.kind == RecordStride::Kind::linear ? "linear" : "geometric"},
                {"value", c.run.record_stride.value}}}};
  json modes = json::array();
  for (Averaging a : c.eval.averaging) modes.push_back(to_string(a));
  j["eval"] = {{"quantile_levels", c.eval.quantile_levels},
               {"averaging", modes},
               {"moment_samples", c.eval.moment_samples},
               {"fit_drop_smallest", c.eval.fit_drop_smallest}};
  if (c.eval.expect_slope) j["eval"]["expect_slope"] = {c.eval.expect_slope->first, c.eval.expect_slope->second};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

std::string config_digest(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output");
  const std::string canon = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::int64_t> t_grid(const TGrid& grid) {
  if (grid.min < 1 || grid.max < grid.min || !(grid.ratio > 1.0)) throw ConfigError("run.T_grid: empty or invalid grid");
  std::vector<std::int64_t> out;
  for (int k = 0;; ++k) {
    const double v = static_cast<double>(grid.min) * std::pow(grid.ratio, k);
    const auto T = static_cast<std::int64_t>(std::llround(v));
    if (T > grid.max) break;
    if (out.empty() || T > out.back()) out.push_back(T);
  }
  return out;
}

}  // namespace htclip
