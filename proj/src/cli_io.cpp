#include "blochhom/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>
#include "json.hpp"

#include "blochhom/svg.hpp"

#ifndef BLOCHHOM_VERSION
#define BLOCHHOM_VERSION "0.0.0"
#endif

namespace blochhom {

using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON reading. Every error names the offending path.

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw InputError(fmt::format("config: {}: {}", path.empty() ? "<root>" : path, msg));
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return fmt::format("{}[{}]", path, i); }

class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) fail(join(path_, k), "unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const {
    if (!j_.contains(key)) fail(join(path_, key), "required key missing");
    return j_.at(key);
  }
  std::string path(const char* key) const { return join(path_, key); }

 private:
  const json& j_;
  std::string path_;
};

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double as_positive(const json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

long long as_integer(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return static_cast<long long>(v);
  }
  fail(path, "expected an integer");
}

int as_int(const json& j, const std::string& path, long long lo, long long hi = 1LL << 30) {
  const long long v = as_integer(j, path);
  if (v < lo || v > hi) fail(path, fmt::format("must lie in [{}, {}]", lo, hi));
  return static_cast<int>(v);
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  return j;
}

CoefficientSpec parse_coefficient(const json& j, const std::string& path) {
  Obj o(j, path);
  if (o.has("fourier")) {
    o.allow({"fourier"});
    CoefficientSpec::Fourier f;
    std::set<int> seen;
    const auto& arr = as_array(o.at("fourier"), o.path("fourier"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = index(o.path("fourier"), i);
      const auto& t = as_array(arr[i], p);
      if (t.size() != 2 && t.size() != 3) fail(p, "expected [k, re] or [k, re, im]");
      const int k = as_int(t[0], index(p, 0), -(1 << 20), 1 << 20);
      if (!seen.insert(k).second) fail(p, fmt::format("duplicate wavenumber {}", k));
      const double re = as_number(t[1], index(p, 1));
      const double im = t.size() == 3 ? as_number(t[2], index(p, 2)) : 0.0;
      f.terms.push_back({k, {re, im}});
    }
    if (f.terms.empty()) fail(o.path("fourier"), "at least one term is required");
    return {f};
  }
  o.allow({"named", "params"});
  const std::string name = as_string(o.at("named"), o.path("named"));
  const Obj params(o.at("params"), o.path("params"));
  if (name == "constant") {
    params.allow({"value"});
    return CoefficientSpec::constant(as_number(params.at("value"), params.path("value")));
  }
  if (name == "cosine") {
    params.allow({"mean", "amplitude", "harmonic"});
    const double mean = params.has("mean") ? as_number(params.at("mean"), params.path("mean")) : 0.0;
    const double amp = as_number(params.at("amplitude"), params.path("amplitude"));
    const int harmonic = params.has("harmonic") ? as_int(params.at("harmonic"), params.path("harmonic"), 0) : 1;
    return CoefficientSpec::cosine(mean, amp, harmonic);
  }
  fail(o.path("named"), fmt::format("unknown coefficient form '{}' (constant, cosine)", name));
}

json write_coefficient(const CoefficientSpec& c) {
  json j;
  if (const auto* k = std::get_if<CoefficientSpec::Constant>(&c.form)) {
    j["named"] = "constant";
    j["params"] = {{"value", k->value}};
  } else if (const auto* cs = std::get_if<CoefficientSpec::Cosine>(&c.form)) {
    j["named"] = "cosine";
    j["params"] = {{"mean", cs->mean}, {"amplitude", cs->amplitude}, {"harmonic", cs->harmonic}};
  } else {
    json terms = json::array();
    for (const auto& t : std::get<CoefficientSpec::Fourier>(c.form).terms) {
      terms.push_back(json::array({t.k, t.value.real(), t.value.imag()}));
    }
    j["fourier"] = terms;
  }
  return j;
}

struct ProfileLayout {
  MacroProfile::Kind kind;
  const char* name;
  std::vector<const char*> params;
};

const std::vector<ProfileLayout>& profile_layouts() {
  static const std::vector<ProfileLayout> layouts = {
      {MacroProfile::Kind::constant, "constant", {"value"}},
      {MacroProfile::Kind::linear, "linear", {"slope", "intercept"}},
      {MacroProfile::Kind::sine, "sine", {"amplitude", "mode", "length"}},
      {MacroProfile::Kind::bump, "bump", {"amplitude", "center", "width"}},
      {MacroProfile::Kind::sine_bump, "sine_bump", {"amplitude", "center", "width", "length"}},
  };
  return layouts;
}

MacroProfile parse_profile(const json& j, const std::string& path) {
  Obj o(j, path);
  o.allow({"kind", "params"});
  const std::string kind = as_string(o.at("kind"), o.path("kind"));
  const auto& layouts = profile_layouts();
  const auto it = std::find_if(layouts.begin(), layouts.end(), [&](const auto& l) { return kind == l.name; });
  if (it == layouts.end()) fail(o.path("kind"), fmt::format("unknown profile kind '{}'", kind));
  const Obj params(o.at("params"), o.path("params"));
  for (const auto& [k, v] : o.at("params").items()) {
    if (std::none_of(it->params.begin(), it->params.end(), [&](const char* p) { return k == p; })) {
      fail(join(o.path("params"), k), "unknown key");
    }
  }
  std::vector<double> v;
  for (const char* p : it->params) v.push_back(as_number(params.at(p), params.path(p)));
  try {
    switch (it->kind) {
      case MacroProfile::Kind::constant: return MacroProfile::constant(v[0]);
      case MacroProfile::Kind::linear: return MacroProfile::linear(v[0], v[1]);
      case MacroProfile::Kind::sine:
        return MacroProfile::sine(v[0], as_int(params.at("mode"), params.path("mode"), 1), v[2]);
      case MacroProfile::Kind::bump: return MacroProfile::bump(v[0], v[1], v[2]);
      case MacroProfile::Kind::sine_bump: return MacroProfile::sine_bump(v[0], v[1], v[2], v[3]);
    }
  } catch (const InputError& e) {
    fail(path, e.what());
  }
  fail(path, "unreachable profile kind");
}

json write_profile(const MacroProfile& m) {
  const auto& layouts = profile_layouts();
  const auto it = std::find_if(layouts.begin(), layouts.end(), [&](const auto& l) { return l.kind == m.kind(); });
  json params = json::object();
  for (std::size_t i = 0; i < it->params.size(); ++i) {
    if (std::string(it->params[i]) == "mode") {
      params[it->params[i]] = static_cast<int>(m.params()[i]);
    } else {
      params[it->params[i]] = m.params()[i];
    }
  }
  return {{"kind", it->name}, {"params", params}};
}

PotentialSpec parse_potential(const json& j, const std::string& path) {
  Obj o(j, path);
  PotentialSpec d;
  d.kind = as_string(o.at("kind"), o.path("kind"));
  if (d.kind == "zero") {
    o.allow({"kind"});
  } else if (d.kind == "separable") {
    o.allow({"kind", "macro", "micro", "bound"});
    d.macro = parse_profile(o.at("macro"), o.path("macro"));
    d.micro = parse_coefficient(o.at("micro"), o.path("micro"));
  } else if (d.kind == "grid") {
    o.allow({"kind", "rows", "bound"});
    const auto& rows = as_array(o.at("rows"), o.path("rows"));
    if (rows.size() < 2) fail(o.path("rows"), "at least two rows are required");
    for (std::size_t i = 0; i < rows.size(); ++i) d.rows.push_back(parse_coefficient(rows[i], index(o.path("rows"), i)));
  } else {
    fail(o.path("kind"), fmt::format("unknown potential kind '{}' (zero, separable, grid)", d.kind));
  }
  if (o.has("bound")) d.bound = as_positive(o.at("bound"), o.path("bound"));
  return d;
}

json write_potential(const PotentialSpec& d) {
  json j;
  j["kind"] = d.kind;
  if (d.kind == "separable") {
    j["macro"] = write_profile(d.macro);
    j["micro"] = write_coefficient(d.micro);
  } else if (d.kind == "grid") {
    json rows = json::array();
    for (const auto& r : d.rows) rows.push_back(write_coefficient(r));
    j["rows"] = rows;
  }
  if (d.bound) j["bound"] = *d.bound;
  return j;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("config: malformed JSON: {}", e.what()));
  }
  RunConfig cfg;
  const Obj o(root, "");
  o.allow({"scenario", "sigma", "c", "d", "noise", "band", "initial", "pairing_macro", "numerics", "tolerances",
           "output"});
  cfg.scenario = as_string(o.at("scenario"), "scenario");
  cfg.sigma = parse_coefficient(o.at("sigma"), "sigma");
  if (o.has("c")) cfg.c = parse_coefficient(o.at("c"), "c");
  if (o.has("d")) cfg.d = parse_potential(o.at("d"), "d");

  if (o.has("noise")) {
    const Obj n(o.at("noise"), "noise");
    n.allow({"kind", "profile"});
    try {
      cfg.noise = noise_kind_from_string(as_string(n.at("kind"), n.path("kind")));
    } catch (const InputError& e) {
      fail(n.path("kind"), e.what());
    }
    if (n.has("profile")) {
      cfg.noise_profile = parse_coefficient(n.at("profile"), n.path("profile"));
    } else if (cfg.noise != NoiseKind::none) {
      fail(n.path("profile"), "required when noise is present");
    }
  }

  if (o.has("band")) {
    const Obj b(o.at("band"), "band");
    b.allow({"n", "theta_candidates"});
    if (b.has("n")) cfg.band = as_int(b.at("n"), b.path("n"), 1);
    if (b.has("theta_candidates")) {
      const auto& arr = as_array(b.at("theta_candidates"), b.path("theta_candidates"));
      if (arr.empty()) fail(b.path("theta_candidates"), "at least one candidate is required");
      cfg.theta_candidates.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = index(b.path("theta_candidates"), i);
        const double t = as_number(arr[i], p);
        if (t < -0.5 || t > 0.5) fail(p, "must lie in the dual cell [-1/2, 1/2]");
        cfg.theta_candidates.push_back(t);
      }
    }
  }

  if (o.has("initial")) cfg.initial = parse_profile(o.at("initial"), "initial");
  if (o.has("pairing_macro")) cfg.pairing_macro = parse_profile(o.at("pairing_macro"), "pairing_macro");

  if (o.has("numerics")) {
    const Obj n(o.at("numerics"), "numerics");
    n.allow({"K", "coeff_grid", "n_bands", "theta_points", "length", "T", "dt", "epsilon", "points_per_cell",
             "homog_nx", "replicas", "seed", "output_instants", "fd_step", "lab_frame"});
    if (n.has("K")) cfg.order = as_int(n.at("K"), n.path("K"), 1, 512);
    if (n.has("coeff_grid")) cfg.coeff_grid = as_int(n.at("coeff_grid"), n.path("coeff_grid"), 1, 1 << 16);
    if (n.has("n_bands")) cfg.n_bands = as_int(n.at("n_bands"), n.path("n_bands"), 1);
    if (n.has("theta_points")) cfg.theta_points = as_int(n.at("theta_points"), n.path("theta_points"), 3);
    if (n.has("length")) cfg.length = as_positive(n.at("length"), n.path("length"));
    if (n.has("T")) cfg.T = as_positive(n.at("T"), n.path("T"));
    if (n.has("dt")) cfg.dt = as_positive(n.at("dt"), n.path("dt"));
    if (n.has("epsilon")) {
      const auto& arr = as_array(n.at("epsilon"), n.path("epsilon"));
      if (arr.empty()) fail(n.path("epsilon"), "at least one value is required");
      cfg.q_list.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = index(n.path("epsilon"), i);
        const double e = as_positive(arr[i], p);
        const double q = std::round(1.0 / e);
        if (q < 1.0 || q > 1e6 || std::abs(e - 1.0 / q) > 1e-12 * e) fail(p, fmt::format("{} is not 1/q for an integer q", e));
        cfg.q_list.push_back(static_cast<int>(q));
      }
    }
    if (n.has("points_per_cell")) cfg.points_per_cell = as_int(n.at("points_per_cell"), n.path("points_per_cell"), 16);
    if (n.has("homog_nx")) {
      cfg.homog_nx = as_int(n.at("homog_nx"), n.path("homog_nx"), 0);
      if (cfg.homog_nx != 0 && cfg.homog_nx < 4) fail(n.path("homog_nx"), "must be 0 or at least 4");
    }
    if (n.has("replicas")) cfg.replicas = as_int(n.at("replicas"), n.path("replicas"), 1);
    if (n.has("seed")) {
      const auto& s = n.at("seed");
      if (!s.is_number_unsigned()) fail(n.path("seed"), "expected a non-negative integer");
      cfg.seed = s.get<std::uint64_t>();
    }
    if (n.has("output_instants")) cfg.output_instants = as_int(n.at("output_instants"), n.path("output_instants"), 1);
    if (n.has("fd_step")) cfg.fd_step = as_positive(n.at("fd_step"), n.path("fd_step"));
    if (n.has("lab_frame")) cfg.lab_frame = as_bool(n.at("lab_frame"), n.path("lab_frame"));

    const double steps = cfg.T / cfg.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
      fail(n.path("dt"), fmt::format("T / dt = {} is not an integer", steps));
    }
  }

  if (o.has("tolerances")) {
    const Obj t(o.at("tolerances"), "tolerances");
    t.allow({"derivative", "gap", "compat", "residual", "lambda_pp_rel"});
    if (t.has("derivative")) cfg.derivative_tol = as_positive(t.at("derivative"), t.path("derivative"));
    if (t.has("gap")) cfg.gap_tol = as_positive(t.at("gap"), t.path("gap"));
    if (t.has("compat")) cfg.compat_tol = as_positive(t.at("compat"), t.path("compat"));
    if (t.has("residual")) cfg.residual_tol = as_positive(t.at("residual"), t.path("residual"));
    if (t.has("lambda_pp_rel")) cfg.lambda_pp_rel_tol = as_positive(t.at("lambda_pp_rel"), t.path("lambda_pp_rel"));
  }

  if (o.has("output")) {
    const Obj out(o.at("output"), "output");
    out.allow({"dir"});
    if (out.has("dir")) cfg.output_dir = as_string(out.at("dir"), out.path("dir"));
  }

  // Cross-field checks.
  if (cfg.band >= 2 * cfg.order + 1) fail("band.n", fmt::format("exceeds the {} available bands", 2 * cfg.order + 1));
  std::vector<std::pair<std::string, const CoefficientSpec*>> specs = {
      {"sigma", &cfg.sigma}, {"c", &cfg.c}, {"noise.profile", &cfg.noise_profile}};
  if (cfg.d.kind == "separable") specs.emplace_back("d.micro", &cfg.d.micro);
  for (std::size_t i = 0; i < cfg.d.rows.size(); ++i) specs.emplace_back(index("d.rows", i), &cfg.d.rows[i]);
  for (const auto& [p, s] : specs) {
    if (cfg.coeff_grid < 2 * s->order() + 1) {
      fail("numerics.coeff_grid", fmt::format("too small for {} (order {})", p, s->order()));
    }
  }
  return cfg;
}

namespace {

json config_json(const RunConfig& cfg) {
  json j;
  j["scenario"] = cfg.scenario;
  j["sigma"] = write_coefficient(cfg.sigma);
  j["c"] = write_coefficient(cfg.c);
  j["d"] = write_potential(cfg.d);
  j["noise"] = {{"kind", to_string(cfg.noise)}, {"profile", write_coefficient(cfg.noise_profile)}};
  j["band"] = {{"n", cfg.band}, {"theta_candidates", cfg.theta_candidates}};
  j["initial"] = write_profile(cfg.initial);
  if (cfg.pairing_macro) j["pairing_macro"] = write_profile(*cfg.pairing_macro);
  json eps = json::array();
  for (int q : cfg.q_list) eps.push_back(1.0 / q);
  j["numerics"] = {{"K", cfg.order},
                   {"coeff_grid", cfg.coeff_grid},
                   {"n_bands", cfg.n_bands},
                   {"theta_points", cfg.theta_points},
                   {"length", cfg.length},
                   {"T", cfg.T},
                   {"dt", cfg.dt},
                   {"epsilon", eps},
                   {"points_per_cell", cfg.points_per_cell},
                   {"homog_nx", cfg.homog_nx},
                   {"replicas", cfg.replicas},
                   {"seed", cfg.seed},
                   {"output_instants", cfg.output_instants},
                   {"fd_step", cfg.fd_step},
                   {"lab_frame", cfg.lab_frame}};
  j["tolerances"] = {{"derivative", cfg.derivative_tol},
                     {"gap", cfg.gap_tol},
                     {"compat", cfg.compat_tol},
                     {"residual", cfg.residual_tol},
                     {"lambda_pp_rel", cfg.lambda_pp_rel_tol}};
  j["output"] = {{"dir", cfg.output_dir}};
  return j;
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) { return config_json(cfg).dump(2); }

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a(serialize_config(cfg))); }

CellProblem make_cell_problem(const RunConfig& cfg) {
  CellProblem p;
  p.sigma = sample_periodic(cfg.sigma, cfg.coeff_grid);
  p.c = sample_periodic(cfg.c, cfg.coeff_grid);
  p.order = cfg.order;
  return p;
}

MacroPotential make_potential(const RunConfig& cfg) {
  if (cfg.d.kind == "separable") {
    return MacroPotential::separable(cfg.d.macro, sample_periodic(cfg.d.micro, cfg.coeff_grid), cfg.length,
                                     cfg.d.bound);
  }
  if (cfg.d.kind == "grid") {
    std::vector<PeriodicFunction> rows;
    for (const auto& r : cfg.d.rows) rows.push_back(sample_periodic(r, cfg.coeff_grid));
    return MacroPotential::sampled(std::move(rows), cfg.length, cfg.d.bound);
  }
  return MacroPotential::zero();
}

PeriodicFunction make_noise_profile(const RunConfig& cfg) { return sample_periodic(cfg.noise_profile, cfg.coeff_grid); }

BandAnalysisConfig make_analysis_config(const RunConfig& cfg, int threads) {
  BandAnalysisConfig a;
  a.cell = make_cell_problem(cfg);
  a.band = cfg.band;
  a.theta_candidates = cfg.theta_candidates;
  a.theta_points = cfg.theta_points;
  a.n_bands = cfg.n_bands;
  a.critical.derivative_tol = cfg.derivative_tol;
  a.critical.gap_tol = cfg.gap_tol;
  a.critical.fd_step = cfg.fd_step;
  a.fredholm.compat_tol = cfg.compat_tol;
  a.fredholm.residual_tol = cfg.residual_tol;
  a.effective.lambda_pp_rel_tol = cfg.lambda_pp_rel_tol;
  a.threads = threads;
  return a;
}

SweepConfig make_sweep_config(const RunConfig& cfg, int threads) {
  SweepConfig s;
  s.analysis = make_analysis_config(cfg, threads);
  s.d = make_potential(cfg);
  s.noise = cfg.noise;
  s.noise_profile = make_noise_profile(cfg);
  s.v0 = cfg.initial;
  s.pairing_macro = cfg.pairing_macro.value_or(cfg.initial);
  s.length = cfg.length;
  s.T = cfg.T;
  s.dt = cfg.dt;
  s.q_list = cfg.q_list;
  s.points_per_cell = cfg.points_per_cell;
  s.homog_nx = cfg.homog_nx;
  s.replicas = cfg.replicas;
  s.seed = cfg.seed;
  s.output_instants = cfg.output_instants;
  s.threads = threads;
  return s;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"bands",          "critical",       "correctors", "effective",
                                                 "simulate-eps",   "simulate-homog", "converge",   "all"};
  return names;
}

const char* tool_version() { return BLOCHHOM_VERSION; }

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string bands_header(int n) {
  std::string h = "theta";
  for (int i = 1; i <= n; ++i) h += fmt::format(",lambda_{}", i);
  return h + "\n";
}

const char* kErrorsHeader = "epsilon,replicas,t,err_mean,err_stderr\n";
const char* kSweepHeader = "epsilon,replicas,t,err_mean,err_stderr,pairing_re,pairing_im,mass_resid\n";
const char* kMassHeader = "t,mass,predicted,residual\n";
const char* kTrajectoryHeader = "t,x,re,im\n";

}  // namespace

std::string bands_csv(const BandStructure& b) {
  std::string s = bands_header(b.band_count());
  for (std::size_t j = 0; j < b.theta_grid.size(); ++j) {
    s += num(b.theta_grid[j]);
    for (double l : b.bands[j]) s += "," + num(l);
    s += "\n";
  }
  return s;
}

std::string errors_csv(const ConvergenceReport& rep) {
  std::string s = kErrorsHeader;
  for (const auto& e : rep.per_eps) {
    for (std::size_t k = 0; k < e.t.size(); ++k) {
      s += fmt::format("{},{},{},{},{}\n", num(e.epsilon), e.replicas_completed, num(e.t[k]), num(e.err_mean[k]),
                       num(e.err_stderr[k]));
    }
  }
  return s;
}

std::string sweep_csv(const ConvergenceReport& rep) {
  std::string s = kSweepHeader;
  for (const auto& e : rep.per_eps) {
    for (std::size_t k = 0; k < e.t.size(); ++k) {
      s += fmt::format("{},{},{},{},{},{},{},{}\n", num(e.epsilon), e.replicas_completed, num(e.t[k]),
                       num(e.err_mean[k]), num(e.err_stderr[k]), num(e.pairing_mean[k].real()),
                       num(e.pairing_mean[k].imag()), num(e.mass_resid_mean[k]));
    }
  }
  return s;
}

std::string mass_csv(const MassDiagnostics& md) {
  std::string s = kMassHeader;
  for (std::size_t k = 0; k < md.t.size(); ++k) {
    s += fmt::format("{},{},{},{}\n", num(md.t[k]), num(md.mass[k]), num(md.predicted[k]), num(md.residual[k]));
  }
  return s;
}

std::string trajectory_csv(const Trajectory& tr) {
  std::string s = kTrajectoryHeader;
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    for (std::size_t j = 0; j < tr.x.size(); ++j) {
      s += fmt::format("{},{},{},{}\n", num(tr.times[k]), num(tr.x[j]), num(tr.states[k][j].real()),
                       num(tr.states[k][j].imag()));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

json complex_array(std::span<const cplx> v) {
  json a = json::array();
  for (const auto& z : v) a.push_back(json::array({z.real(), z.imag()}));
  return a;
}

json critical_json(const CriticalPoint& cp) {
  return {{"n", cp.n},
          {"theta", cp.theta},
          {"lambda", cp.lambda},
          {"slope", cp.slope},
          {"gap", cp.gap},
          {"lambda_pp_fd", cp.lambda_pp_fd},
          {"lambda_pp_fd_error", cp.lambda_pp_fd_error},
          {"simple", cp.simple},
          {"critical", cp.critical},
          {"boundary_candidate", cp.boundary_candidate},
          {"method", cp.method}};
}

json mass_json(const MassDiagnostics& md, const Trajectory& tr) {
  return {{"steps", tr.mass.size() - 1},
          {"scheme", tr.scheme},
          {"mass_initial", md.mass.front()},
          {"mass_final", md.mass.back()},
          {"max_abs_mass_residual", md.max_abs_residual},
          {"max_step_drift", tr.max_step_drift},
          {"log_mass_qv_slope", md.log_mass_qv_slope},
          {"log_mass_time_slope", md.log_mass_time_slope},
          {"mass_time_slope", md.mass_time_slope},
          {"gradient_integral", tr.gradient_integral},
          {"increments_consumed", tr.increments_consumed},
          {"increment_checksum", hex64(tr.increment_checksum)}};
}

std::vector<double> with_origin(const std::vector<double>& t) {
  std::vector<double> out{0.0};
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

struct StageContext {
  const RunConfig& cfg;
  const CliOptions& opts;
  RunOutput& out;
  json& report;
  std::optional<BandAnalysis> analysis;
  std::optional<MassDiagnostics> mass;

  const BandAnalysis& band_analysis() {
    if (!analysis) analysis = analyze_band(make_analysis_config(cfg, opts.threads));
    return *analysis;
  }

  int q0() const { return cfg.q_list.front(); }
  int eps_nx() const { return cfg.points_per_cell * q0(); }
  int homog_nx() const { return cfg.homog_nx > 0 ? cfg.homog_nx : eps_nx(); }
};

void stage_bands(StageContext& ctx) {
  const auto p = make_cell_problem(ctx.cfg);
  const auto b = compute_band_structure(p, uniform_theta_grid(ctx.cfg.theta_points),
                                        std::min(ctx.cfg.n_bands, p.dimension()), false, ctx.opts.threads);
  json lam = json::array();
  for (const auto& row : b.bands) lam.push_back(row);
  int degenerate = 0;
  for (const auto& row : b.degenerate) degenerate += static_cast<int>(std::count(row.begin(), row.end(), true));
  ctx.report["bands"] = {{"theta", b.theta_grid}, {"lambda", lam}, {"degenerate_points", degenerate}};
  ctx.out.bands_csv = bands_csv(b);

  PlotSpec spec{"Bloch bands", "theta", "lambda", false, false, {}};
  for (int n = 1; n <= b.band_count(); ++n) {
    PlotSeries s{fmt::format("band {}", n), b.theta_grid, {}, false};
    for (const auto& row : b.bands) s.y.push_back(row[static_cast<std::size_t>(n - 1)]);
    spec.series.push_back(std::move(s));
  }
  if (auto svg = render_svg(spec)) {
    ctx.out.svgs.emplace_back("bands.svg", *svg);
  } else {
    ctx.out.notices.push_back("bands.svg skipped: no finite band values");
  }
}

void stage_critical(StageContext& ctx) {
  const auto& ba = ctx.band_analysis();
  json cands = json::array();
  for (const auto& c : ba.candidates) cands.push_back(critical_json(c));
  ctx.report["critical"] = {{"selected", critical_json(ba.critical)}, {"candidates", cands}};
}

void stage_correctors(StageContext& ctx) {
  const auto& ba = ctx.band_analysis();
  const auto& cs = ba.correctors;
  const auto p = make_cell_problem(ctx.cfg);
  const double h1 = ctx.cfg.fd_step;
  const double e1 = zeta_identity_error(p, cs, h1);
  const double e2 = zeta_identity_error(p, cs, h1 / 2);
  ctx.report["correctors"] = {{"n", cs.n},
                              {"theta", cs.theta},
                              {"lambda", cs.lambda},
                              {"gap", cs.gap},
                              {"compat_residual_zeta", cs.compat_residual_zeta},
                              {"residual_zeta", cs.residual_zeta},
                              {"compat_residual_chi", cs.compat_residual_chi},
                              {"residual_chi", cs.residual_chi},
                              {"orthogonality_zeta", cs.orthogonality_zeta},
                              {"orthogonality_chi", cs.orthogonality_chi},
                              {"lambda_pp_compat", cs.lambda_pp_compat},
                              {"sigma_star_formula", cs.sigma_star_formula},
                              {"sigma_star_imag", cs.sigma_star_imag},
                              {"ill_conditioned", cs.ill_conditioned},
                              {"zeta_identity",
                               {{"h", json::array({h1, h1 / 2})},
                                {"error", json::array({e1, e2})},
                                {"ratio", e2 > 0.0 ? e1 / e2 : 0.0}}},
                              {"psi", complex_array(cs.psi)},
                              {"zeta", complex_array(cs.zeta)},
                              {"chi", complex_array(cs.chi)}};
}

EffectiveModel model_for(StageContext& ctx, int nx) {
  const auto& ba = ctx.band_analysis();
  const auto a = make_analysis_config(ctx.cfg, ctx.opts.threads);
  return effective_model_on_grid(ba, make_potential(ctx.cfg), make_noise_profile(ctx.cfg), ctx.cfg.noise,
                                 uniform_x_grid(ctx.cfg.length, nx), a.effective);
}

void stage_effective(StageContext& ctx) {
  const auto m = model_for(ctx, ctx.homog_nx());
  const auto [dmin, dmax] = std::minmax_element(m.d_star.begin(), m.d_star.end());
  ctx.report["effective"] = {{"n", m.n},
                             {"theta", m.theta},
                             {"lambda", m.lambda},
                             {"sigma_star", m.sigma_star},
                             {"sigma_star_positive", m.sigma_star_positive},
                             {"lambda_pp_compat", m.lambda_pp_compat},
                             {"lambda_pp_fd", m.lambda_pp_fd},
                             {"sigma_star_from_compat", m.lambda_pp_compat / (8.0 * kPi * kPi)},
                             {"sigma_star_from_fd", m.lambda_pp_fd / (8.0 * kPi * kPi)},
                             {"g_star", m.g_star},
                             {"noise", to_string(m.noise_kind)},
                             {"d_star_nodes", m.d_star.size()},
                             {"d_star_min", *dmin},
                             {"d_star_max", *dmax}};
}

void stage_simulate_eps(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& ba = ctx.band_analysis();
  EpsProblem p;
  p.length = cfg.length;
  p.T = cfg.T;
  p.q = ctx.q0();
  p.cell = make_cell_problem(cfg);
  p.d = make_potential(cfg);
  p.noise = cfg.noise;
  p.noise_profile = make_noise_profile(cfg);
  p.theta_n = ba.critical.theta;
  p.lambda_n = ba.critical.lambda;
  p.nx = ctx.eps_nx();
  p.dt = cfg.dt;
  p.lab_frame = cfg.lab_frame;
  const auto x = uniform_x_grid(cfg.length, p.nx);
  CVector v0 = well_prepared_initial(ba.correctors.psi, cfg.initial, p.q, x);
  if (p.lab_frame) v0 = modulate(v0, x, 0.0, p.epsilon(), p.theta_n, p.lambda_n);
  const auto path = sample_wiener_path(cfg.T, cfg.dt, cfg.seed, 0);
  IntegrationOptions io;
  io.output_times = with_origin(output_instants(cfg.T, cfg.output_instants));
  auto tr = integrate_eps(p, path, v0, io);
  const auto md = mass_diagnostics(tr);
  if (p.lab_frame) {
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
      tr.states[k] = demodulate(tr.states[k], x, tr.times[k], p.epsilon(), p.theta_n, p.lambda_n);
    }
  }
  json j = mass_json(md, tr);
  j["epsilon"] = p.epsilon();
  j["nx"] = p.nx;
  j["dt"] = p.dt;
  j["frame"] = p.lab_frame ? "lab (demodulated for output)" : "demodulated";
  j["seed"] = cfg.seed;
  ctx.report["simulate_eps"] = j;
  ctx.out.trajectory_csv = trajectory_csv(tr);
  ctx.out.mass_csv = mass_csv(md);
  ctx.mass = md;
}

void stage_simulate_homog(StageContext& ctx) {
  const auto& cfg = ctx.cfg;
  const int nx = ctx.homog_nx();
  const auto m = model_for(ctx, nx);
  const auto x = uniform_x_grid(cfg.length, nx);
  CVector v0(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) v0[j] = cfg.initial(x[j]);
  v0.front() = 0.0;
  v0.back() = 0.0;
  const auto path = sample_wiener_path(cfg.T, cfg.dt, cfg.seed, 0);
  IntegrationOptions io;
  io.output_times = with_origin(output_instants(cfg.T, cfg.output_instants));
  const auto tr = integrate_homogenized(m, path, v0, HomogenizedProblem{cfg.length, nx, cfg.dt}, io);
  const auto md = mass_diagnostics(tr);
  json j = mass_json(md, tr);
  j["nx"] = nx;
  j["dt"] = cfg.dt;
  j["sigma_star"] = m.sigma_star;
  j["g_star"] = m.g_star;
  j["seed"] = cfg.seed;
  ctx.report["simulate_homog"] = j;
  ctx.out.trajectory_homog_csv = trajectory_csv(tr);
  if (!ctx.mass) {
    ctx.out.mass_csv = mass_csv(md);
    ctx.mass = md;
  }
}

void stage_converge(StageContext& ctx) {
  const auto rep = convergence_sweep(make_sweep_config(ctx.cfg, ctx.opts.threads));
  if (!ctx.analysis) ctx.analysis = rep.analysis;
  json per = json::array();
  for (const auto& e : rep.per_eps) {
    const cplx pf = e.pairing_mean.empty() ? cplx{} : e.pairing_mean.back();
    const cplx pl = e.pairing_limit_mean.empty() ? cplx{} : e.pairing_limit_mean.back();
    per.push_back({{"epsilon", e.epsilon},
                   {"q", e.q},
                   {"nx", e.nx},
                   {"homog_nx", e.homog_nx},
                   {"replicas_requested", e.replicas_requested},
                   {"replicas_completed", e.replicas_completed},
                   {"failures", e.failures},
                   {"sup_err_mean", e.sup_mean},
                   {"sup_err_stderr", e.sup_stderr},
                   {"pairing_final", json::array({pf.real(), pf.imag()})},
                   {"pairing_limit_final", json::array({pl.real(), pl.imag()})},
                   {"pairing_stderr", e.pairing_stderr},
                   {"max_step_drift", e.max_step_drift},
                   {"initial_mass", e.initial_mass}});
  }
  ctx.report["convergence"] = {{"theta", rep.analysis.critical.theta},
                               {"lambda", rep.analysis.critical.lambda},
                               {"sigma_star", rep.sigma_star},
                               {"g_star", rep.g_star},
                               {"noise", to_string(rep.noise)},
                               {"replicas", ctx.cfg.replicas},
                               {"seed", ctx.cfg.seed},
                               {"lifting_error", rep.lifting_error},
                               {"partial", rep.partial},
                               {"monotone", rep.monotone},
                               {"verdict", rep.verdict},
                               {"per_epsilon", per}};
  ctx.out.errors_csv = errors_csv(rep);
  ctx.out.sweep_csv = sweep_csv(rep);

  PlotSpec err{"Factorization error against epsilon", "epsilon", "mean sup_t error", true, true, {}};
  PlotSeries s{"sup_t error (mean)", {}, {}, true};
  for (const auto& e : rep.per_eps) {
    s.x.push_back(e.epsilon);
    s.y.push_back(e.sup_mean);
  }
  err.series.push_back(std::move(s));
  if (auto svg = render_svg(err)) {
    ctx.out.svgs.emplace_back("errors.svg", *svg);
  } else {
    ctx.out.notices.push_back("errors.svg skipped: no positive error values");
  }

  if (!ctx.mass) {
    PlotSpec ms{"Mass-law residual (replica mean)", "t", "relative residual", false, false, {}};
    for (const auto& e : rep.per_eps) {
      ms.series.push_back({fmt::format("eps = 1/{}", e.q), e.t, e.mass_resid_mean, false});
    }
    if (auto svg = render_svg(ms)) ctx.out.svgs.emplace_back("mass.svg", *svg);
  }
}

}  // namespace

RunOutput run_command(const std::string& command, const RunConfig& cfg_in, const CliOptions& opts) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    throw InputError(fmt::format("unknown command '{}'", command));
  }
  RunConfig cfg = cfg_in;
  if (opts.seed) cfg.seed = *opts.seed;

  RunOutput out;
  json report;
  report["tool_version"] = tool_version();
  report["command"] = command;
  report["scenario"] = cfg.scenario;
  report["config_hash"] = config_hash(cfg);
  report["seed"] = cfg.seed;
  report["config"] = config_json(cfg);

  StageContext ctx{cfg, opts, out, report, std::nullopt, std::nullopt};
  const std::vector<std::string> stages =
      command == "all" ? std::vector<std::string>(names.begin(), names.end() - 1) : std::vector<std::string>{command};
  for (const auto& st : stages) {
    if (st == "bands") stage_bands(ctx);
    if (st == "critical") stage_critical(ctx);
    if (st == "correctors") stage_correctors(ctx);
    if (st == "effective") stage_effective(ctx);
    if (st == "simulate-eps") stage_simulate_eps(ctx);
    if (st == "simulate-homog") stage_simulate_homog(ctx);
    if (st == "converge") stage_converge(ctx);
  }

  if (ctx.mass) {
    PlotSpec ms{"Mass-law residual", "t", "relative residual", false, false, {}};
    ms.series.push_back({"residual", ctx.mass->t, ctx.mass->residual, false});
    if (auto svg = render_svg(ms)) out.svgs.emplace_back("mass.svg", *svg);
  }
  if (out.bands_csv.empty()) out.bands_csv = bands_header(cfg.n_bands);
  if (out.errors_csv.empty()) out.errors_csv = kErrorsHeader;
  if (out.mass_csv.empty()) out.mass_csv = kMassHeader;
  for (const char* name : {"bands.svg", "errors.svg", "mass.svg"}) {
    const bool have = std::any_of(out.svgs.begin(), out.svgs.end(), [&](const auto& s) { return s.first == name; });
    const bool noted = std::any_of(out.notices.begin(), out.notices.end(),
                                   [&](const auto& n) { return n.rfind(name, 0) == 0; });
    if (!have && !noted) out.notices.push_back(fmt::format("{} skipped: no series for command '{}'", name, command));
  }
  report["notices"] = out.notices;
  out.report_json = report.dump(2) + "\n";
  return out;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(fmt::format("cannot open '{}' for writing", p.string()));
  f << content;
  f.close();
  if (!f) throw std::runtime_error(fmt::format("write to '{}' failed", p.string()));
}

}  // namespace

void write_report(const RunOutput& out, const RunConfig& cfg, const std::filesystem::path& dir,
                  const std::string& started_at, double wall_seconds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& content) {
    write_file(dir / name, content);
    files.push_back(name);
  };
  put("report.json", out.report_json);
  put("bands.csv", out.bands_csv);
  put("errors.csv", out.errors_csv);
  put("mass.csv", out.mass_csv);
  if (!out.sweep_csv.empty()) put("sweep.csv", out.sweep_csv);
  if (!out.trajectory_csv.empty()) put("trajectory.csv", out.trajectory_csv);
  if (!out.trajectory_homog_csv.empty()) put("trajectory_homog.csv", out.trajectory_homog_csv);
  for (const auto& [name, svg] : out.svgs) put(name, svg);

  json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["tool_version"] = tool_version();
  manifest["started_at"] = started_at;
  manifest["wall_seconds"] = wall_seconds;
  manifest["files"] = files;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace blochhom
