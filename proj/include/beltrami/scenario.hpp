#pragma once

// JSON scenarios: an ordered list of stages (generate, solve, extract,
// evolve-chart, pullback, evolve-constrained, diagnose). Every stage writes its
// artifacts into the scenario directory; a manifest records the resolved
// parameters of each stage (defaults included), every tolerance, grid sizes and
// random draws. Given the same file and seed the output bytes are identical.

#include <Eigen/Core>
#include <boost/version.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beltrami/field_io.hpp"
#include "beltrami/generators.hpp"
#include "beltrami/levelset.hpp"
#include "beltrami/pullback.hpp"
#include "beltrami/report.hpp"
#include "beltrami/residuals.hpp"
#include "beltrami/rigidity.hpp"
#include "beltrami/vortex_solvers.hpp"

namespace beltrami {

inline constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

/// Counted splittable generator. A child stream is keyed by its path of split
/// labels below the root seed, so stages draw independent streams whatever
/// order they run in.
class ScenarioRng {
 public:
  explicit ScenarioRng(std::uint64_t seed, std::vector<std::uint32_t> path = {}) : seed_(seed), path_(std::move(path)) {
    std::vector<std::uint32_t> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    key.insert(key.end(), path_.begin(), path_.end());
    std::seed_seq seq(key.begin(), key.end());
    gen_.seed(seq);
  }

  [[nodiscard]] ScenarioRng split(std::uint32_t label) const {
    auto p = path_;
    p.push_back(label);
    return ScenarioRng(seed_, std::move(p));
  }

  double uniform() {
    ++draws_;
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  [[nodiscard]] std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t seed_;
  std::vector<std::uint32_t> path_;
  std::mt19937_64 gen_;
  std::uint64_t draws_ = 0;
};

/// Sum of a few random sin(k1 a + k2 b + phase) terms, wavenumbers 0..2.
struct TrigSum {
  struct Term {
    double amp, k1, k2, phase;
  };
  std::vector<Term> terms;

  static TrigSum random(ScenarioRng& rng, int n) {
    TrigSum p;
    for (int i = 0; i < n; ++i)
      p.terms.push_back({rng.uniform(-1, 1), std::floor(rng.uniform(0, 3)), std::floor(rng.uniform(0, 3)),
                         rng.uniform(0, 2 * std::numbers::pi)});
    return p;
  }
  double operator()(double a, double b) const {
    double s = 0;
    for (const auto& t : terms) s += t.amp * std::sin(t.k1 * a + t.k2 * b + t.phase);
    return s;
  }
};

/// Failed diagnostic thresholds; maps to CLI exit code 3.
struct ThresholdViolation {
  std::string stage, what;
};

struct RunResult {
  int exit_code = 0;
  std::string message;
  std::filesystem::path dir;
  std::vector<ThresholdViolation> violations;
  json manifest;
};

namespace detail {

// Reads stage keys, records the resolved value of every key (defaults too) and
// rejects keys that were never read.
class Params {
 public:
  Params(const json& stage, std::string id) : j_(stage), id_(std::move(id)) {
    used_ = {"id", "op"};
    resolved = json::object();
    tolerances = json::object();
  }

  [[nodiscard]] bool has(const std::string& k) const { return j_.contains(k); }

  template <class T>
  T get(const std::string& k, T def, bool tolerance = false) {
    T v = has(k) ? convert<T>(k) : def;
    record(k, v, tolerance);
    return v;
  }

  template <class T>
  T need(const std::string& k, bool tolerance = false) {
    if (!has(k)) throw PreconditionError("stage '" + id_ + "': missing key '" + k + "'");
    T v = convert<T>(k);
    record(k, v, tolerance);
    return v;
  }

  std::size_t count(const std::string& k, std::size_t def) {
    const auto v = get<std::int64_t>(k, static_cast<std::int64_t>(def));
    if (v < 0) throw PreconditionError("stage '" + id_ + "': key '" + k + "' must be non-negative");
    return static_cast<std::size_t>(v);
  }

  json raw(const std::string& k, json def) {
    json v = has(k) ? j_.at(k) : std::move(def);
    used_.insert(k);
    resolved[k] = v;
    return v;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw PreconditionError("stage '" + id_ + "': unknown key '" + k + "'");
  }

  json resolved, tolerances;

 private:
  template <class T>
  T convert(const std::string& k) {
    const json& v = j_.at(k);
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw PreconditionError("stage '" + id_ + "': key '" + k + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (!v.is_number_integer()) throw PreconditionError("stage '" + id_ + "': key '" + k + "' must be an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw PreconditionError("stage '" + id_ + "': key '" + k + "' must be true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw PreconditionError("stage '" + id_ + "': key '" + k + "' must be a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw PreconditionError("stage '" + id_ + "': key '" + k + "': " + e.what());
    }
  }

  template <class T>
  void record(const std::string& k, const T& v, bool tolerance) {
    used_.insert(k);
    resolved[k] = v;
    if (tolerance) tolerances[k] = v;
  }

  const json& j_;
  std::string id_;
  std::set<std::string> used_;
};

inline const std::map<std::string, std::set<std::string>>& stage_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"generate", {"family", "A", "B", "C", "n", "profile", "r0", "r1", "step", "init", "nz", "half_width", "z0", "z1"}},
      {"solve",
       {"kind", "W", "gamma", "l", "kappa", "box", "h", "trivial", "core_center", "core_radius", "core_amplitude",
        "max_iter", "tol", "omega", "stagnation_window", "amplitude_rtol"}},
      {"extract", {"source", "level", "level_fraction", "samples", "eps", "projection_steps"}},
      {"evolve-chart", {"curves", "curve", "t0", "sweep_fraction", "steps", "tol_flow", "eps", "xi2"}},
      {"pullback", {"chart", "field", "n2", "z0", "z_period", "collapse", "tangency_tol", "resample_h"}},
      {"evolve-constrained", {"chart", "initial", "form", "value", "n2", "noise", "terms", "generic_metric", "tol", "max", "min", "equals"}},
      {"diagnose",
       {"check", "field", "form", "chart", "slice", "v2_equation", "case", "n", "C", "p_one", "r0",
        "second_t_derivative", "kind", "tau", "resample_h", "reports", "entry", "use_l2", "max", "min", "equals",
        "min_order"}},
  };
  return keys;
}

// Keys holding references to earlier stages.
inline const std::set<std::string>& ref_keys() {
  static const std::set<std::string> k{"source", "curves", "chart", "field", "form", "reports"};
  return k;
}

struct StageValue {
  std::string op;
  std::optional<BeltramiPair> pair;
  std::optional<VortexResult> vortex;
  std::vector<LevelCurve> curves;
  std::optional<ScalarChartField> level_source;
  std::optional<SurfaceChart> chart;
  std::optional<PullbackForm> form;
  std::optional<ConstrainedResult> constrained;
  std::optional<DiagnosticReport> report;
};

struct Context {
  std::filesystem::path dir;
  ScenarioRng rng{0};
  std::map<std::string, StageValue> values;
  std::vector<ThresholdViolation> violations;
};

inline const StageValue& lookup(const Context& ctx, Params& p, const std::string& key) {
  const auto id = p.need<std::string>(key);
  return ctx.values.at(id);  // existence and order checked before the run
}

inline const BeltramiPair& pair_of(const Context& ctx, Params& p, const std::string& key) {
  const auto& v = lookup(ctx, p, key);
  if (!v.pair) throw PreconditionError("'" + key + "' must reference a generate or solve stage");
  return *v.pair;
}

inline const SurfaceChart& chart_of(const Context& ctx, Params& p) {
  const auto& v = lookup(ctx, p, "chart");
  if (!v.chart) throw PreconditionError("'chart' must reference an evolve-chart stage");
  return *v.chart;
}

inline const PullbackForm& form_of(const Context& ctx, Params& p) {
  const auto& v = lookup(ctx, p, "form");
  if (v.form) return *v.form;
  if (v.constrained) return v.constrained->v;
  throw PreconditionError("'form' must reference a pullback or evolve-constrained stage");
}

inline RadialProfile profile_param(Params& p, const char* key, json def) { return profile_from_json(p.raw(key, std::move(def))); }

class Writer {
 public:
  Writer(std::filesystem::path dir, std::string id, json& artifacts) : dir_(std::move(dir)), id_(std::move(id)), artifacts_(artifacts) {}

  template <class F>
  void file(const std::string& suffix, F&& body) {
    const std::string name = id_ + "_" + suffix;
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw PreconditionError("cannot write '" + (dir_ / name).string() + "'");
    body(os);
    artifacts_.push_back(name);
  }

  void json_file(const std::string& suffix, const json& j) {
    file(suffix, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

 private:
  std::filesystem::path dir_;
  std::string id_;
  json& artifacts_;
};

inline void write_pair(Writer& w, const BeltramiPair& pair, json& grid) {
  const auto t = to_table(pair.u);
  grid = t.header;
  w.file("u.csv", [&](std::ostream& os) { write_table(os, t); });
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, RadialProfile>)
          w.json_file("f.json", to_json(f));
        else
          w.file("f.csv", [&](std::ostream& os) { write_table(os, to_table(f)); });
      },
      pair.f);
}

// ---------------------------------------------------------------------------
// Stage handlers.

inline StageValue run_generate(Params& p, Context&, Writer& w, json& grid) {
  const auto family = p.need<std::string>("family");
  StageValue out;
  if (family == "abc") {
    const double A = p.get("A", 1.0), B = p.get("B", 1.0), C = p.get("C", 1.0);
    const std::size_t n = p.count("n", 32);
    require(n >= 5, "abc grid needs n >= 5");
    const double L = 2 * std::numbers::pi;
    out.pair = abc_field(A, B, C, Grid3::spanning({0, 0, 0}, {L, L, L}, {n, n, n}));
  } else if (family == "radial") {
    const auto prof = profile_param(p, "profile", {{"shape", "constant"}, {"a", 1.0}});
    const double r0 = p.get("r0", 0.05), r1 = p.get("r1", 5.0), step = p.get("step", 1e-3);
    const auto init = p.get("init", std::vector<double>{1.0, 0.0});
    require(init.size() == 2, "init must be [u_theta, u_z]");
    out.pair = radial_beltrami(prof, r0, r1, step, {init[0], init[1]}, p.count("nz", 5));
  } else if (family == "rotated-harmonic") {
    // v0 = (x1, -x2) on [-w, w]^2, rotated by the primitive of f(z).
    const auto prof = profile_param(p, "profile", {{"shape", "linear"}, {"a", 0.0}, {"b", 1.0}});
    const std::size_t n = p.count("n", 33), nz = p.count("nz", 33);
    const double w = p.get("half_width", 1.0), z0 = p.get("z0", 0.0), z1 = p.get("z1", 1.0);
    require(n >= 3 && nz >= 3 && w > 0.0 && z1 > z0, "rotated-harmonic needs n, nz >= 3, half_width > 0, z1 > z0");
    const Grid2 g = Grid2::spanning(Chart::cartesian_xy, {-w, -w}, {w, w}, {n, n});
    const auto v1 = ScalarChartField::sample(g, [](double a, double) { return a; }, "v1");
    const auto v2 = ScalarChartField::sample(g, [](double, double b) { return -b; }, "v2");
    out.pair = rotated_harmonic_field(v1, v2, prof, Grid1{z0, (z1 - z0) / static_cast<double>(nz - 1), nz});
  } else {
    throw PreconditionError("unknown family '" + family + "' (abc, radial, rotated-harmonic)");
  }
  p.finish();
  write_pair(w, *out.pair, grid);
  return out;
}

inline StageValue run_solve(Params& p, Context&, Writer& w, json& grid) {
  FreeBoundaryProblem prob;
  prob.kind = vortex_from_string(p.get<std::string>("kind", "vortex-ring"));
  prob.W = p.get("W", 1.0);
  prob.gamma = p.get("gamma", 0.5);
  prob.l = p.get("l", 2.0);
  prob.kappa = p.get("kappa", 1.0);
  const double box = p.get("box", 4.0), h = p.get("h", 0.08);
  require(box > 0.0 && h > 0.0 && h < box, "solve needs 0 < h < box");
  const auto n = static_cast<std::size_t>(std::lround(box / h));
  const bool ring = prob.kind == VortexKind::ring;
  prob.grid = ring ? Grid2::meridional_half_plane(box, -box, box, n, 2 * n + 1)
                   : Grid2::spanning(Chart::cartesian_xy, {-box, 0.0}, {box, box}, {2 * n + 1, n + 1});
  prob.seed.trivial = p.get("trivial", false);
  const auto centre = p.get("core_center", ring ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0});
  require(centre.size() == 2, "core_center must have two coordinates");
  prob.seed.center = {centre[0], centre[1]};
  prob.seed.radius = p.get("core_radius", 1.0);
  prob.seed.amplitude = p.get("core_amplitude", 1.0);
  prob.solver.max_iter = p.count("max_iter", prob.solver.max_iter);
  prob.solver.tol = p.get("tol", prob.solver.tol, true);
  prob.solver.omega = p.get("omega", prob.solver.omega, true);
  prob.solver.stagnation_window = p.count("stagnation_window", prob.solver.stagnation_window);
  prob.amplitude_rtol = p.get("amplitude_rtol", prob.amplitude_rtol, true);
  p.finish();
  StageValue out;
  out.vortex = solve_free_boundary(prob);
  const auto field = field_from_vortex(out.vortex->psi, prob);
  out.pair = field.pair;
  w.file("psi.csv", [&](std::ostream& os) { write_table(os, to_table(out.vortex->psi)); });
  w.json_file("report.json", to_json(out.vortex->report));
  json ugrid;
  write_pair(w, *out.pair, ugrid);
  grid = detail::grid_header(prob.grid);
  return out;
}

inline StageValue run_extract(Params& p, Context& ctx, Writer& w, json& grid) {
  const auto& pair = pair_of(ctx, p, "source");
  if (!std::holds_alternative<ScalarChartField>(pair.f))
    throw PreconditionError("extract needs a factor sampled on a 2D chart");
  const auto& f = std::get<ScalarChartField>(pair.f);
  double level;
  if (p.has("level")) {
    level = p.need<double>("level");
  } else {
    const double frac = p.get("level_fraction", 0.4);
    require(frac > 0.0 && frac < 1.0, "level_fraction must lie in (0, 1)");
    level = frac * *std::max_element(f.values().begin(), f.values().end());
  }
  ExtractOptions opt;
  opt.samples = p.count("samples", 0);
  opt.eps = p.get("eps", opt.eps, true);
  opt.projection_steps = static_cast<int>(p.count("projection_steps", static_cast<std::size_t>(opt.projection_steps)));
  p.finish();
  StageValue out;
  out.curves = extract_level_curve(f, level, opt);
  out.level_source = f;
  w.file("curves.csv", [&](std::ostream& os) {
    os << "curve,xi1,a,b\n";
    for (std::size_t c = 0; c < out.curves.size(); ++c)
      for (std::size_t i = 0; i < out.curves[c].size(); ++i)
        os << c << ',' << format_double(out.curves[c].xi1[i]) << ',' << format_double(out.curves[c].points[i][0]) << ','
           << format_double(out.curves[c].points[i][1]) << '\n';
  });
  grid = {{"level", level}, {"curves", out.curves.size()}};
  return out;
}

inline StageValue run_evolve_chart(Params& p, Context& ctx, Writer& w, json& grid) {
  const auto& src = lookup(ctx, p, "curves");
  if (src.op != "extract") throw PreconditionError("'curves' must reference an extract stage");
  const std::size_t c = p.count("curve", 0);
  if (c >= src.curves.size())
    throw PreconditionError("curve index " + std::to_string(c) + " out of range (" + std::to_string(src.curves.size()) + " curves)");
  const auto& f = *src.level_source;
  double t0;
  if (p.has("t0")) {
    t0 = p.need<double>("t0");
  } else {
    const double frac = p.get("sweep_fraction", 0.3);
    t0 = frac * *std::max_element(f.values().begin(), f.values().end());
  }
  const std::size_t steps = p.count("steps", 100);
  EvolveOptions opt;
  opt.tol_flow = p.get("tol_flow", opt.tol_flow, true);
  opt.eps = p.get("eps", opt.eps, true);
  const auto xi2 = p.get("xi2", std::vector<double>{});
  p.finish();
  StageValue out;
  out.chart = chart_coefficients(evolve_chart(src.curves[c], LevelFunction::from_field(f), t0, steps, xi2, opt), opt.eps);
  w.file("chart.csv", [&](std::ostream& os) { write_chart_csv(os, *out.chart); });
  w.json_file("chart.json", chart_metadata(*out.chart));
  grid = {{"n1", out.chart->n1()}, {"nt", out.chart->nt()}, {"ns", out.chart->ns()}};
  return out;
}

inline StageValue run_pullback(Params& p, Context& ctx, Writer& w, json& grid) {
  const auto& ch = chart_of(ctx, p);
  const auto& pair = pair_of(ctx, p, "field");
  PullbackOptions opt;
  opt.n2 = p.count("n2", opt.n2);
  opt.z0 = p.get("z0", opt.z0);
  opt.z_period = p.get("z_period", opt.z_period);
  opt.collapse = p.get("collapse", opt.collapse);
  opt.tangency_tol = p.get("tangency_tol", opt.tangency_tol, true);
  const double rh = p.get("resample_h", 0.0);
  p.finish();
  StageValue out;
  if (rh > 0.0) {
    // Cartesian resampling of the field around the chart.
    double R = 0.0, Z = 0.0;
    for (const auto& q : ch.phi) {
      R = std::max(R, std::abs(q[0]));
      Z = std::max(Z, std::abs(q[1]));
    }
    R += 3 * rh;
    Z += 3 * rh;
    const auto m = static_cast<std::size_t>(std::lround(2 * R / rh)) + 1;
    const auto mz = static_cast<std::size_t>(std::lround(2 * Z / rh)) + 1;
    const auto g3 = Grid3::spanning({-R, -R, -Z}, {R, R, Z}, {m, m, mz});
    out.form = pullback_form(SymmetricVectorField{resample(pair.u, g3)}, ch, opt);
    grid["resample"] = detail::grid_header(g3);
  } else {
    out.form = pullback_form(pair.u, ch, opt);
  }
  w.file("form.csv", [&](std::ostream& os) { write_form_csv(os, *out.form); });
  w.json_file("form.json", form_metadata(*out.form));
  grid["form"] = form_metadata(*out.form);
  return out;
}

inline std::optional<double> report_value(const DiagnosticReport& r, const std::string& key) {
  if (r.has(key)) return r.at(key).norm_inf;
  const auto it = r.metadata.find(key);
  if (it != r.metadata.end() && it->second.is_number()) return it->second.get<double>();
  return std::nullopt;
}

inline void check_thresholds(Params& p, const DiagnosticReport& r, const std::string& id, Context& ctx) {
  auto compare = [&](const char* key, auto ok, const char* rel) {
    const json lim = p.raw(key, json::object());
    if (!lim.is_object()) throw PreconditionError("stage '" + id + "': '" + std::string(key) + "' must be an object");
    for (const auto& [name, v] : lim.items()) {
      if (!v.is_number()) throw PreconditionError("stage '" + id + "': threshold for '" + name + "' must be a number");
      const auto val = report_value(r, name);
      if (!val) throw PreconditionError("stage '" + id + "': report has no entry '" + name + "'");
      p.tolerances[std::string(key) + "." + name] = v;
      if (!ok(*val, v.template get<double>()))
        ctx.violations.push_back({id, name + " = " + format_double(*val) + " (" + rel + " " + format_double(v.template get<double>()) + ")"});
    }
  };
  compare("max", [](double a, double b) { return a <= b; }, "required <=");
  compare("min", [](double a, double b) { return a >= b; }, "required >=");
  compare("equals", [](double a, double b) { return a == b; }, "required ==");
}

inline StageValue run_evolve_constrained(Params& p, Context& ctx, Writer& w, json& grid, ScenarioRng rng,
                                         const std::string& id) {
  const auto& ch = chart_of(ctx, p);
  const auto initial = p.get<std::string>("initial", "constant");
  const auto periodic_xi2 = [&](std::size_t n2) {
    std::vector<double> xi2(n2);
    for (std::size_t j = 0; j < n2; ++j) xi2[j] = 2 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n2);
    return xi2;
  };
  PullbackForm v0;
  if (initial == "form") {
    const auto& src = form_of(ctx, p);
    v0 = blank_form(ch, src.xi2, src.periodic2, src.period2, 1);
    v0.collapsed = src.collapsed;
    std::copy_n(src.beta1.begin(), v0.slice_size(), v0.beta1.begin());
    std::copy_n(src.beta2.begin(), v0.slice_size(), v0.beta2.begin());
  } else if (initial == "constant" || initial == "gradient-noise") {
    const std::size_t n2 = p.count("n2", ch.n1());
    require(n2 >= 3, "n2 must be at least 3");
    v0 = blank_form(ch, periodic_xi2(n2), true, 2 * std::numbers::pi, 1);
    v0.collapsed = false;
    if (initial == "constant") {
      const auto c = p.get("value", std::vector<double>{0.8, -0.3});
      require(c.size() == 2, "value must be [beta1, beta2]");
      for (std::size_t n = 0; n < v0.slice_size(); ++n) {
        v0.beta1[n] = c[0];
        v0.beta2[n] = c[1];
      }
    } else {
      // Discrete gradient of a random trigonometric sum (constraint exactly zero) plus random noise.
      const double noise = p.get("noise", 1e-3);
      const int terms = static_cast<int>(p.count("terms", 4));
      const auto phi = TrigSum::random(rng, terms), w1 = TrigSum::random(rng, terms), w2 = TrigSum::random(rng, terms);
      const std::size_t n1 = v0.n1();
      std::vector<double> ph(n1 * n2);
      for (std::size_t j = 0; j < n2; ++j)
        for (std::size_t i = 0; i < n1; ++i) ph[j * n1 + i] = phi(v0.xi1[i], v0.xi2[j]);
      const auto d1 = slice_diff(ph, n1, n2, 0, v0.h1(), ch.closed), d2 = slice_diff(ph, n1, n2, 1, v0.h2(), true);
      for (std::size_t j = 0; j < n2; ++j)
        for (std::size_t i = 0; i < n1; ++i) {
          v0.beta1[j * n1 + i] = d1[j * n1 + i] + noise * w1(v0.xi1[i], v0.xi2[j]);
          v0.beta2[j * n1 + i] = d2[j * n1 + i] + noise * w2(v0.xi1[i], v0.xi2[j]);
        }
    }
  } else {
    throw PreconditionError("unknown initial data '" + initial + "' (constant, gradient-noise, form)");
  }
  ConstrainedOptions opt;
  opt.generic_metric = p.get("generic_metric", opt.generic_metric);
  opt.tol = p.get("tol", opt.tol, true);
  StageValue out;
  out.constrained = evolve_constrained(v0, ch, opt);
  check_thresholds(p, out.constrained->report, id, ctx);
  p.finish();
  w.file("form.csv", [&](std::ostream& os) { write_form_csv(os, out.constrained->v); });
  w.file("history.csv", [&](std::ostream& os) { write_history_csv(os, *out.constrained); });
  w.json_file("report.json", to_json(out.constrained->report));
  grid["form"] = form_metadata(out.constrained->v);
  grid["rng_draws"] = rng.draws();
  return out;
}

inline StageValue run_diagnose(Params& p, Context& ctx, Writer& w, json& grid, const std::string& id) {
  const auto check = p.need<std::string>("check");
  DiagnosticReport r;
  std::optional<CompatibilityResult> compat;
  if (check == "beltrami-residual" || check == "first-integral" || check == "elliptic-identity") {
    const auto& pair = pair_of(ctx, p, "field");
    r = check == "beltrami-residual" ? beltrami_residual(pair.u, pair.f)
        : check == "first-integral"  ? first_integral_defect(pair.u, pair.f)
                                     : elliptic_identity_residual(pair.u, pair.f);
  } else if (check == "constancy") {
    r = constancy_diagnostic(form_of(ctx, p));
  } else if (check == "elliptic" || check == "energy" || check == "system") {
    const auto& f = form_of(ctx, p);
    const auto& ch = chart_of(ctx, p);
    if (check == "elliptic") {
      const std::size_t k = p.count("slice", ch.nt() / 2);
      r = elliptic_residuals(f, ch, k, p.get("v2_equation", true));
    } else if (check == "energy") {
      std::vector<double> e(f.nt());
      for (std::size_t k = 0; k < f.nt(); ++k) e[k] = dirichlet_energy(f, ch, k);
      r.add("dirichlet_energy", e, f.h1());
      r.metadata["per_t"] = e;
    } else {
      r = system_residuals(f, ch);
    }
  } else if (check == "round-trip") {
    const auto& pair = pair_of(ctx, p, "field");
    r = round_trip_error(pair.u, form_of(ctx, p), chart_of(ctx, p));
  } else if (check == "compatibility") {
    CompatibilityOptions opt;
    const auto c = compatibility_from_string(p.get<std::string>("case", "f(r)"));
    opt.n = p.count("n", opt.n);
    opt.C = p.get("C", opt.C, true);
    opt.p_one = p.get("p_one", opt.p_one);
    opt.r0 = p.get("r0", opt.r0);
    opt.second_t_derivative = p.get("second_t_derivative", opt.second_t_derivative);
    compat = compatibility_rank(c, opt);
    r.add("sigma_min", Norms{compat->sigma.front(), compat->sigma.front()}, compat->h);
    const double gap = compat->nullity < compat->sigma.size() ? compat->sigma[compat->nullity] : 0.0;
    r.add("sigma_above_threshold", Norms{gap, gap}, compat->h);
    r.metadata["nullity"] = compat->nullity;
    r.metadata["threshold"] = compat->threshold;
    r.metadata["rows"] = compat->rows;
    r.metadata["cols"] = compat->cols;
    r.metadata["case"] = std::string(to_string(c));
    grid = {{"n", opt.n}, {"rows", compat->rows}, {"cols", compat->cols}};
  } else if (check == "symmetry-defect") {
    const auto& pair = pair_of(ctx, p, "field");
    const auto kind = defect_from_string(p.get<std::string>("kind", "translation"));
    const double tau = p.need<double>("tau");
    GridVectorField u;
    if (std::holds_alternative<GridVectorField>(pair.u)) {
      u = std::get<GridVectorField>(pair.u);
    } else {
      throw PreconditionError("symmetry-defect needs a field sampled on a 3D grid");
    }
    r = defect_report(symmetry_defect(u, kind, tau), u.grid.spacing[0]);
  } else if (check == "order") {
    const auto ids = p.need<std::vector<std::string>>("reports");
    if (ids.size() != 2) throw PreconditionError("order needs two reports: [coarse, fine]");
    const auto entry = p.need<std::string>("entry");
    const bool l2 = p.get("use_l2", false);
    std::vector<const DiagnosticReport*> rs;
    for (const auto& s : ids) {
      const auto& v = ctx.values.at(s);
      if (!v.report) throw PreconditionError("'reports' must reference diagnose stages");
      rs.push_back(&*v.report);
    }
    const auto& a = rs[0]->at(entry);
    const auto& b = rs[1]->at(entry);
    const double ord = observed_order(a, b, l2);
    if (!std::isfinite(ord)) throw NumericalError("observed order of '" + entry + "' is not finite");
    r.metadata["order"] = ord;
    r.metadata["entry"] = entry;
    r.metadata["coarse"] = {{"h", a.grid_spacing}, {"error", l2 ? a.norm_l2 : a.norm_inf}};
    r.metadata["fine"] = {{"h", b.grid_spacing}, {"error", l2 ? b.norm_l2 : b.norm_inf}};
    const double min_order = p.get("min_order", 0.0, true);
    if (ord < min_order)
      ctx.violations.push_back({id, "order of " + entry + " = " + format_double(ord) + " (required >= " + format_double(min_order) + ")"});
  } else {
    throw PreconditionError("unknown check '" + check +
                            "' (beltrami-residual, first-integral, elliptic-identity, constancy, elliptic, energy, "
                            "system, round-trip, compatibility, symmetry-defect, order)");
  }
  check_thresholds(p, r, id, ctx);
  p.finish();
  w.json_file("report.json", to_json(r));
  if (compat) w.file("spectrum.csv", [&](std::ostream& os) { write_spectrum_csv(os, *compat); });
  StageValue out;
  out.report = std::move(r);
  return out;
}

inline json versions() {
  return {{"beltrami", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

}  // namespace detail

/// Structural checks before anything runs: known keys, unique ids, and stage
/// references that point at earlier stages only.
inline void validate_scenario(const json& s) {
  using detail::require;
  require(s.is_object(), "scenario must be a JSON object");
  static const std::set<std::string> top{"name", "description", "seed", "io", "stages"};
  for (const auto& [k, v] : s.items()) require(top.count(k) > 0, "unknown scenario key '" + k + "'");
  require(s.contains("name") && s.at("name").is_string(), "scenario needs a string 'name'");
  static const std::regex safe("[A-Za-z0-9_.-]+");
  require(std::regex_match(s.at("name").get<std::string>(), safe), "scenario name may use letters, digits, '_', '-', '.'");
  if (s.contains("seed")) require(s.at("seed").is_number_unsigned(), "'seed' must be a non-negative integer");
  if (s.contains("io")) {
    const auto& io = s.at("io");
    require(io.is_object(), "'io' must be an object");
    for (const auto& [k, v] : io.items()) require(k == "dir", "unknown io key '" + k + "'");
    if (io.contains("dir"))
      require(io.at("dir").is_string() && std::regex_match(io.at("dir").get<std::string>(), safe),
              "io.dir must be a plain directory name");
  }
  require(s.contains("stages") && s.at("stages").is_array() && !s.at("stages").empty(), "scenario needs a non-empty 'stages' list");
  std::map<std::string, std::size_t> position;
  const auto& stages = s.at("stages");
  for (std::size_t n = 0; n < stages.size(); ++n) {
    const auto& st = stages[n];
    require(st.is_object(), "stage " + std::to_string(n) + " must be an object");
    require(st.contains("id") && st.at("id").is_string(), "stage " + std::to_string(n) + " needs a string 'id'");
    const auto id = st.at("id").get<std::string>();
    require(std::regex_match(id, safe), "stage id '" + id + "' may use letters, digits, '_', '-', '.'");
    require(!position.count(id), "duplicate stage id '" + id + "'");
    position[id] = n;
  }
  for (std::size_t n = 0; n < stages.size(); ++n) {
    const auto& st = stages[n];
    const auto id = st.at("id").get<std::string>();
    require(st.contains("op") && st.at("op").is_string(), "stage '" + id + "' needs a string 'op'");
    const auto op = st.at("op").get<std::string>();
    const auto& keys = detail::stage_keys();
    const auto it = keys.find(op);
    require(it != keys.end(), "stage '" + id + "': unknown op '" + op + "'");
    for (const auto& [k, v] : st.items()) {
      if (k == "id" || k == "op") continue;
      require(it->second.count(k) > 0, "stage '" + id + "': unknown key '" + k + "'");
      if (!detail::ref_keys().count(k)) continue;
      std::vector<std::string> refs;
      if (v.is_string()) {
        refs.push_back(v.get<std::string>());
      } else if (v.is_array()) {
        for (const auto& x : v) {
          require(x.is_string(), "stage '" + id + "': '" + k + "' must list stage ids");
          refs.push_back(x.get<std::string>());
        }
      } else {
        throw PreconditionError("stage '" + id + "': '" + k + "' must name a stage");
      }
      for (const auto& r : refs) {
        const auto p = position.find(r);
        require(p != position.end(), "stage '" + id + "' references unknown stage '" + r + "'");
        require(p->second < n, "stage '" + id + "' references '" + r + "', which does not run before it (cyclic or forward reference)");
      }
    }
  }
}

inline std::filesystem::path output_root(const std::optional<std::filesystem::path>& override_root = std::nullopt) {
  if (override_root) return *override_root;
  if (const char* env = std::getenv("BELTRAMI_OUT"); env && *env) return env;
  return "beltrami_out";
}

/// Runs a parsed scenario. Exit codes: 0 success, 1 validation error, 2
/// numerical failure, 3 diagnostic thresholds violated.
inline RunResult run_scenario(const json& s, const std::filesystem::path& root) {
  RunResult res;
  try {
    validate_scenario(s);
  } catch (const PreconditionError& e) {
    res.exit_code = 1;
    res.message = e.what();
    return res;
  }
  const auto name = s.at("name").get<std::string>();
  const std::uint64_t seed = s.value("seed", std::uint64_t{0});
  res.dir = root / (s.contains("io") && s.at("io").contains("dir") ? s.at("io").at("dir").get<std::string>() : name);
  std::filesystem::create_directories(res.dir);

  detail::Context ctx;
  ctx.dir = res.dir;
  ctx.rng = ScenarioRng(seed);
  json manifest{{"scenario", name}, {"seed", seed}, {"versions", detail::versions()}, {"stages", json::array()}};
  if (s.contains("description")) manifest["description"] = s.at("description");
  json tolerances = json::object();

  const auto& stages = s.at("stages");
  for (std::size_t n = 0; n < stages.size(); ++n) {
    const auto& st = stages[n];
    const auto id = st.at("id").get<std::string>();
    const auto op = st.at("op").get<std::string>();
    detail::Params p(st, id);
    json artifacts = json::array(), grid = json::object();
    detail::Writer w(res.dir, id, artifacts);
    try {
      detail::StageValue v;
      if (op == "generate") v = detail::run_generate(p, ctx, w, grid);
      else if (op == "solve") v = detail::run_solve(p, ctx, w, grid);
      else if (op == "extract") v = detail::run_extract(p, ctx, w, grid);
      else if (op == "evolve-chart") v = detail::run_evolve_chart(p, ctx, w, grid);
      else if (op == "pullback") v = detail::run_pullback(p, ctx, w, grid);
      else if (op == "evolve-constrained") v = detail::run_evolve_constrained(p, ctx, w, grid, ctx.rng.split(static_cast<std::uint32_t>(n)), id);
      else v = detail::run_diagnose(p, ctx, w, grid, id);
      v.op = op;
      ctx.values.emplace(id, std::move(v));
    } catch (const PreconditionError& e) {
      res.exit_code = 1;
      res.message = "stage '" + id + "': " + e.what();
    } catch (const NumericalError& e) {
      res.exit_code = 2;
      res.message = "stage '" + id + "': " + e.what();
    }
    json entry{{"id", id}, {"op", op}, {"params", p.resolved}, {"artifacts", artifacts}, {"grid", grid}};
    manifest["stages"].push_back(entry);
    for (const auto& [k, v] : p.tolerances.items()) tolerances[id + "." + k] = v;
    if (res.exit_code != 0) break;
  }
  manifest["tolerances"] = tolerances;
  res.violations = ctx.violations;
  if (res.exit_code == 0 && !res.violations.empty()) {
    res.exit_code = 3;
    res.message = std::to_string(res.violations.size()) + " diagnostic threshold(s) violated";
  }
  manifest["status"] = res.exit_code == 0 ? "ok" : res.exit_code == 1 ? "validation-error" : res.exit_code == 2 ? "numerical-failure" : "threshold-violation";
  if (!res.message.empty()) manifest["message"] = res.message;
  json viol = json::array();
  for (const auto& v : res.violations) viol.push_back({{"stage", v.stage}, {"what", v.what}});
  manifest["violations"] = viol;
  std::ofstream os(res.dir / "manifest.json", std::ios::binary);
  os << manifest.dump(2) << '\n';
  res.manifest = std::move(manifest);
  return res;
}

inline RunResult run_scenario_file(const std::filesystem::path& file, const std::filesystem::path& root) {
  std::ifstream is(file);
  if (!is) return {1, "cannot open scenario '" + file.string() + "'", {}, {}, {}};
  json s;
  try {
    s = json::parse(is);
  } catch (const json::exception& e) {
    return {1, std::string("scenario is not valid JSON: ") + e.what(), {}, {}, {}};
  }
  return run_scenario(s, root);
}

}  // namespace beltrami
