#include "rh/app.hpp"

#include <algorithm>
#include <cinttypes>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rh/cell.hpp"
#include "rh/microstructure.hpp"
#include "rh/parallel.hpp"
#include "rh/permeability.hpp"
#include "rh/scattering.hpp"
#include "rh/spectrum.hpp"
#include "rh/svg.hpp"

namespace rh {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Field access with path-qualified diagnostics

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  require_object(j, path);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(join(path, key), "unknown field");
    }
  }
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

bool is_seed(const json& j) { return j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0); }

long long as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<long long>();
}

const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError(join(path, key), "missing field");
  return j.at(key);
}

double get_double(const json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? as_double(j.at(key), join(path, key)) : fallback;
}

long long get_int(const json& j, const std::string& path, const char* key, long long fallback, long long lo,
                  long long hi) {
  if (!j.contains(key)) return fallback;
  const long long v = as_int(j.at(key), join(path, key));
  if (v < lo || v > hi) {
    throw ConfigError(join(path, key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return v;
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const std::string& path, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(join(path, key), "expected a string");
  return j.at(key).get<std::string>();
}

double positive(double v, const std::string& path) {
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

Point2 parse_point(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected [x, y]");
  return {as_double(j[0], index(path, 0)), as_double(j[1], index(path, 1))};
}

// Wraps a library precondition failure so that it carries the config path.
template <class F>
auto at_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Sections

struct Numerics {
  SeriesControl series;
  GaussScheme gauss;
  bool monte_carlo = false;
  std::size_t mc_samples = 100000;
  double hyp_r = 0.5;
  int resolution = 128;
  int supercell_n = 4;
  int ensemble_size = 8;
  bool richardson = true;
  HoleBoundary boundary = HoleBoundary::staircase;
  std::optional<double> stderr_tol;
  std::uint64_t seed = 1;

  ExpectationScheme scheme() const {
    if (monte_carlo) return MonteCarloScheme{mc_samples, seed};
    return gauss;
  }
};

Numerics parse_numerics(const json& config, const RunOptions& options) {
  Numerics n;
  if (config.contains("numerics")) {
    const std::string p = "numerics";
    const json& j = config.at("numerics");
    check_keys(j, p,
               {"tail_tol", "max_modes", "guard_dist", "gauss_order", "gauss_panels", "expectation", "mc_samples",
                "hyp_r", "resolution", "supercell_n", "ensemble_size", "richardson", "boundary", "stderr_tol",
                "seed"});
    n.series.tail_tol = positive(get_double(j, p, "tail_tol", n.series.tail_tol), join(p, "tail_tol"));
    n.series.max_modes = static_cast<int>(get_int(j, p, "max_modes", n.series.max_modes, 1, 10000000));
    n.series.guard_dist = get_double(j, p, "guard_dist", n.series.guard_dist);
    if (n.series.guard_dist < 0.0) throw ConfigError(join(p, "guard_dist"), "must be >= 0");
    n.gauss.order = static_cast<int>(get_int(j, p, "gauss_order", n.gauss.order, 1, 256));
    n.gauss.panels = static_cast<int>(get_int(j, p, "gauss_panels", n.gauss.panels, 1, 4096));
    const std::string e = get_string(j, p, "expectation", "gauss");
    if (e == "monte_carlo") {
      n.monte_carlo = true;
    } else if (e != "gauss") {
      throw ConfigError(join(p, "expectation"), "expected \"gauss\" or \"monte_carlo\"");
    }
    n.mc_samples = static_cast<std::size_t>(get_int(j, p, "mc_samples", 100000, 2, 1000000000));
    n.hyp_r = positive(get_double(j, p, "hyp_r", n.hyp_r), join(p, "hyp_r"));
    n.resolution = static_cast<int>(get_int(j, p, "resolution", n.resolution, 8, 4096));
    n.supercell_n = static_cast<int>(get_int(j, p, "supercell_n", n.supercell_n, 1, 64));
    n.ensemble_size = static_cast<int>(get_int(j, p, "ensemble_size", n.ensemble_size, 1, 100000));
    n.richardson = get_bool(j, p, "richardson", n.richardson);
    const std::string b = get_string(j, p, "boundary", "staircase");
    if (b == "cut_edge") {
      n.boundary = HoleBoundary::cut_edge;
    } else if (b != "staircase") {
      throw ConfigError(join(p, "boundary"), "expected \"staircase\" or \"cut_edge\"");
    }
    if (j.contains("stderr_tol")) n.stderr_tol = positive(as_double(j.at("stderr_tol"), join(p, "stderr_tol")), join(p, "stderr_tol"));
    if (j.contains("seed")) {
      const json& s = j.at("seed");
      if (!is_seed(s)) throw ConfigError(join(p, "seed"), "expected a nonnegative integer");
      n.seed = s.get<std::uint64_t>();
    }
    if (n.richardson && n.resolution % 2 != 0) {
      throw ConfigError(join(p, "resolution"), "must be even when richardson is enabled");
    }
  }
  if (options.seed) n.seed = *options.seed;
  return n;
}

struct NamedLaw {
  std::string name;
  RodLaw law;
};

std::vector<NamedLaw> parse_laws(const json& config) {
  std::vector<NamedLaw> out;
  auto one = [&](const json& j, const std::string& path, std::size_t i) {
    NamedLaw n;
    n.law = parse_law(j, path);
    n.name = j.contains("name") ? j.at("name").get<std::string>() : "law" + std::to_string(i);
    out.push_back(std::move(n));
  };
  if (config.contains("laws")) {
    if (config.contains("law")) throw ConfigError("law", "give either law or laws, not both");
    const json& arr = config.at("laws");
    if (!arr.is_array()) throw ConfigError("laws", "expected an array");
    if (arr.empty()) throw ConfigError("laws", "empty law section");
    for (std::size_t i = 0; i < arr.size(); ++i) one(arr[i], index("laws", i), i);
  } else if (config.contains("law")) {
    one(config.at("law"), "law", 0);
  } else {
    throw ConfigError("law", "missing law section");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& name = out[i].name;
    const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
    if (!ok) throw ConfigError(index("laws", i) + ".name", "use letters, digits, '_', '-' or '.'");
    if (!names.insert(name).second) throw ConfigError(index("laws", i) + ".name", "duplicate name");
  }
  return out;
}

struct Sweep {
  std::vector<double> k0s;
  bool by_lambda = true;
  std::vector<double> hs{0.0};
};

Sweep parse_sweep(const json& config) {
  Sweep s;
  const json& j = field(config, "", "sweep");
  s.k0s = parse_k0_grid(j, "sweep");
  s.by_lambda = get_string(j, "sweep", "variable", "lambda") == "lambda";
  if (j.contains("h")) {
    const json& h = j.at("h");
    if (!h.is_array() || h.empty()) throw ConfigError("sweep.h", "expected a nonempty array");
    s.hs.clear();
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double v = as_double(h[i], index("sweep.h", i));
      if (v < 0.0) throw ConfigError(index("sweep.h", i), "must be >= 0");
      s.hs.push_back(v);
    }
  }
  return s;
}

struct Output {
  std::string prefix = "out";
  bool svg = true;
};

Output parse_output(const json& config, const std::string& fallback_prefix) {
  Output o;
  o.prefix = fallback_prefix;
  if (config.contains("output")) {
    const json& j = config.at("output");
    check_keys(j, "output", {"prefix", "svg"});
    o.prefix = get_string(j, "output", "prefix", o.prefix);
    o.svg = get_bool(j, "output", "svg", o.svg);
    if (o.prefix.empty() || o.prefix.find('/') != std::string::npos) {
      throw ConfigError("output.prefix", "must be a nonempty file name without '/'");
    }
  }
  return o;
}

Obstacle parse_obstacle(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string type = get_string(j, path, "type", "");
  Obstacle o;
  if (type == "disk") {
    check_keys(j, path, {"type", "center", "radius"});
    DiskObstacle d;
    if (j.contains("center")) d.center = parse_point(j.at("center"), join(path, "center"));
    d.radius = positive(as_double(field(j, path, "radius"), join(path, "radius")), join(path, "radius"));
    o = d;
  } else if (type == "rectangle") {
    check_keys(j, path, {"type", "lo", "hi"});
    o = RectObstacle{parse_point(field(j, path, "lo"), join(path, "lo")),
                     parse_point(field(j, path, "hi"), join(path, "hi"))};
  } else {
    throw ConfigError(join(path, "type"), "expected \"disk\" or \"rectangle\"");
  }
  at_path(path, [&] {
    validate_obstacle(o);
    return 0;
  });
  return o;
}

// ---------------------------------------------------------------------------
// Emission

struct Context {
  std::uint64_t digest = 0;
  std::uint64_t seed = 0;
  std::string command;
  std::filesystem::path out_dir;
  RunResult* result = nullptr;

  std::string header() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# config_digest=%016" PRIx64 " seed=%" PRIu64 " command=%s\n", digest, seed,
                  command.c_str());
    return buf;
  }

  void emit(const std::string& name, const std::string& content) const {
    const auto path = out_dir / name;
    write_atomic(path, content);
    result->files.push_back(path);
  }
};

std::string csv_row(std::initializer_list<double> values) {
  std::string s;
  for (double v : values) {
    if (!s.empty()) s += ',';
    s += format_double(v);
  }
  return s + '\n';
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Hypotheses

struct HypothesisRow {
  std::string law;
  double k0 = 0.0;
  HypothesisReport report;
  bool ok() const { return report.hyp_holds && report.dissipation_holds; }
};

std::vector<HypothesisRow> hypotheses(const std::vector<NamedLaw>& laws, const std::vector<double>& k0s,
                                      const Numerics& num) {
  std::vector<HypothesisRow> rows;
  const double k0max = *std::max_element(k0s.begin(), k0s.end());
  for (const auto& nl : laws) {
    const SpectrumTable table = spectrum_covering(max_abs_eps_rho2(nl.law) * k0max * k0max);
    std::vector<HypothesisRow> block(k0s.size());
    parallel_for(k0s.size(), [&](std::size_t i) {
      block[i] = {nl.name, k0s[i], check_hypotheses(nl.law, k0s[i], num.hyp_r, table, num.gauss)};
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

std::string violation_message(const HypothesisRow& row) {
  std::string why;
  if (!row.report.hyp_holds) why = "the distance integral to the spectrum diverges";
  if (!row.report.dissipation_holds) why += std::string(why.empty() ? "" : " and ") + "the law has no dissipative mass";
  return "law '" + row.law + "' violates the well-posedness hypotheses at k0 = " + format_double(row.k0) + " (" +
         why + "); rerun with --force to evaluate anyway";
}

void gate(const std::vector<NamedLaw>& laws, const std::vector<double>& k0s, const Numerics& num, bool force) {
  if (force) return;
  for (const auto& row : hypotheses(laws, k0s, num)) {
    if (!row.ok()) throw HypothesisViolation(violation_message(row));
  }
}

// ---------------------------------------------------------------------------
// Commands

void cmd_mu_sweep(const json& config, const Numerics& num, const RunOptions& options, const Context& ctx) {
  const auto laws = parse_laws(config);
  const Sweep sweep = parse_sweep(config);
  const Output out = parse_output(config, "mu");
  gate(laws, sweep.k0s, num, options.force);

  const double k0max = *std::max_element(sweep.k0s.begin(), sweep.k0s.end());
  std::vector<Curve> curves;
  for (const auto& nl : laws) {
    const SpectrumTable table = spectrum_for(nl.law, k0max, num.series);
    const ExpectationScheme scheme = num.scheme();
    std::vector<SeriesValue> values(sweep.k0s.size());
    parallel_for(values.size(), [&](std::size_t i) {
      try {
        values[i] = mu_eff_series(sweep.k0s[i], nl.law, num.series, table, scheme);
      } catch (const ResonanceError&) {
        if (!options.force) throw;
        values[i] = {cplx{kNaN, kNaN}, 0, kNaN, 0.0};
      }
    });

    std::string csv = ctx.header() + "# law=" + nl.name + " law_digest=" + hex(law_digest(nl.law)) + "\n";
    csv += "k0,lambda,re_mu,im_mu,n_modes,tail_bound\n";
    Curve re{nl.name + " Re mu", {}, {}};
    Curve im{nl.name + " Im mu", {}, {}};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double k0 = sweep.k0s[i];
      const double lambda = 2.0 * kPi / k0;
      csv += csv_row({k0, lambda, values[i].mu.real(), values[i].mu.imag(),
                      static_cast<double>(values[i].n_modes), values[i].tail_bound});
      const double x = sweep.by_lambda ? lambda : k0;
      re.x.push_back(x);
      re.y.push_back(values[i].mu.real());
      im.x.push_back(x);
      im.y.push_back(values[i].mu.imag());
    }
    ctx.emit(out.prefix + "_" + nl.name + ".csv", csv);
    curves.push_back(std::move(re));
    curves.push_back(std::move(im));
  }
  if (out.svg) {
    ctx.emit(out.prefix + ".svg",
             emit_svg(curves, {"Effective permeability", sweep.by_lambda ? "lambda = 2 pi / k0" : "k0", "mu_eff"}));
  }
}

void cmd_mu_limit(const json& config, const Numerics& num, const Context& ctx) {
  const json& lim = field(config, "", "limit");
  check_keys(lim, "limit", {"gamma", "g"});
  LimitAbsorptionSetup base{parse_component(field(lim, "limit", "gamma"), "limit.gamma"),
                            PiecewiseLinearDensity({{0.0, 0.0}, {1.0, 1.0}, {2.0, 0.0}}), 0.0, 1.0};
  {
    const ComponentLaw g = parse_component(field(lim, "limit", "g"), "limit.g");
    const auto* pl = std::get_if<PiecewiseLinearDensity>(&g);
    if (!pl) throw ConfigError("limit.g", "expected a piecewise_linear density");
    base.g = *pl;
  }
  const Sweep sweep = parse_sweep(config);
  const Output out = parse_output(config, "mu_limit");
  for (std::size_t ih = 0; ih < sweep.hs.size(); ++ih) {
    for (double k0 : sweep.k0s) {
      LimitAbsorptionSetup s = base;
      s.h = sweep.hs[ih];
      s.k0 = k0;
      at_path("limit", [&] {
        validate(s);
        return 0;
      });
    }
  }

  std::string csv = ctx.header() + "k0,lambda,re_mu,im_mu,n_modes,tail_bound,h\n";
  std::vector<Curve> curves;
  for (double h : sweep.hs) {
    Curve re{"h=" + format_double(h) + " Re mu", {}, {}};
    Curve im{"h=" + format_double(h) + " Im mu", {}, {}};
    for (double k0 : sweep.k0s) {
      LimitAbsorptionSetup s = base;
      s.h = h;
      s.k0 = k0;
      const SpectrumTable table = spectrum_for(s, num.series);
      const LimitValue v = h > 0.0 ? mu_eff_h(s, num.series, table) : mu_eff_limit(s, num.series, table);
      const double lambda = 2.0 * kPi / k0;
      csv += csv_row({k0, lambda, v.mu.real(), v.mu.imag(), static_cast<double>(v.n_modes), v.tail_bound, h});
      const double x = sweep.by_lambda ? lambda : k0;
      re.x.push_back(x);
      re.y.push_back(v.mu.real());
      im.x.push_back(x);
      im.y.push_back(v.mu.imag());
    }
    curves.push_back(std::move(re));
    curves.push_back(std::move(im));
  }
  ctx.emit(out.prefix + ".csv", csv);
  if (out.svg) {
    ctx.emit(out.prefix + ".svg", emit_svg(curves, {"Effective permeability, vanishing absorption",
                                                    sweep.by_lambda ? "lambda = 2 pi / k0" : "k0", "mu"}));
  }
}

RveOptions rve_options(const Numerics& num) {
  RveOptions rve;
  rve.supercell_n = num.supercell_n;
  rve.ensemble_size = num.ensemble_size;
  rve.seed = num.seed;
  rve.richardson = num.richardson;
  rve.boundary = num.boundary;
  rve.stderr_tol = num.stderr_tol;
  return rve;
}

json tensor_json(const EffTensor& t) {
  return json{{"e11", t.e11},
              {"e12", t.e12},
              {"e22", t.e22},
              {"lower", t.lower},
              {"upper", t.upper},
              {"resolution", t.resolution},
              {"supercell_n", t.supercell_n},
              {"ensemble_size", t.ensemble_size},
              {"stderr", {{"e11", t.stderr_e11}, {"e12", t.stderr_e12}, {"e22", t.stderr_e22}}}};
}

json provenance(const Context& ctx) {
  return json{{"config_digest", hex(ctx.digest)}, {"seed", ctx.seed}, {"command", ctx.command}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void cmd_eps_eff(const json& config, const Numerics& num, const Context& ctx) {
  const auto laws = parse_laws(config);
  const Output out = parse_output(config, "eps_eff");
  json doc = provenance(ctx);
  doc["laws"] = json::array();
  for (const auto& nl : laws) {
    EffTensor t = eps_eff_tensor(nl.law, num.resolution, rve_options(num));
    const EpsBounds b = eps_bounds(nl.law, nl.law.delta, num.resolution, num.boundary);
    t.lower = b.lower;
    t.upper = b.upper;
    json entry = tensor_json(t);
    entry["name"] = nl.name;
    entry["law_digest"] = hex(law_digest(nl.law));
    doc["laws"].push_back(std::move(entry));
  }
  ctx.emit(out.prefix + ".json", dump(doc));
}

struct MicroSection {
  double eta = 0.25;
  Obstacle obstacle = DiskObstacle{};
};

MicroSection parse_micro(const json& config) {
  const std::string p = "microstructure";
  const json& j = field(config, "", "microstructure");
  check_keys(j, p, {"eta", "obstacle"});
  MicroSection m;
  m.eta = as_double(field(j, p, "eta"), join(p, "eta"));
  if (!(m.eta > 0.0 && m.eta <= 1.0)) throw ConfigError(join(p, "eta"), "must lie in (0, 1]");
  m.obstacle = parse_obstacle(field(j, p, "obstacle"), join(p, "obstacle"));
  return m;
}

void cmd_sample(const json& config, const Numerics& num, const Context& ctx) {
  const auto laws = parse_laws(config);
  const MicroSection m = parse_micro(config);
  const Output out = parse_output(config, "rods");
  for (const auto& nl : laws) {
    const RodSet set = sample_microstructure(nl.law, m.eta, m.obstacle, num.seed);
    std::ostringstream csv;
    csv << ctx.header() << "# law=" << nl.name << " law_digest=" << hex(law_digest(nl.law)) << "\n";
    write_rodset_csv(csv, set);
    ctx.emit(out.prefix + "_" + nl.name + ".csv", csv.str());
    ctx.emit(out.prefix + "_" + nl.name + ".json", rodset_sidecar_json(set));
  }
}

// Scalar permittivity of the homogenized obstacle; anisotropic tensors are not
// supported by the disk transmission solver.
double scalar_eps(const EffTensor& t) {
  const double scale = 0.5 * (t.e11 + t.e22);
  if (std::abs(t.e12) > 1e-3 * scale || std::abs(t.e11 - t.e22) > 1e-3 * scale) {
    throw DomainError("effective permittivity tensor is anisotropic (e11=" + format_double(t.e11) +
                      ", e12=" + format_double(t.e12) + ", e22=" + format_double(t.e22) +
                      "); the homogenized solver needs a scalar");
  }
  return scale;
}

void cmd_scatter(const json& config, const Numerics& num, const RunOptions& options, const Context& ctx) {
  const auto laws = parse_laws(config);
  if (laws.size() != 1) throw ConfigError("laws", "scatter takes exactly one law");
  const RodLaw& law = laws.front().law;
  const std::string p = "scatter";
  const json& j = field(config, "", "scatter");
  check_keys(j, p,
             {"mode", "k0", "k0_grid", "eta", "obstacle_radius", "order", "incident_angle", "n_angles", "etas",
              "seeds", "interior_probes", "exterior_probes", "rod_order"});
  const std::string mode = get_string(j, p, "mode", "study");
  if (mode != "direct" && mode != "homogenized" && mode != "study") {
    throw ConfigError(join(p, "mode"), "expected \"direct\", \"homogenized\" or \"study\"");
  }
  const Output out = parse_output(config, "scatter");
  const double radius =
      positive(get_double(j, p, "obstacle_radius", 1.0), join(p, "obstacle_radius"));
  const double angle = get_double(j, p, "incident_angle", 0.0);
  const int n_angles = static_cast<int>(get_int(j, p, "n_angles", 256, 8, 1 << 20));

  double k0 = 0.0;
  const json& k = field(j, p, "k0");
  if (k.is_string() && k.get<std::string>() == "auto") {
    std::vector<double> grid;
    if (j.contains("k0_grid")) {
      grid = parse_k0_grid(j.at("k0_grid"), join(p, "k0_grid"));
    } else {
      for (int i = 0; i < 201; ++i) grid.push_back(2.0 * kPi / (6.0 + 14.0 * i / 200.0));
    }
    k0 = at_path(join(p, "k0"), [&] { return choose_off_resonant_k0(law, grid); });
  } else {
    k0 = positive(as_double(k, join(p, "k0")), join(p, "k0"));
  }
  gate(laws, {k0}, num, options.force);

  auto homogenized_coefficients = [&] {
    const double eps = at_path("laws[0]", [&] { return scalar_eps(eps_eff_tensor(law, num.resolution, rve_options(num))); });
    const SpectrumTable table = spectrum_for(law, k0, num.series);
    const cplx mu = mu_eff_series(k0, law, num.series, table, num.scheme()).mu;
    return std::pair{eps, mu};
  };

  auto far_field_csv = [&](const ScatteringSolution& s, const std::string& extra) {
    const FarField ff = far_field(s, n_angles);
    std::string csv = ctx.header() + extra;
    char buf[256];
    std::snprintf(buf, sizeof buf, "# k0=%.17g scattering=%.17g extinction=%.17g absorption=%.17g\n", k0,
                  ff.scattering, ff.extinction, ff.absorption);
    csv += buf;
    csv += "angle,re_f,im_f\n";
    for (std::size_t i = 0; i < ff.angles.size(); ++i) {
      csv += csv_row({ff.angles[i], ff.amplitude[i].real(), ff.amplitude[i].imag()});
    }
    return csv;
  };

  if (mode == "direct") {
    const double eta = as_double(field(j, p, "eta"), join(p, "eta"));
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError(join(p, "eta"), "must lie in (0, 1]");
    RodScatteringProblem prob;
    prob.rods = sample_microstructure(law, eta, DiskObstacle{{0.0, 0.0}, radius}, num.seed);
    prob.k0 = k0;
    prob.incident = {angle};
    if (j.contains("order")) prob.order = static_cast<int>(get_int(j, p, "order", 0, 0, 64));
    const auto s = solve_foldy_lax(prob);
    ctx.emit(out.prefix + "_direct.csv",
             far_field_csv(s, "# mode=direct eta=" + format_double(eta) + " rods=" +
                                  std::to_string(prob.rods.rods.size()) + "\n"));
  } else if (mode == "homogenized") {
    const auto [eps, mu] = homogenized_coefficients();
    HomogenizedDiskProblem prob;
    prob.radius = radius;
    prob.eps_eff = eps;
    prob.mu = mu;
    prob.k0 = k0;
    prob.incident = {angle};
    if (j.contains("order")) prob.order = static_cast<int>(get_int(j, p, "order", 0, 0, 512));
    const auto s = solve_homogenized_disk(prob);
    ctx.emit(out.prefix + "_homogenized.csv",
             far_field_csv(s, "# mode=homogenized eps_eff=" + format_double(eps) + " re_mu=" +
                                  format_double(mu.real()) + " im_mu=" + format_double(mu.imag()) + "\n"));
  } else {
    StudyOptions so;
    so.k0 = k0;
    so.obstacle_radius = radius;
    so.incident = {angle};
    so.n_angles = n_angles;
    so.rod_order = static_cast<int>(get_int(j, p, "rod_order", so.rod_order, 0, 64));
    if (j.contains("etas")) {
      const json& e = j.at("etas");
      if (!e.is_array() || e.empty()) throw ConfigError(join(p, "etas"), "expected a nonempty array");
      so.etas.clear();
      for (std::size_t i = 0; i < e.size(); ++i) {
        const double v = as_double(e[i], index(join(p, "etas"), i));
        if (!(v > 0.0 && v <= 1.0)) throw ConfigError(index(join(p, "etas"), i), "must lie in (0, 1]");
        so.etas.push_back(v);
      }
    }
    if (j.contains("seeds")) {
      const json& s = j.at("seeds");
      if (!s.is_array() || s.empty()) throw ConfigError(join(p, "seeds"), "expected a nonempty array");
      so.seeds.clear();
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_seed(s[i])) throw ConfigError(index(join(p, "seeds"), i), "expected a nonnegative integer");
        so.seeds.push_back(s[i].get<std::uint64_t>());
      }
    } else if (options.seed) {
      so.seeds = {*options.seed, *options.seed + 1};
    }
    for (const char* key : {"interior_probes", "exterior_probes"}) {
      if (!j.contains(key)) continue;
      const json& a = j.at(key);
      const std::string kp = join(p, key);
      if (!a.is_array() || a.empty()) throw ConfigError(kp, "expected a nonempty array of [x, y]");
      std::vector<Point2> pts;
      for (std::size_t i = 0; i < a.size(); ++i) pts.push_back(parse_point(a[i], index(kp, i)));
      (std::string(key) == "interior_probes" ? so.interior_probes : so.exterior_probes) = pts;
    }
    const auto [eps, mu] = homogenized_coefficients();
    const StudyReport rep = at_path(p, [&] { return convergence_study(law, eps, mu, so); });
    json doc = provenance(ctx);
    doc["k0"] = rep.k0;
    doc["eps_eff"] = rep.eps_eff;
    doc["mu"] = {{"re", rep.mu.real()}, {"im", rep.mu.imag()}};
    doc["records"] = json::array();
    for (const auto& r : rep.records) {
      doc["records"].push_back({{"eta", r.eta},
                                {"seed", r.seed},
                                {"n_rods", r.n_rods},
                                {"farfield_L2_gap", r.farfield_L2_gap},
                                {"interior_gap", r.interior_gap},
                                {"exterior_gap", r.exterior_gap},
                                {"residual", r.residual}});
    }
    doc["spreads"] = json::array();
    for (const auto& s : rep.spreads) doc["spreads"].push_back({{"eta", s.eta}, {"farfield_spread", s.farfield_spread}});
    ctx.emit(out.prefix + "_study.json", dump(doc));
  }
}

void cmd_validate(const json& config, const Numerics& num, const RunOptions& options, const Context& ctx) {
  const auto laws = parse_laws(config);
  const Sweep sweep = parse_sweep(config);
  const Output out = parse_output(config, "hypotheses");
  const auto rows = hypotheses(laws, sweep.k0s, num);
  json doc = provenance(ctx);
  doc["r"] = num.hyp_r;
  doc["points"] = json::array();
  const HypothesisRow* first_bad = nullptr;
  for (const auto& row : rows) {
    const auto& r = row.report;
    json hyp = std::isfinite(r.hyp_integral_value) ? json(r.hyp_integral_value) : json("inf");
    doc["points"].push_back({{"law", row.law},
                             {"k0", row.k0},
                             {"hyp_integral_value", hyp},
                             {"hyp_holds", r.hyp_holds},
                             {"divergence_by_rule", r.divergence_by_rule},
                             {"dissipation_mass", r.dissipation_mass},
                             {"dissipation_holds", r.dissipation_holds}});
    if (!row.ok() && !first_bad) first_bad = &row;
  }
  doc["all_hold"] = first_bad == nullptr;
  ctx.emit(out.prefix + ".json", dump(doc));
  if (first_bad && !options.force) throw HypothesisViolation(violation_message(*first_bad));
}

}  // namespace

// ---------------------------------------------------------------------------
// Public helpers

ComponentLaw parse_component(const json& j, const std::string& path) {
  if (j.is_number()) return Dirac{as_double(j, path)};
  require_object(j, path);
  if (j.size() != 1) throw ConfigError(path, "expected exactly one of dirac, uniform, piecewise_linear");
  const auto& [key, v] = *j.items().begin();
  const std::string p = join(path, key);
  if (key == "dirac") return Dirac{as_double(v, p)};
  if (key == "uniform") {
    if (!v.is_array() || v.size() != 2) throw ConfigError(p, "expected [lo, hi]");
    const double lo = as_double(v[0], index(p, 0));
    const double hi = as_double(v[1], index(p, 1));
    if (!(lo < hi)) throw ConfigError(p, "lo must be below hi");
    return UniformInterval{lo, hi};
  }
  if (key == "piecewise_linear") {
    if (!v.is_array() || v.size() < 2) throw ConfigError(p, "expected at least two [x, g] knots");
    std::vector<PiecewiseLinearDensity::Knot> knots;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point2 k = parse_point(v[i], index(p, i));
      knots.push_back({k.x, k.y});
    }
    return at_path(p, [&] { return PiecewiseLinearDensity(std::move(knots)); });
  }
  throw ConfigError(p, "unknown component kind (expected dirac, uniform or piecewise_linear)");
}

RodLaw parse_law(const json& j, const std::string& path) {
  require_object(j, path);
  check_keys(j, path, {"name", "center", "radius", "permittivity", "delta"});
  if (j.contains("name") && !j.at("name").is_string()) throw ConfigError(join(path, "name"), "expected a string");
  CenterLaw center;
  if (j.contains("center")) {
    const std::string cp = join(path, "center");
    check_keys(j.at("center"), cp, {"x", "y"});
    if (j.at("center").contains("x")) center.x = parse_component(j.at("center").at("x"), join(cp, "x"));
    if (j.at("center").contains("y")) center.y = parse_component(j.at("center").at("y"), join(cp, "y"));
  }
  const ComponentLaw radius = parse_component(field(j, path, "radius"), join(path, "radius"));
  const std::string pp = join(path, "permittivity");
  const json& pj = field(j, path, "permittivity");
  check_keys(pj, pp, {"real", "imag_shift"});
  PermittivityLaw perm;
  perm.real = parse_component(field(pj, pp, "real"), join(pp, "real"));
  perm.imag_shift = get_double(pj, pp, "imag_shift", 0.0);
  const double delta = as_double(field(j, path, "delta"), join(path, "delta"));
  return at_path(path, [&] { return make_rod_law(center, radius, perm, delta); });
}

std::vector<double> parse_k0_grid(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string variable = get_string(j, path, "variable", "lambda");
  if (variable != "lambda" && variable != "k0") throw ConfigError(join(path, "variable"), "expected \"lambda\" or \"k0\"");
  std::vector<double> xs;
  if (j.contains("values")) {
    const json& v = j.at("values");
    const std::string vp = join(path, "values");
    if (!v.is_array() || v.empty()) throw ConfigError(vp, "expected a nonempty array");
    for (std::size_t i = 0; i < v.size(); ++i) xs.push_back(positive(as_double(v[i], index(vp, i)), index(vp, i)));
  } else {
    const double lo = positive(as_double(field(j, path, "min"), join(path, "min")), join(path, "min"));
    const double hi = as_double(field(j, path, "max"), join(path, "max"));
    if (!(hi >= lo)) throw ConfigError(join(path, "max"), "must be >= min");
    const long long n = get_int(j, path, "count", 0, 1, 1000000);
    if (!j.contains("count")) throw ConfigError(join(path, "count"), "missing field");
    for (long long i = 0; i < n; ++i) {
      xs.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
  }
  if (variable == "lambda") {
    for (double& x : xs) x = 2.0 * kPi / x;
  }
  return xs;
}

std::uint64_t config_digest(const json& config) {
  // json objects keep their keys sorted, so dump() is canonical.
  const std::string text = config.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunResult run(const std::string& command, const json& config, const RunOptions& options) {
  RunResult result;
  try {
    if (std::find(known_commands().begin(), known_commands().end(), command) == known_commands().end()) {
      throw ConfigError("command", "unknown command '" + command + "'");
    }
    require_object(config, "");
    check_keys(config, "",
               {"command", "law", "laws", "sweep", "numerics", "output", "limit", "microstructure", "scatter",
                "description"});
    if (config.contains("command")) {
      if (!config.at("command").is_string() || config.at("command").get<std::string>() != command) {
        throw ConfigError("command", "config is for a different command");
      }
    }
    const Numerics num = parse_numerics(config, options);
    Context ctx{config_digest(config), num.seed, command, options.out_dir, &result};
    if (command == "mu-sweep") cmd_mu_sweep(config, num, options, ctx);
    else if (command == "mu-limit") cmd_mu_limit(config, num, ctx);
    else if (command == "eps-eff") cmd_eps_eff(config, num, ctx);
    else if (command == "sample") cmd_sample(config, num, ctx);
    else if (command == "scatter") cmd_scatter(config, num, options, ctx);
    else cmd_validate(config, num, options, ctx);
  } catch (const DomainError& e) {
    result.exit_code = kExitConfig;
    result.message = std::string("config error: ") + e.what();
  } catch (const json::exception& e) {
    result.exit_code = kExitConfig;
    result.message = std::string("config error: ") + e.what();
  } catch (const HypothesisViolation& e) {
    result.exit_code = kExitHypothesis;
    result.message = std::string("hypothesis violation: ") + e.what();
  } catch (const ResonanceError& e) {
    result.exit_code = kExitHypothesis;
    result.message = std::string("evaluation on the spectrum: ") + e.what() + " (use --force to record NaN)";
  } catch (const NumericalError& e) {
    result.exit_code = kExitNumerical;
    result.message = std::string("numerical failure: ") + e.what();
  } catch (const std::exception& e) {
    result.exit_code = kExitUnexpected;
    result.message = std::string("unexpected error: ") + e.what();
  }
  return result;
}

RunResult run_file(const std::string& command, const std::filesystem::path& config_path, const RunOptions& options) {
  std::ifstream f(config_path);
  if (!f) return {kExitConfig, "config error: cannot read " + config_path.string(), {}};
  json config;
  try {
    config = json::parse(f);
  } catch (const json::parse_error& e) {
    return {kExitConfig, "config error: " + config_path.string() + ": " + e.what(), {}};
  }
  return run(command, config, options);
}

}  // namespace rh
