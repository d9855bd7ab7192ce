#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "rh/app.hpp"
#include "rh/permeability.hpp"
#include "rh/svg.hpp"

using namespace rh;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("rh_test_app_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Csv {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& p) {
  Csv csv;
  std::ifstream f(p);
  std::string line;
  while (std::getline(f, line)) {
    if (line.rfind("#", 0) == 0) {
      csv.comments.push_back(line);
    } else if (csv.header.empty()) {
      csv.header = split(line);
    } else {
      std::vector<double> row;
      for (const auto& c : split(line)) row.push_back(std::strtod(c.c_str(), nullptr));
      csv.rows.push_back(row);
    }
  }
  return csv;
}

json lossy_law() {
  return json::parse(R"({
    "name": "det",
    "radius": {"dirac": 0.375},
    "permittivity": {"real": {"dirac": 100}, "imag_shift": 5},
    "delta": 0.05
  })");
}

json sweep_config() {
  json c;
  c["command"] = "mu-sweep";
  c["laws"] = json::array({lossy_law()});
  c["sweep"] = {{"variable", "lambda"}, {"min", 8.0}, {"max", 12.0}, {"count", 5}};
  c["output"] = {{"prefix", "t"}, {"svg", true}};
  return c;
}

RunOptions in(const TempDir& d) {
  RunOptions o;
  o.out_dir = d.path;
  return o;
}

}  // namespace

TEST_CASE("an empty law section is a config error naming the field") {
  TempDir d;
  json c = sweep_config();
  c.erase("laws");
  c["law"] = json::object();
  auto r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("law.radius") != std::string::npos);
  CHECK(r.files.empty());

  c.erase("law");
  c["laws"] = json::array();
  r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("laws") != std::string::npos);

  c.erase("laws");
  r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
}

TEST_CASE("config errors carry the path of the offending field") {
  TempDir d;
  json c = sweep_config();
  c["laws"][0]["radius"] = {{"uniform", {0.4, 0.3}}};
  auto r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("laws[0].radius.uniform") != std::string::npos);

  c = sweep_config();
  c["laws"][0]["radius"] = {{"dirac", 0.48}};  // violates the admissibility margin
  r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("laws[0]") != std::string::npos);

  c = sweep_config();
  c["numerics"] = {{"tail_toll", 1e-8}};
  r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("numerics.tail_toll") != std::string::npos);

  c = sweep_config();
  c["sweep"]["count"] = 2.5;
  r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("sweep.count") != std::string::npos);

  c = sweep_config();
  r = run("eps-eff", c, in(d));
  CHECK(r.exit_code == kExitConfig);
  CHECK(r.message.find("command") != std::string::npos);

  CHECK(run("nonsense", json::object(), in(d)).exit_code == kExitConfig);
  CHECK(run_file("mu-sweep", d.path / "missing.json", in(d)).exit_code == kExitConfig);
  {
    std::ofstream(d.path / "broken.json") << "{ not json";
  }
  CHECK(run_file("mu-sweep", d.path / "broken.json", in(d)).exit_code == kExitConfig);
}

TEST_CASE("component parsing") {
  CHECK(std::get<Dirac>(parse_component(json(0.3), "x")).value == 0.3);
  const auto u = std::get<UniformInterval>(parse_component(json::parse(R"({"uniform": [0.1, 0.2]})"), "x"));
  CHECK(u.lo == 0.1);
  CHECK(u.hi == 0.2);
  const auto pl = std::get<PiecewiseLinearDensity>(
      parse_component(json::parse(R"({"piecewise_linear": [[90, 0], [100, 0.1], [110, 0]]})"), "x"));
  CHECK(pl.moment(0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse_component(json::parse(R"({"dirac": 1, "uniform": [0, 1]})"), "x"), ConfigError);
  CHECK_THROWS_AS(parse_component(json::parse(R"({"gauss": 1})"), "x"), ConfigError);
  try {
    parse_component(json::parse(R"({"piecewise_linear": [[0, 1], [1, 1]]})"), "law.g");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "law.g.piecewise_linear");
  }
}

TEST_CASE("k0 grids from wavelengths and explicit values") {
  const auto g = parse_k0_grid(json::parse(R"({"variable": "lambda", "min": 6, "max": 20, "count": 3})"), "s");
  REQUIRE(g.size() == 3);
  CHECK(g[0] == doctest::Approx(2.0 * kPi / 6.0));
  CHECK(g[1] == doctest::Approx(2.0 * kPi / 13.0));
  CHECK(g[2] == doctest::Approx(2.0 * kPi / 20.0));
  const auto v = parse_k0_grid(json::parse(R"({"variable": "k0", "values": [0.5, 1.5]})"), "s");
  CHECK(v == std::vector<double>{0.5, 1.5});
  CHECK_THROWS_AS(parse_k0_grid(json::parse(R"({"variable": "k0", "values": [0.5, -1]})"), "s"), ConfigError);
  CHECK_THROWS_AS(parse_k0_grid(json::parse(R"({"variable": "freq", "values": [1]})"), "s"), ConfigError);
  CHECK_THROWS_AS(parse_k0_grid(json::parse(R"({"min": 6, "max": 5, "count": 3})"), "s"), ConfigError);
}

TEST_CASE("format_double survives a text round trip") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> ex(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(gen), ex(gen));
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(std::isnan(std::strtod(format_double(std::nan("")).c_str(), nullptr)));
}

TEST_CASE("mu-sweep CSV re-parses into the values that produced it") {
  TempDir d;
  const json c = sweep_config();
  const auto r = run("mu-sweep", c, in(d));
  REQUIRE_MESSAGE(r.exit_code == kExitOk, r.message);
  REQUIRE(r.files.size() == 2);
  CHECK(r.files[0] == d.path / "t_det.csv");
  CHECK(r.files[1] == d.path / "t.svg");

  const Csv csv = read_csv(r.files[0]);
  CHECK(csv.header == std::vector<std::string>{"k0", "lambda", "re_mu", "im_mu", "n_modes", "tail_bound"});
  REQUIRE(csv.comments.size() >= 1);
  CHECK(csv.comments[0].find("config_digest=") != std::string::npos);
  CHECK(csv.comments[0].find("seed=1") != std::string::npos);
  REQUIRE(csv.rows.size() == 5);

  const RodLaw law = parse_law(lossy_law(), "law");
  const auto k0s = parse_k0_grid(c["sweep"], "sweep");
  SeriesControl ctrl;
  const auto table = spectrum_for(law, *std::max_element(k0s.begin(), k0s.end()), ctrl);
  for (std::size_t i = 0; i < k0s.size(); ++i) {
    const auto v = mu_eff_series(k0s[i], law, ctrl, table);
    CHECK(csv.rows[i][0] == k0s[i]);
    CHECK(csv.rows[i][1] == 2.0 * kPi / k0s[i]);
    CHECK(csv.rows[i][2] == v.mu.real());
    CHECK(csv.rows[i][3] == v.mu.imag());
    CHECK(csv.rows[i][4] == v.n_modes);
    CHECK(csv.rows[i][5] == v.tail_bound);
  }
  for (const auto& e : fs::directory_iterator(d.path)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
  TempDir a;
  TempDir b;
  json c = sweep_config();
  c["numerics"] = {{"expectation", "monte_carlo"}, {"mc_samples", 2000}};
  c["laws"][0]["radius"] = {{"uniform", {0.3, 0.45}}};
  RunOptions oa = in(a);
  RunOptions ob = in(b);
  oa.seed = ob.seed = 11;
  const auto ra = run("mu-sweep", c, oa);
  const auto rb = run("mu-sweep", c, ob);
  REQUIRE(ra.exit_code == kExitOk);
  REQUIRE(rb.exit_code == kExitOk);
  REQUIRE(ra.files.size() == rb.files.size());
  for (std::size_t i = 0; i < ra.files.size(); ++i) CHECK(slurp(ra.files[i]) == slurp(rb.files[i]));
  CHECK(slurp(ra.files[0]).find("seed=11") != std::string::npos);

  // A different seed changes the Monte Carlo values.
  TempDir e;
  RunOptions oe = in(e);
  oe.seed = 12;
  const auto re = run("mu-sweep", c, oe);
  REQUIRE(re.exit_code == kExitOk);
  CHECK(slurp(re.files[0]) != slurp(ra.files[0]));
}

TEST_CASE("sample writes rods and sidecar deterministically") {
  TempDir a;
  TempDir b;
  json c;
  c["command"] = "sample";
  c["law"] = lossy_law();
  c["law"]["center"] = {{"x", {{"uniform", {0.45, 0.55}}}}, {"y", {{"uniform", {0.45, 0.55}}}}};
  c["law"]["radius"] = {{"uniform", {0.3, 0.4}}};
  c["microstructure"] = {{"eta", 0.25}, {"obstacle", {{"type", "disk"}, {"center", {0, 0}}, {"radius", 1}}}};
  c["numerics"] = {{"seed", 4}};
  const auto ra = run("sample", c, in(a));
  const auto rb = run("sample", c, in(b));
  REQUIRE_MESSAGE(ra.exit_code == kExitOk, ra.message);
  REQUIRE(ra.files.size() == 2);
  CHECK(slurp(ra.files[0]) == slurp(rb.files[0]));
  CHECK(slurp(ra.files[1]) == slurp(rb.files[1]));
  const Csv csv = read_csv(ra.files[0]);
  CHECK(csv.header == std::vector<std::string>{"x", "y", "radius", "re_eps", "im_eps"});
  CHECK(!csv.rows.empty());
  for (const auto& row : csv.rows) {
    CHECK(std::hypot(row[0], row[1]) < 1.0);
    CHECK(row[2] >= 0.25 * 0.3);
    CHECK(row[2] <= 0.25 * 0.4);
  }
  const json side = json::parse(slurp(ra.files[1]));
  CHECK(side["seed"] == 4);
  CHECK(side["eta"] == 0.25);

  c["microstructure"]["obstacle"]["type"] = "ellipse";
  const auto bad = run("sample", c, in(a));
  CHECK(bad.exit_code == kExitConfig);
  CHECK(bad.message.find("microstructure.obstacle.type") != std::string::npos);
}

TEST_CASE("hypothesis violations exit 3 unless forced") {
  TempDir d;
  json c = sweep_config();
  c["laws"][0]["permittivity"] = {{"real", {{"piecewise_linear", {{90, 0}, {100, 0.1}, {110, 0}}}}}, {"imag_shift", 0}};
  c["laws"][0]["radius"] = {{"dirac", 0.35}};
  c["sweep"] = {{"variable", "k0"}, {"values", {0.69, 1.0}}};
  const auto r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitHypothesis);
  CHECK(r.files.empty());

  c["command"] = "validate";
  const auto v = run("validate", c, in(d));
  CHECK(v.exit_code == kExitHypothesis);
  REQUIRE(v.files.size() == 1);
  const json doc = json::parse(slurp(v.files[0]));
  CHECK(doc["all_hold"] == false);
  CHECK(doc["points"].size() == 2);

  RunOptions forced = in(d);
  forced.force = true;
  CHECK(run("validate", c, forced).exit_code == kExitOk);

  // A lossy law passes validation.
  json ok = sweep_config();
  ok["command"] = "validate";
  const auto good = run("validate", ok, in(d));
  CHECK(good.exit_code == kExitOk);
  CHECK(json::parse(slurp(good.files[0]))["all_hold"] == true);
}

TEST_CASE("forced sweeps record points on the spectrum as NaN") {
  TempDir d;
  json c = sweep_config();
  c["laws"][0]["permittivity"] = {{"real", {{"dirac", 100}}}, {"imag_shift", 0}};
  // k0 with k0^2 eps rho^2 equal to the first Dirichlet eigenvalue, plus a regular point.
  const double lambda1 = 5.783185962946784;
  const double k_res = std::sqrt(lambda1 / (100.0 * 0.375 * 0.375));
  c["sweep"] = {{"variable", "k0"}, {"values", {k_res, 0.5}}};
  c["numerics"] = {{"guard_dist", 1e-6}};
  CHECK(run("mu-sweep", c, in(d)).exit_code == kExitHypothesis);
  RunOptions forced = in(d);
  forced.force = true;
  const auto r = run("mu-sweep", c, forced);
  REQUIRE_MESSAGE(r.exit_code == kExitOk, r.message);
  const Csv csv = read_csv(r.files[0]);
  REQUIRE(csv.rows.size() == 2);
  CHECK(std::isnan(csv.rows[0][2]));
  CHECK(std::isfinite(csv.rows[1][2]));
  CHECK(slurp(r.files[1]).find("<!-- dropped 2 non-finite points -->") != std::string::npos);
}

TEST_CASE("numerical failures exit 4") {
  TempDir d;
  json c = sweep_config();
  c["numerics"] = {{"max_modes", 2}, {"tail_tol", 1e-14}};
  const auto r = run("mu-sweep", c, in(d));
  CHECK(r.exit_code == kExitNumerical);
  CHECK(!r.message.empty());
}

TEST_CASE("mu-limit writes the h column with the h = 0 rows") {
  TempDir d;
  const json c = json::parse(R"({
    "command": "mu-limit",
    "limit": {"gamma": {"dirac": 0.35}, "g": {"piecewise_linear": [[90, 0], [100, 0.1], [110, 0]]}},
    "sweep": {"variable": "k0", "values": [0.69, 1.0], "h": [0, 1]},
    "output": {"prefix": "lim"}
  })");
  const auto r = run("mu-limit", c, in(d));
  REQUIRE_MESSAGE(r.exit_code == kExitOk, r.message);
  const Csv csv = read_csv(r.files[0]);
  CHECK(csv.header.back() == "h");
  REQUIRE(csv.rows.size() == 4);
  LimitAbsorptionSetup s{Dirac{0.35}, PiecewiseLinearDensity({{90.0, 0.0}, {100.0, 0.1}, {110.0, 0.0}}), 0.0, 0.69};
  SeriesControl ctrl;
  const auto v = mu_eff_limit(s, ctrl, spectrum_for(s, ctrl));
  CHECK(csv.rows[0][6] == 0.0);
  CHECK(csv.rows[0][2] == v.mu.real());
  CHECK(csv.rows[0][3] == v.mu.imag());
  CHECK(csv.rows[2][6] == 1.0);

  json bad = c;
  bad["limit"]["g"] = {{"uniform", {90, 110}}};
  const auto rb = run("mu-limit", bad, in(d));
  CHECK(rb.exit_code == kExitConfig);
  CHECK(rb.message.find("limit.g") != std::string::npos);
}

TEST_CASE("eps-eff reports the tensor with bounds") {
  TempDir d;
  json c;
  c["command"] = "eps-eff";
  c["law"] = lossy_law();
  c["law"]["delta"] = 0.1;
  c["numerics"] = {{"resolution", 32}};
  const auto r = run("eps-eff", c, in(d));
  REQUIRE_MESSAGE(r.exit_code == kExitOk, r.message);
  const json doc = json::parse(slurp(r.files[0]));
  const json& t = doc["laws"][0];
  CHECK(t["e11"].get<double>() == doctest::Approx(t["e22"].get<double>()).epsilon(1e-9));
  CHECK(t["lower"].get<double>() <= t["e11"].get<double>());
  CHECK(t["e11"].get<double>() <= t["upper"].get<double>());
  CHECK(doc["config_digest"].get<std::string>().size() == 16);

  c["numerics"]["resolution"] = 33;
  const auto odd = run("eps-eff", c, in(d));
  CHECK(odd.exit_code == kExitConfig);
  CHECK(odd.message.find("numerics.resolution") != std::string::npos);
}

TEST_CASE("config digest depends on content, not key order") {
  const json a = json::parse(R"({"a": 1, "b": [1, 2]})");
  const json b = json::parse(R"({"b": [1, 2], "a": 1})");
  const json c = json::parse(R"({"a": 1, "b": [2, 1]})");
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a) != config_digest(c));
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

std::vector<std::pair<double, double>> polyline_points(const std::string& svg, std::size_t which) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i <= which; ++i) pos = svg.find("<polyline", pos + (i ? 1 : 0));
  const auto start = svg.find("points=\"", pos) + 8;
  const auto end = svg.find('"', start);
  std::vector<std::pair<double, double>> pts;
  std::stringstream ss(svg.substr(start, end - start));
  std::string tok;
  while (ss >> tok) {
    const auto comma = tok.find(',');
    pts.emplace_back(std::stod(tok.substr(0, comma)), std::stod(tok.substr(comma + 1)));
  }
  return pts;
}

}  // namespace

TEST_CASE("svg: a constant curve is a horizontal polyline") {
  const std::string svg = emit_svg({{"one", {0, 1, 2, 3}, {2, 2, 2, 2}}}, {"t", "x", "y"});
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);  // self-contained
  const auto pts = polyline_points(svg, 0);
  REQUIRE(pts.size() == 4);
  for (const auto& p : pts) CHECK(p.second == pts[0].second);
  CHECK(pts[3].first > pts[0].first);
  CHECK(svg.find("<!-- dropped 0 non-finite points -->") != std::string::npos);
}

TEST_CASE("svg: two curves get distinct strokes and legend entries") {
  const std::string svg = emit_svg({{"alpha", {0, 1}, {0, 1}}, {"beta", {0, 1}, {1, 0}}}, {"t", "x", "y"});
  CHECK(count(svg, "<polyline") == 2);
  CHECK(svg.find(">alpha</text>") != std::string::npos);
  CHECK(svg.find(">beta</text>") != std::string::npos);
  const auto first = svg.find("<polyline");
  const auto second = svg.find("<polyline", first + 1);
  const auto style = [&](std::size_t at) { return svg.substr(at, svg.find("points=", at) - at); };
  CHECK(style(first) != style(second));
  CHECK(count(svg, "<line") > 4);  // ticks
}

TEST_CASE("svg: non-finite points are dropped and counted") {
  const double nan = std::nan("");
  const std::string svg = emit_svg({{"c", {0, 1, 2, 3}, {1, nan, 2, INFINITY}}}, {"t & <u>", "x", "y"});
  CHECK(svg.find("<!-- dropped 2 non-finite points -->") != std::string::npos);
  CHECK(polyline_points(svg, 0).size() == 2);
  CHECK(svg.find("t &amp; &lt;u&gt;") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
}

TEST_CASE("svg: invalid input") {
  CHECK_THROWS_AS(emit_svg({}, {}), DomainError);
  CHECK_THROWS_AS(emit_svg({{"c", {0, 1}, {0}}}, {}), DomainError);
}
