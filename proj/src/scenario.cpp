#include "negalens/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace negalens::scenario {
namespace {

using nlohmann::json;
using geometry::RadialTensorProfile;
using geometry::ScalarProfile;

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ScenarioError(path.empty() ? "/" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw ScenarioError(child(path, key), "unknown field");
  }
}

const json& required(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(child(path, key), "required field missing");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ScenarioError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ScenarioError(path, "expected a finite number");
  return x;
}

double positive(const json& v, const std::string& path) {
  const double x = number(v, path);
  if (!(x > 0.0)) throw ScenarioError(path, "must be positive");
  return x;
}

int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ScenarioError(path, "expected an integer");
  return v.get<int>();
}

double number_or(const json& obj, const std::string& path, const char* key, double fallback) {
  const auto it = obj.find(key);
  return it == obj.end() ? fallback : number(*it, child(path, key));
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ScenarioError(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "/" + std::to_string(i)));
  return out;
}

media::ObjectSpec parse_medium(const json& v, const std::string& path) {
  only_keys(v, path, {"alpha_r", "alpha_t", "sigma"});
  media::ObjectSpec spec;
  if (v.contains("alpha_r")) {
    const ScalarProfile ar = parse_profile(v["alpha_r"], child(path, "alpha_r"));
    const ScalarProfile at = v.contains("alpha_t") ? parse_profile(v["alpha_t"], child(path, "alpha_t")) : ar;
    spec.tensor = RadialTensorProfile{ar, at};
  } else if (v.contains("alpha_t")) {
    throw ScenarioError(child(path, "alpha_r"), "required when alpha_t is given");
  }
  if (v.contains("sigma")) spec.sigma = parse_profile(v["sigma"], child(path, "sigma"));
  return spec;
}

json profile_echo(const ScalarProfile& p) {
  const auto& pl = p.power_law();
  return {{"re", pl.coefficient.real()}, {"im", pl.coefficient.imag()}, {"p", pl.exponent}};
}

json medium_echo(const media::ObjectSpec& m) {
  return {{"alpha_r", profile_echo(m.tensor.alpha_r)},
          {"alpha_t", profile_echo(m.tensor.alpha_t)},
          {"sigma", profile_echo(m.sigma)}};
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return out;
}

}  // namespace

ScalarProfile parse_profile(const json& v, const std::string& path) {
  if (v.is_number()) return ScalarProfile::constant(number(v, path));
  if (!v.is_object()) throw ScenarioError(path, "expected a number or an object {re, im, p}");
  only_keys(v, path, {"re", "im", "p", "kind"});
  const double re = number_or(v, path, "re", 0.0);
  const double im = number_or(v, path, "im", 0.0);
  const double p = number_or(v, path, "p", 0.0);
  if (v.contains("kind") && v["kind"] != "power_law") throw ScenarioError(child(path, "kind"), "only power_law profiles");
  return ScalarProfile::power_law({re, im}, p);
}

Scenario parse_scenario(const json& doc) {
  only_keys(doc, "", {"dimension", "k", "r2", "r3", "gamma", "delta", "R_omega", "object", "source", "solver", "study",
                      "output"});
  Scenario sc;
  media::CloakScenario& c = sc.cloak;

  c.dimension = integer(required(doc, "", "dimension"), "/dimension");
  if (c.dimension != 2 && c.dimension != 3) throw ScenarioError("/dimension", "must be 2 or 3");
  c.k = positive(required(doc, "", "k"), "/k");
  c.r2 = positive(required(doc, "", "r2"), "/r2");
  c.r3 = positive(required(doc, "", "r3"), "/r3");
  c.gamma = number(required(doc, "", "gamma"), "/gamma");
  c.outer_radius = positive(required(doc, "", "R_omega"), "/R_omega");

  const json& delta = required(doc, "", "delta");
  if (delta.is_array()) {
    sc.delta_list = true;
    sc.deltas = numbers(delta, "/delta");
  } else {
    sc.deltas = {number(delta, "/delta")};
  }
  for (std::size_t i = 0; i < sc.deltas.size(); ++i) {
    const std::string p = sc.delta_list ? "/delta/" + std::to_string(i) : "/delta";
    if (!(sc.deltas[i] > 0.0 && sc.deltas[i] < 1.0)) throw ScenarioError(p, "must lie in (0, 1)");
    if (i > 0 && !(sc.deltas[i] < sc.deltas[i - 1])) throw ScenarioError(p, "delta values must decrease");
  }
  c.delta = sc.deltas.front();

  if (doc.contains("object")) {
    c.object = parse_medium(doc["object"], "/object");
  }

  const json& src = required(doc, "", "source");
  only_keys(src, "/source", {"r_s", "modes"});
  c.source.radius = positive(required(src, "/source", "r_s"), "/source/r_s");
  const json& modes = required(src, "/source", "modes");
  if (!modes.is_array()) throw ScenarioError("/source/modes", "expected an array");
  int top = 0;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string p = "/source/modes/" + std::to_string(i);
    only_keys(modes[i], p, {"n", "m", "re", "im"});
    modal::SourceMode m;
    m.n = integer(required(modes[i], p, "n"), p + "/n");
    m.m = modes[i].contains("m") ? integer(modes[i]["m"], p + "/m") : 0;
    m.amplitude = {number_or(modes[i], p, "re", 0.0), number_or(modes[i], p, "im", 0.0)};
    if (c.dimension == 2 && m.m != 0) throw ScenarioError(p + "/m", "must be 0 for dimension 2");
    if (c.dimension == 3 && (m.n < 0 || std::abs(m.m) > m.n)) throw ScenarioError(p, "need n >= 0 and |m| <= n");
    top = std::max(top, std::abs(m.n));
    c.source.modes.push_back(m);
  }

  sc.n_max = top;
  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    only_keys(s, "/solver", {"precision", "n_max", "min_rcond", "max_residual"});
    if (s.contains("precision")) {
      const json& p = s["precision"];
      if (p == "standard") {
        sc.solve.precision = modal::Precision::standard;
      } else if (p == "extended") {
        sc.solve.precision = modal::Precision::extended;
      } else {
        throw ScenarioError("/solver/precision", "must be \"standard\" or \"extended\"");
      }
    }
    if (s.contains("n_max")) {
      sc.n_max = integer(s["n_max"], "/solver/n_max");
      if (sc.n_max < 0) throw ScenarioError("/solver/n_max", "must be nonnegative");
    }
    sc.solve.min_rcond = number_or(s, "/solver", "min_rcond", sc.solve.min_rcond);
    sc.solve.max_residual = number_or(s, "/solver", "max_residual", sc.solve.max_residual);
  }

  if (doc.contains("study")) {
    const json& st = doc["study"];
    only_keys(st, "/study", {"kind", "params"});
    if (st.contains("kind")) {
      if (!st["kind"].is_string()) throw ScenarioError("/study/kind", "expected a string");
      sc.study_kind = st["kind"].get<std::string>();
      if (sc.study_kind != "cloak" && sc.study_kind != "illusion" && sc.study_kind != "resonance") {
        throw ScenarioError("/study/kind", "must be cloak, illusion or resonance");
      }
    }
    if (st.contains("params")) {
      const json& p = st["params"];
      only_keys(p, "/study/params", {"radii", "slope_floor", "core"});
      if (p.contains("radii")) sc.radii = numbers(p["radii"], "/study/params/radii");
      if (p.contains("slope_floor")) sc.slope_floor = number(p["slope_floor"], "/study/params/slope_floor");
      if (p.contains("core")) sc.core = parse_medium(p["core"], "/study/params/core");
    }
  }
  for (std::size_t i = 0; i < sc.radii.size(); ++i) {
    if (!(sc.radii[i] > c.r3 && sc.radii[i] < c.outer_radius)) {
      throw ScenarioError("/study/params/radii/" + std::to_string(i), "must lie in (r3, R_omega)");
    }
  }

  double r_min = 0.0;
  double r_max = c.outer_radius;
  int nr = 41;
  int ntheta = 16;
  if (doc.contains("output")) {
    const json& o = doc["output"];
    only_keys(o, "/output", {"path", "format", "grid"});
    if (o.contains("path")) {
      if (!o["path"].is_string()) throw ScenarioError("/output/path", "expected a string");
      sc.output_path = o["path"].get<std::string>();
    }
    if (o.contains("format")) {
      if (o["format"] != "csv") throw ScenarioError("/output/format", "only csv is supported");
    }
    if (o.contains("grid")) {
      const json& g = o["grid"];
      only_keys(g, "/output/grid", {"r_min", "r_max", "nr", "ntheta"});
      r_min = number_or(g, "/output/grid", "r_min", r_min);
      r_max = number_or(g, "/output/grid", "r_max", r_max);
      if (g.contains("nr")) nr = integer(g["nr"], "/output/grid/nr");
      if (g.contains("ntheta")) ntheta = integer(g["ntheta"], "/output/grid/ntheta");
    }
  }
  if (!(r_min >= 0.0 && r_min <= r_max && r_max <= c.outer_radius)) {
    throw ScenarioError("/output/grid", "need 0 <= r_min <= r_max <= R_omega");
  }
  if (nr < 1 || ntheta < 1) throw ScenarioError("/output/grid", "nr and ntheta must be positive");
  sc.grid.radii = linspace(r_min, r_max, nr);
  if (c.dimension == 2) {
    for (int i = 0; i < ntheta; ++i) sc.grid.thetas.push_back(2.0 * std::numbers::pi * i / ntheta);
  } else {
    sc.grid.thetas = linspace(0.0, std::numbers::pi, ntheta);
  }

  try {
    media::check_scenario(c);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("", e.what());
  }

  json modes_echo = json::array();
  for (const auto& m : c.source.modes) {
    modes_echo.push_back({{"n", m.n}, {"m", m.m}, {"re", m.amplitude.real()}, {"im", m.amplitude.imag()}});
  }
  sc.echo = {{"dimension", c.dimension},
             {"k", c.k},
             {"r2", c.r2},
             {"r3", c.r3},
             {"gamma", c.gamma},
             {"R_omega", c.outer_radius},
             {"delta", sc.deltas},
             {"object", medium_echo(c.object)},
             {"source", {{"r_s", c.source.radius}, {"modes", modes_echo}}},
             {"solver",
              {{"precision", sc.solve.precision == modal::Precision::extended ? "extended" : "standard"},
               {"n_max", sc.n_max},
               {"min_rcond", sc.solve.min_rcond},
               {"max_residual", sc.solve.max_residual}}},
             {"study", {{"kind", sc.study_kind}, {"params", {{"radii", sc.radii}, {"core", medium_echo(sc.core)}}}}},
             {"output", {{"path", sc.output_path}, {"format", sc.output_format},
                         {"grid", {{"r_min", r_min}, {"r_max", r_max}, {"nr", nr}, {"ntheta", ntheta}}}}}};
  if (sc.slope_floor) sc.echo["study"]["params"]["slope_floor"] = *sc.slope_floor;
  return sc;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("", "cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

}  // namespace negalens::scenario
