// negalens: run cloaking, illusion, resonance and three-spheres studies from
// scenario files and write CSV/JSON reports with a manifest next to each.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "negalens/analysis.hpp"
#include "negalens/media.hpp"
#include "negalens/modal_solver.hpp"
#include "negalens/scenario.hpp"

#ifndef NEGALENS_VERSION
#define NEGALENS_VERSION "dev"
#endif

namespace {

namespace fs = std::filesystem;
namespace an = negalens::analysis;
namespace md = negalens::media;
namespace mo = negalens::modal;
namespace sc = negalens::scenario;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;
constexpr int kCheck = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Stages {
 public:
  template <class F>
  auto run(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      Stages* self;
      std::string name;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        self->log_.push_back({{"stage", name}, {"seconds", dt.count()}});
      }
    } rec{this, name, t0};
    return f();
  }
  [[nodiscard]] const json& log() const { return log_; }

 private:
  json log_ = json::array();
};

struct Common {
  unsigned threads = 0;
  std::string out;
  bool check = false;
};

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("NEGALENS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw ConfigError("NEGALENS_THREADS: expected a nonnegative integer");
    return static_cast<unsigned>(v);
  }
  return 0;
}

const char* precision_name(mo::Precision p) { return p == mo::Precision::extended ? "extended" : "standard"; }

fs::path sibling(const fs::path& out, const std::string& suffix) { return fs::path(out.string() + suffix); }

fs::path with_extension(fs::path p, const std::string& ext) { return p.replace_extension(ext); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

template <class F>
void write_with(const fs::path& path, F&& writer) {
  std::ostringstream s;
  writer(s);
  write_text(path, s.str());
}

void write_manifest(const fs::path& primary, const std::string& command, const json& config, int n_max,
                    const std::string& precision, unsigned threads, const Stages& stages,
                    const std::vector<fs::path>& outputs) {
  json files = json::array();
  for (const auto& p : outputs) files.push_back(p.string());
  const json m = {{"tool", "negalens"},
                  {"version", NEGALENS_VERSION},
                  {"command", command},
                  {"config", config},
                  {"n_max", n_max},
                  {"precision", precision},
                  {"threads", threads},
                  {"stages", stages.log()},
                  {"outputs", files}};
  write_text(sibling(primary, ".manifest.json"), m.dump(2) + "\n");
}

fs::path output_path(const Common& c, const sc::Scenario& s, const std::string& fallback) {
  if (!c.out.empty()) return c.out;
  if (!s.output_path.empty()) return s.output_path;
  return fallback;
}

// The JSON report sits next to the CSV; refuse to clobber the scenario itself.
void guard_input(const std::string& scenario_file, const std::vector<fs::path>& outputs) {
  std::error_code ec;
  for (const auto& o : outputs) {
    if (fs::exists(o) && fs::equivalent(scenario_file, o, ec)) {
      throw ConfigError("output " + o.string() + " would overwrite the scenario file");
    }
  }
}

std::string pass(bool ok) { return ok ? "PASS" : "FAIL"; }

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& file, const Common& c) {
  Stages stages;
  const sc::Scenario s = stages.run("parse", [&] { return sc::load_scenario(file); });
  if (s.delta_list) throw sc::ScenarioError("/delta", "simulate takes a single delta; use converge for a list");
  mo::SolveOptions solve = s.solve;
  solve.threads = c.threads;

  const md::LayeredMedium medium = stages.run("build", [&] {
    return s.study_kind == "illusion" ? md::build_illusion_device(s.cloak, s.core.tensor, s.core.sigma)
                                      : md::build_cloak(s.cloak);
  });
  const mo::Field field =
      stages.run("solve", [&] { return mo::solve_field(medium, s.cloak.k, s.cloak.source, s.n_max, solve); });

  const fs::path out = output_path(c, s, "field.csv");
  guard_input(file, {out, sibling(out, ".manifest.json")});
  stages.run("write", [&] {
    write_with(out, [&](std::ostream& o) { mo::write_field_csv(o, field, s.grid.radii, s.grid.thetas); });
    return 0;
  });
  json config = s.echo;
  config["diagnostics"] = {{"max_residual", field.max_residual},
                           {"min_rcond", field.min_rcond},
                           {"tail_estimate", field.tail_estimate}};
  write_manifest(out, "simulate", config, s.n_max, precision_name(s.solve.precision), c.threads, stages, {out});
  std::cout << "wrote " << out.string() << " (" << s.grid.radii.size() * s.grid.thetas.size() << " points)\n";
  return kOk;
}

// ---- converge ---------------------------------------------------------------

void require_delta_span(const sc::Scenario& s) {
  if (s.deltas.size() < 3) throw sc::ScenarioError("/delta", "need at least 3 delta values");
  if (std::log10(s.deltas.front() / s.deltas.back()) < 2.0 - 1e-12) {
    throw sc::ScenarioError("/delta", "delta values must span at least two decades");
  }
}

an::StudyOptions study_options(const sc::Scenario& s, unsigned threads) {
  an::StudyOptions o;
  o.deltas = s.deltas;
  o.radii = s.radii;
  o.n_max = s.n_max;
  o.solve = s.solve;
  o.threads = threads;
  return o;
}

int cmd_converge(const std::string& file, std::string kind, const Common& c) {
  Stages stages;
  const sc::Scenario s = stages.run("parse", [&] { return sc::load_scenario(file); });
  if (kind.empty()) kind = s.study_kind == "illusion" ? "illusion" : "cloak";
  require_delta_span(s);
  const an::StudyOptions opts = study_options(s, c.threads);

  const an::ConvergenceReport rep = stages.run("study", [&] {
    return kind == "illusion" ? an::illusion_study(s.cloak, s.core.tensor, s.core.sigma, opts)
                              : an::cloaking_study(s.cloak, opts);
  });

  const fs::path out = output_path(c, s, kind + ".csv");
  const fs::path js = with_extension(out, ".json");
  guard_input(file, {out, js, sibling(out, ".manifest.json")});
  stages.run("write", [&] {
    write_with(out, [&](std::ostream& o) { an::write_csv(o, rep); });
    write_text(js, an::to_json(rep).dump(2) + "\n");
    return 0;
  });

  bool ok = true;
  std::size_t failed = 0;
  for (const auto& row : rep.rows) failed += row.resonance ? 1 : 0;
  if (failed > 0) std::cout << failed << " of " << rep.rows.size() << " delta values hit resonance\n";

  std::cout << "monotone nonincreasing: " << pass(rep.monotone) << '\n';
  ok = ok && rep.monotone;
  const double floor = s.slope_floor.value_or(0.4);
  const bool slope_ok = rep.fit.valid && rep.fit.slope >= floor;
  std::cout << "slope >= " << floor << ": " << pass(slope_ok) << " (slope " << rep.fit.slope << ", "
            << rep.fit.points << " points)\n";
  if (kind == "cloak") ok = ok && slope_ok;
  if (kind == "illusion") {
    double gap = 0.0;
    for (double g : rep.reference_gap) gap = std::max(gap, g);
    const bool gap_ok = gap >= 1e-3;
    std::cout << "virtual vs homogeneous gap >= 0.001: " << pass(gap_ok) << " (gap " << gap << ")\n";
    ok = ok && gap_ok;
  }

  json config = s.echo;
  config["study"]["kind"] = kind;
  config["study"]["params"]["slope_floor"] = floor;
  write_manifest(out, "converge", config, s.n_max, precision_name(s.solve.precision), c.threads, stages, {out, js});
  return (c.check && !ok) ? kCheck : kOk;
}

// ---- resonance --------------------------------------------------------------

int cmd_resonance(const std::string& file, const Common& c) {
  Stages stages;
  const sc::Scenario s = stages.run("parse", [&] { return sc::load_scenario(file); });
  if (s.deltas.size() < 2) throw sc::ScenarioError("/delta", "need at least 2 delta values");
  const an::StudyOptions opts = study_options(s, c.threads);
  const an::ResonanceReport rep = stages.run("study", [&] { return an::resonance_profile(s.cloak, opts); });

  const fs::path out = output_path(c, s, "resonance.csv");
  const fs::path js = with_extension(out, ".json");
  guard_input(file, {out, js, sibling(out, ".manifest.json")});
  stages.run("write", [&] {
    write_with(out, [&](std::ostream& o) { an::write_csv(o, rep); });
    write_text(js, an::to_json(rep).dump(2) + "\n");
    return 0;
  });

  const bool ext_ok = std::abs(rep.p_exterior) <= 0.05;
  const bool global_ok = rep.p_global <= 1.1;
  std::cout << "exterior exponent |p| <= 0.05: " << pass(ext_ok) << " (p " << rep.p_exterior << ")\n";
  std::cout << "global exponent p <= 1.1: " << pass(global_ok) << " (p " << rep.p_global << ")\n";
  for (const auto& l : rep.layers) {
    std::cout << "  layer " << l.layer << " " << md::to_string(l.role) << " (" << l.r_in << ", " << l.r_out
              << "): p " << l.p << '\n';
  }
  write_manifest(out, "resonance", s.echo, s.n_max, precision_name(s.solve.precision), c.threads, stages, {out, js});
  return (c.check && !(ext_ok && global_ok)) ? kCheck : kOk;
}

// ---- three-spheres ----------------------------------------------------------

struct SpheresArgs {
  double k = 1.0;
  int modes = 20;
  std::vector<double> radii{1.0, 1.5, 2.25};
  std::vector<double> q{4.0};
  int samples = 200;
  std::uint64_t seed = 20240601;
  bool counterexample = false;
  int n = 1;
};

int cmd_three_spheres(const SpheresArgs& a, const Common& c) {
  Stages stages;
  if (!(a.k > 0.0)) throw ConfigError("--k must be positive");
  if (a.counterexample) {
    if (a.n < 0) throw ConfigError("--n must be nonnegative");
    const an::Counterexample ce = stages.run("search", [&] { return an::bessel_counterexample(a.k, a.n); });
    const fs::path out = c.out.empty() ? fs::path("counterexample.csv") : fs::path(c.out);
    write_with(out, [&](std::ostream& o) { an::write_csv(o, ce); });
    std::cout.precision(17);
    std::cout << "R1 " << ce.radii[0] << " R2 " << ce.radii[1] << " R3 " << ce.radii[2] << '\n';
    std::cout.precision(6);
    std::cout << "L2 ratio " << ce.l2_ratio << ", H ratio " << ce.h_ratio << '\n';
    const bool ok = ce.l2_ratio < 1e-10 && ce.h_ratio > 0.1;
    std::cout << "L2 ratio < 1e-10 and H ratio > 0.1: " << pass(ok) << '\n';
    const json config = {{"k", a.k}, {"n", a.n}, {"search_limit", 200.0}};
    write_manifest(out, "three-spheres --counterexample", config, a.n, "standard", c.threads, stages, {out});
    return (c.check && !ok) ? kCheck : kOk;
  }

  if (a.radii.size() != 3) throw ConfigError("--radii takes three values");
  if (!(0.5 < a.radii[0] && a.radii[0] < a.radii[1] && a.radii[1] < a.radii[2] && a.radii[2] < 4.0)) {
    throw ConfigError("--radii must satisfy 0.5 < R1 < R2 < R3 < 4");
  }
  if (a.samples < 1) throw ConfigError("--samples must be positive");
  if (a.modes < 0) throw ConfigError("--modes must be nonnegative");
  for (double q : a.q) {
    if (!(q == 0.0 || q >= 1.0)) throw ConfigError("--q values must be 0 or at least 1");
  }

  an::HelmholtzSuiteOptions o;
  o.k = a.k;
  o.n_max = a.modes;
  o.radii = {a.radii[0], a.radii[1], a.radii[2]};
  o.q_values = a.q;
  o.samples = a.samples;
  o.seed = a.seed;
  const an::HelmholtzSuite suite = stages.run("suite", [&] { return an::helmholtz_suite(o); });

  const fs::path out = c.out.empty() ? fs::path("three_spheres.csv") : fs::path(c.out);
  const fs::path summary = with_extension(out, ".summary.csv");
  stages.run("write", [&] {
    write_with(out, [&](std::ostream& s) { an::write_csv(s, suite); });
    write_with(summary, [&](std::ostream& s) { an::write_summary_csv(s, suite); });
    return 0;
  });
  bool ok = true;
  for (const auto& sm : suite.summaries) {
    std::cout << "q " << sm.q << ": max C " << sm.max_c << ", median C " << sm.median_c << ", all finite "
              << pass(sm.all_finite) << '\n';
    ok = ok && sm.all_finite;
  }
  const json config = {{"k", o.k},           {"modes", o.n_max},         {"radii", a.radii},
                       {"q", o.q_values},    {"samples", o.samples},     {"seed", o.seed},
                       {"annulus", {o.annulus_in, o.annulus_out}}};
  write_manifest(out, "three-spheres", config, o.n_max, "standard", c.threads, stages, {out, summary});
  return (c.check && !ok) ? kCheck : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complementary-media cloaking and illusion simulator"};
  app.set_version_flag("--version", NEGALENS_VERSION);
  app.require_subcommand(1);

  Common common;
  unsigned threads_flag = 0;
  app.add_option("--threads", threads_flag, "worker cap (default: NEGALENS_THREADS, else all cores)");
  app.add_option("--out", common.out, "output file (overrides output.path)");

  std::string scenario_file;
  auto* simulate = app.add_subcommand("simulate", "field dump for one delta");
  simulate->add_option("scenario", scenario_file, "scenario JSON")->required();

  std::string study;
  auto* converge = app.add_subcommand("converge", "cloaking or illusion convergence over a delta list");
  converge->add_option("scenario", scenario_file, "scenario JSON")->required();
  converge->add_option("--study", study, "cloak or illusion")->check(CLI::IsMember({"cloak", "illusion"}));
  converge->add_flag("--check", common.check, "exit 4 when a property check fails");

  auto* resonance = app.add_subcommand("resonance", "layer energy growth over a delta list");
  resonance->add_option("scenario", scenario_file, "scenario JSON")->required();
  resonance->add_flag("--check", common.check, "exit 4 when a property check fails");

  SpheresArgs sp;
  auto* spheres = app.add_subcommand("three-spheres", "three-spheres constants for random Helmholtz solutions");
  spheres->add_option("--k", sp.k, "wavenumber")->capture_default_str();
  spheres->add_option("--modes", sp.modes, "highest angular order")->capture_default_str();
  spheres->add_option("--radii", sp.radii, "R1 R2 R3")->expected(3)->capture_default_str();
  spheres->add_option("--q", sp.q, "exponent list")->expected(1, 64)->capture_default_str();
  spheres->add_option("--samples", sp.samples, "sample count")->capture_default_str();
  spheres->add_option("--seed", sp.seed, "RNG seed")->capture_default_str();
  spheres->add_flag("--counterexample", sp.counterexample, "locate the Bessel-zero counterexample");
  spheres->add_option("--n", sp.n, "Bessel order for --counterexample")->capture_default_str();
  spheres->add_flag("--check", common.check, "exit 4 when a property check fails");

  for (auto* sub : {simulate, converge, resonance, spheres}) {
    sub->add_option("--threads", threads_flag, "worker cap");
    sub->add_option("--out", common.out, "output file");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    common.threads = resolve_threads(threads_flag);
    if (*simulate) return cmd_simulate(scenario_file, common);
    if (*converge) return cmd_converge(scenario_file, study, common);
    if (*resonance) return cmd_resonance(scenario_file, common);
    if (*spheres) return cmd_three_spheres(sp, common);
  } catch (const sc::ScenarioError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const mo::ResonanceError& e) {
    std::cerr << "numerical failure: " << e.what() << " (mode " << e.mode() << ", rcond " << e.rcond() << ")\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumeric;
  }
  return kConfig;
}
