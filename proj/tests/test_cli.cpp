#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kScenarios = NEGALENS_SCENARIO_DIR;
const fs::path kGolden = NEGALENS_GOLDEN_DIR;

fs::path workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("negalens_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args, const std::string& env = "") {
  const fs::path out = workdir() / "stdout.txt";
  const fs::path err = workdir() / "stderr.txt";
  const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" + NEGALENS_BIN + "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path scenario_copy(const std::string& name, const std::function<void(json&)>& edit) {
  json doc = json::parse(slurp(kScenarios / "trivial_cloak.json"));
  edit(doc);
  const fs::path p = workdir() / name;
  std::ofstream(p) << doc.dump(2);
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

void check_golden(const fs::path& produced, const std::string& golden_name) {
  const fs::path g = kGolden / golden_name;
  if (std::getenv("NEGALENS_UPDATE_GOLDEN")) fs::copy_file(produced, g, fs::copy_options::overwrite_existing);
  REQUIRE_MESSAGE(fs::exists(g), "missing golden file " << g);
  CHECK_MESSAGE(slurp(produced) == slurp(g), "differs from " << g);
}

}  // namespace

TEST_CASE("simulate writes the field CSV and a manifest") {
  const Run r = run("simulate " + q(kScenarios / "trivial_field.json") + " --out field.csv");
  REQUIRE(r.code == 0);
  const std::string csv = slurp(workdir() / "field.csv");
  CHECK(first_line(csv) == "r,theta,Re_u,Im_u,Re_ur,Im_ur");
  CHECK(lines(csv) == 1 + 9 * 8);
  check_golden(workdir() / "field.csv", "field_trivial.csv");

  const json m = json::parse(slurp(workdir() / "field.csv.manifest.json"));
  CHECK(m["command"] == "simulate");
  CHECK(m["n_max"] == 6);
  CHECK(m["precision"] == "standard");
  CHECK(m["config"]["r2"] == 1.0);
  CHECK(m["config"]["delta"][0] == 1e-3);
  CHECK(m["config"]["solver"].contains("min_rcond"));
  CHECK(m["config"]["output"]["grid"]["nr"] == 9);
  CHECK(m["outputs"][0] == "field.csv");
  CHECK(m.contains("version"));
  CHECK(m["stages"].size() == 4);
}

TEST_CASE("configuration errors exit 2 with the offending path") {
  SUBCASE("delta list given to simulate") {
    const Run r = run("simulate " + q(kScenarios / "trivial_cloak.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("/delta") != std::string::npos);
    CHECK(r.err.find("converge") != std::string::npos);
  }
  SUBCASE("missing r2") {
    const fs::path p = scenario_copy("no_r2.json", [](json& d) { d.erase("r2"); });
    const Run r = run("converge " + q(p));
    CHECK(r.code == 2);
    CHECK(r.err.find("/r2") != std::string::npos);
  }
  SUBCASE("unknown field") {
    const fs::path p = scenario_copy("unknown.json", [](json& d) { d["source"]["radius"] = 3; });
    const Run r = run("converge " + q(p));
    CHECK(r.code == 2);
    CHECK(r.err.find("/source/radius") != std::string::npos);
  }
  SUBCASE("radii out of order") {
    const fs::path p = scenario_copy("order.json", [](json& d) { d["r3"] = 0.5; });
    CHECK(run("converge " + q(p)).code == 2);
  }
  SUBCASE("3D mode with |m| > n") {
    const fs::path p = scenario_copy("mode.json", [](json& d) {
      d["dimension"] = 3;
      d["source"]["modes"] = json::array({{{"n", 1}, {"m", 2}, {"re", 1.0}}});
    });
    const Run r = run("converge " + q(p));
    CHECK(r.code == 2);
    CHECK(r.err.find("/source/modes/0") != std::string::npos);
  }
  SUBCASE("malformed JSON") {
    std::ofstream(workdir() / "bad.json") << "{\"dimension\": 2,";
    CHECK(run("converge bad.json").code == 2);
  }
  SUBCASE("too few deltas for converge") {
    const fs::path p = scenario_copy("few.json", [](json& d) { d["delta"] = {1e-2, 1e-3}; });
    CHECK(run("converge " + q(p)).code == 2);
  }
  SUBCASE("deltas spanning less than two decades") {
    const fs::path p = scenario_copy("narrow.json", [](json& d) { d["delta"] = {1e-2, 5e-3, 2e-3}; });
    CHECK(run("converge " + q(p)).code == 2);
  }
  SUBCASE("bad thread count") {
    CHECK(run("three-spheres --samples 2", "NEGALENS_THREADS=abc").code == 2);
  }
  SUBCASE("report would overwrite the scenario") {
    const fs::path p = scenario_copy("clash.json", [](json&) {});
    const Run r = run("converge " + q(p) + " --out clash.csv");
    CHECK(r.code == 2);
    CHECK(json::parse(slurp(p)).contains("r2"));
  }
  SUBCASE("unknown study") {
    CHECK(run("converge " + q(kScenarios / "trivial_cloak.json") + " --study other").code == 2);
  }
}

TEST_CASE("resonance failure in simulate exits 3") {
  const fs::path p = scenario_copy("resonant.json", [](json& d) {
    d["delta"] = 1e-3;
    d["solver"] = {{"min_rcond", 0.5}};
  });
  const Run r = run("simulate " + q(p) + " --out never.csv");
  CHECK(r.code == 3);
  CHECK(r.err.find("rcond") != std::string::npos);
  CHECK_FALSE(fs::exists(workdir() / "never.csv"));
}

TEST_CASE("converge reports, marks resonant rows and honours --check") {
  SUBCASE("trivial cloak") {
    const Run r = run("converge " + q(kScenarios / "trivial_cloak.json") + " --out cloak.csv --check");
    CHECK(r.code == 0);
    CHECK(r.out.find("slope >= 0.4: PASS") != std::string::npos);
    check_golden(workdir() / "cloak.csv", "converge_trivial_cloak.csv");
    const json j = json::parse(slurp(workdir() / "cloak.json"));
    CHECK(j["rows"].size() == 4);
    CHECK(fs::exists(workdir() / "cloak.csv.manifest.json"));
  }
  SUBCASE("illusion carries the virtual reference norms") {
    const Run r = run("converge " + q(kScenarios / "illusion.json") + " --out ill.csv");
    CHECK(r.code == 0);
    const json j = json::parse(slurp(workdir() / "ill.json"));
    CHECK(j["reference_norms"].size() == 2);
    CHECK(j["reference_gap"].size() == 2);
    CHECK(r.out.find("gap >= 0.001: PASS") != std::string::npos);
  }
  SUBCASE("one resonant delta") {
    const fs::path p = scenario_copy("partial.json", [](json& d) {
      d["delta"] = {0.3, 0.1, 0.03, 1e-3};
      d["solver"] = {{"min_rcond", 5e-4}};
    });
    const Run r = run("converge " + q(p) + " --out partial_out.csv");
    CHECK(r.code == 0);
    const std::string csv = slurp(workdir() / "partial_out.csv");
    CHECK(csv.find("0.001,resonance,0,") != std::string::npos);
    CHECK(csv.find("0.29999999999999999,ok,1,") != std::string::npos);
    CHECK(r.out.find("1 of 4 delta values hit resonance") != std::string::npos);
    CHECK(r.out.find("3 points") != std::string::npos);
  }
  SUBCASE("failed property with --check exits 4") {
    const fs::path p = scenario_copy("strict.json", [](json& d) { d["study"]["params"]["slope_floor"] = 5.0; });
    CHECK(run("converge " + q(p) + " --out strict_out.csv").code == 0);
    const Run r = run("converge " + q(p) + " --out strict_out.csv --check");
    CHECK(r.code == 4);
    CHECK(r.out.find("slope >= 5: FAIL") != std::string::npos);
  }
}

TEST_CASE("resonance subcommand") {
  const Run r = run("resonance " + q(kScenarios / "resonance.json") + " --out res.csv --check");
  CHECK(r.code == 0);
  const std::string csv = slurp(workdir() / "res.csv");
  CHECK(first_line(csv) == "delta,status,layer,role,r_in,r_out,gradient,l2");
  CHECK(lines(csv) == 1 + 7 * 7);
  CHECK(fs::exists(workdir() / "res.json"));
}

TEST_CASE("three-spheres summaries and counterexample") {
  SUBCASE("defaults") {
    const Run r = run("three-spheres --out ts.csv --check");
    CHECK(r.code == 0);
    const std::string summary = slurp(workdir() / "ts.summary.csv");
    CHECK(lines(summary) == 2);
    CHECK(lines(slurp(workdir() / "ts.csv")) == 201);
    check_golden(workdir() / "ts.summary.csv", "three_spheres_summary.csv");
    check_golden(workdir() / "ts.csv", "three_spheres.csv");
    const json m = json::parse(slurp(workdir() / "ts.csv.manifest.json"));
    CHECK(m["config"]["seed"] == 20240601);
    CHECK(m["config"]["samples"] == 200);
  }
  SUBCASE("q sweep gives one summary row per q") {
    CHECK(run("three-spheres --q 1 2 4 8 --samples 20 --out sweep.csv").code == 0);
    CHECK(lines(slurp(workdir() / "sweep.summary.csv")) == 5);
  }
  SUBCASE("counterexample") {
    const Run r = run("three-spheres --counterexample --n 1 --k 1 --out ce.csv --check");
    CHECK(r.code == 0);
    CHECK(r.out.find("R1 3.8317059702075") != std::string::npos);
    check_golden(workdir() / "ce.csv", "counterexample_j1.csv");
  }
  SUBCASE("bad radii") { CHECK(run("three-spheres --radii 2 1.5 3").code == 2); }
}

TEST_CASE("repeated runs are byte-identical regardless of thread count") {
  REQUIRE(run("converge " + q(kScenarios / "trivial_cloak.json") + " --out d1.csv --threads 1").code == 0);
  REQUIRE(run("converge " + q(kScenarios / "trivial_cloak.json") + " --out d2.csv", "NEGALENS_THREADS=3").code == 0);
  CHECK(slurp(workdir() / "d1.csv") == slurp(workdir() / "d2.csv"));
  CHECK(slurp(workdir() / "d1.json") == slurp(workdir() / "d2.json"));

  REQUIRE(run("three-spheres --out t1.csv --threads 1").code == 0);
  REQUIRE(run("three-spheres --out t2.csv --threads 4").code == 0);
  CHECK(slurp(workdir() / "t1.csv") == slurp(workdir() / "t2.csv"));
  CHECK(slurp(workdir() / "t1.summary.csv") == slurp(workdir() / "t2.summary.csv"));
}
