#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "negalens/media.hpp"
#include "negalens/modal_solver.hpp"

namespace negalens::scenario {

/// Schema or consistency violation; path is a JSON pointer such as "/source/r_s".
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Grid {
  std::vector<double> radii;
  std::vector<double> thetas;
};

/// A scenario file, with defaults filled in.
///
///   {
///     "dimension": 2, "k": 1, "r2": 1, "r3": 2, "gamma": 1.5, "R_omega": 4,
///     "delta": 1e-3 | [1e-2, 1e-3, ...],
///     "object": {"alpha_r": P, "alpha_t": P, "sigma": P},
///     "source": {"r_s": 3, "modes": [{"n": 0, "m": 0, "re": 1, "im": 0}]},
///     "solver": {"precision": "standard" | "extended", "n_max": N,
///                "min_rcond": x, "max_residual": x},
///     "study": {"kind": "cloak" | "illusion" | "resonance",
///               "params": {"radii": [...], "slope_floor": x,
///                          "core": {"alpha_r": P, "alpha_t": P, "sigma": P}}},
///     "output": {"path": "out.csv", "format": "csv",
///                "grid": {"r_min": 0, "r_max": R, "nr": 41, "ntheta": 16}}
///   }
///
/// A profile P is a number, {"re", "im"} for a complex constant, or
/// {"re", "im", "p"} for the power law (re + i im) r^p. "alpha_t" defaults to
/// "alpha_r"; object and core default to (I, 1).
struct Scenario {
  media::CloakScenario cloak;  ///< delta holds the first listed value
  std::vector<double> deltas;
  bool delta_list = false;
  int n_max = 0;
  modal::SolveOptions solve;
  std::string study_kind = "cloak";
  std::vector<double> radii{2.5, 3.5};
  std::optional<double> slope_floor;
  media::ObjectSpec core;
  std::string output_path;
  std::string output_format = "csv";
  Grid grid;
  nlohmann::json echo;  ///< the resolved configuration
};

Scenario parse_scenario(const nlohmann::json& doc);
/// Throws ScenarioError with path "" for unreadable or malformed files.
Scenario load_scenario(const std::filesystem::path& file);

geometry::ScalarProfile parse_profile(const nlohmann::json& value, const std::string& path);

}  // namespace negalens::scenario
