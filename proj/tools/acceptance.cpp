// Runs the acceptance checks and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "negalens/analysis.hpp"
#include "negalens/geometry.hpp"
#include "negalens/media.hpp"
#include "negalens/modal_solver.hpp"
#include "negalens/special_functions.hpp"
#include "oracle/fd_bvp.hpp"

namespace {

using namespace negalens;
using geometry::complex;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

media::CloakScenario trivial_cloak() {
  media::CloakScenario s;
  s.dimension = 2;
  s.k = 1.0;
  s.r2 = 1.0;
  s.r3 = 2.0;
  s.gamma = 1.5;
  s.outer_radius = 4.0;
  s.source = modal::SourceSpec::uniform(3.0, 6, 2);
  return s;
}

analysis::StudyOptions study(unsigned threads = 0) {
  analysis::StudyOptions o;
  o.deltas = {1e-2, 1e-3, 1e-4, 1e-5};
  o.radii = {2.5};
  o.threads = threads;
  return o;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

Outcome transforms() {
  double worst = 0.0;
  for (int d : {2, 3}) {
    const double r2 = 1.0;
    const double r3 = 2.0;
    const double m = r3 * r3 / (r2 * r2);
    const double r1 = r2 * r2 / r3;
    using namespace geometry;
    const RadialTensorProfile a = RadialTensorProfile::isotropic(ScalarProfile::constant(std::pow(m, d - 2.0)));
    const ScalarProfile s = ScalarProfile::constant(std::pow(m, d));
    const RadialMap f = RadialMap::kelvin(r2, d, {0.0, r1});
    const RadialMap g = RadialMap::kelvin(r3, d, f.image());
    const PushedMedium ff = push_forward(f, a, s);
    const PushedMedium gf = push_forward(g, ff.tensor, ff.sigma);
    for (int i = 0; i < 100; ++i) {
      const double y = r3 * (i + 0.5) / 100.0;
      worst = std::max({worst, std::abs(gf.tensor.alpha_r(y) - 1.0), std::abs(gf.tensor.alpha_t(y) - 1.0),
                        std::abs(gf.sigma(y) - 1.0)});
    }
  }
  return {worst <= 1e-10, fmt("max |G*F*(A,S) - (I,1)| = %.3g", worst)};
}

Outcome special_functions() {
  double wr = 0.0;
  for (int n = 0; n <= 50; ++n) {
    for (int i = 0; i < 500; ++i) {
      const double t = 0.1 + (50.0 - 0.1) * i / 499.0;
      const special::CylinderValues c = special::bessel_jy(n, t);
      wr = std::max(wr, std::abs((c.j * c.dy - c.dj * c.y) * (std::numbers::pi * t / 2.0) - 1.0));
      const special::CylinderValues s = special::spherical_jy(n, t);
      wr = std::max(wr, std::abs((s.j * s.dy - s.dj * s.y) * t * t - 1.0));
    }
  }
  const special::HattedValues h2 = special::hatted(40, 0.5, 2);
  const special::HattedValues h3 = special::hatted(40, 0.5, 3);
  const double ratio = std::max({std::abs(h2.j / std::pow(0.5, 40) - 1.0), std::abs(h2.y / std::pow(0.5, -40) - 1.0),
                                 std::abs(h3.j / std::pow(0.5, 40) - 1.0), std::abs(h3.y / std::pow(0.5, -41) - 1.0)});
  return {wr <= 1e-10 && ratio <= 0.05, fmt("Wronskian rel. error %.3g, hatted |ratio - 1| %.3g", wr, ratio)};
}

Outcome solver_oracle() {
  const media::LayeredMedium disk = media::homogeneous_medium(2, 4.0);
  double worst = 0.0;
  for (int n = 0; n <= 8; ++n) {
    modal::SourceSpec src;
    src.radius = 3.0;
    src.modes.push_back({n, 0, 1.0});
    const modal::ModalField f = modal::solve_mode(disk, n, 1.0, src);
    oracle::RadialBvp b;
    b.order = n;
    b.q = [n](double r) { return complex(1.0 - n * n / (r * r)); };
    const oracle::FdSolution o = oracle::solve_fd(b, 100000);
    double err = 0.0;
    double scale = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double r = 4.0 * i / 400.0;
      err = std::max(err, std::abs(f.at(r).value - o.at(r)));
      scale = std::max(scale, std::abs(o.at(r)));
    }
    worst = std::max(worst, err / scale);
  }
  return {worst <= 1e-5, fmt("max relative error over n <= 8: %.3g", worst)};
}

Outcome convergence(const analysis::ConvergenceReport& rep, double floor) {
  const bool ok = rep.monotone && rep.fit.valid && rep.fit.slope >= floor;
  return {ok, fmt("slope %.4f (floor %.1f), ", rep.fit.slope, floor) + (rep.monotone ? "monotone" : "NOT monotone") +
                  fmt(", e(1e-2) %.3g, e(1e-5) %.3g", rep.rows.front().error, rep.rows.back().error)};
}

Outcome trivial_cloaking() { return convergence(analysis::cloaking_study(trivial_cloak(), study()), 0.4); }

Outcome object_cloaking() {
  media::CloakScenario s = trivial_cloak();
  s.object.tensor = geometry::RadialTensorProfile::isotropic(geometry::ScalarProfile::constant(3.0));
  s.object.sigma = geometry::ScalarProfile::constant(2.0);
  return convergence(analysis::cloaking_study(s, study()), 0.3);
}

Outcome illusion() {
  const auto a_c = geometry::RadialTensorProfile::isotropic(geometry::ScalarProfile::constant(2.0));
  const auto s_c = geometry::ScalarProfile::constant(1.5);
  const analysis::ConvergenceReport rep = analysis::illusion_study(trivial_cloak(), a_c, s_c, study());
  std::vector<double> e;
  for (const auto& row : rep.rows) e.push_back(row.error);
  const double gap = rep.reference_gap.front();
  const bool dec = strictly_decreasing(e);
  return {dec && gap >= 1e-3, std::string(dec ? "decreasing" : "NOT decreasing") +
                                  fmt(", virtual vs homogeneous gap %.4g, slope %.4f", gap, rep.fit.slope)};
}

Outcome three_spheres() {
  analysis::HelmholtzSuiteOptions o;
  o.samples = 200;
  const analysis::HelmholtzSuite a = analysis::helmholtz_suite(o);
  o.samples = 400;
  const analysis::HelmholtzSuite b = analysis::helmholtz_suite(o);
  const double ca = a.summaries.front().max_c;
  const double cb = b.summaries.front().max_c;
  const bool finite = a.summaries.front().all_finite && b.summaries.front().all_finite;
  const double change = std::max(ca / cb, cb / ca);
  const analysis::Counterexample ce = analysis::bessel_counterexample(1.0, 1);
  const bool ce_ok = std::abs(ce.radii[0] - 3.8317) < 1e-4 && ce.l2_ratio < 1e-10 && ce.h_ratio > 0.1;
  return {finite && change < 2.0 && ce_ok,
          fmt("max C %.4g -> %.4g", ca, cb) + (finite ? ", all finite" : ", NOT finite") +
              fmt("; R1 %.10g, L2 ratio %.3g", ce.radii[0], ce.l2_ratio) + fmt(", H ratio %.3g", ce.h_ratio)};
}

Outcome resonance() {
  const analysis::ResonanceReport r = analysis::resonance_profile(trivial_cloak(), study());
  const bool ok = std::abs(r.p_exterior) <= 0.05 && r.p_global <= 1.1;
  return {ok, fmt("exterior p %.3g, global p %.3g", r.p_exterior, r.p_global)};
}

Outcome diagnostic() {
  double worst = 0.0;
  for (int d : {2, 3}) {
    const analysis::ReflectionCoefficients c = analysis::reflection_coefficients(30, 2.0, 1.0, d);
    worst = std::max({worst, std::abs(c.ac / c.ac_leading - 1.0), std::abs(c.bc / c.bc_leading - 1.0)});
  }
  std::vector<double> jr3;
  std::vector<double> jg;
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    const analysis::SingularityDiagnostic s = analysis::singularity_diagnostic(trivial_cloak(), delta);
    jr3.push_back(s.jump_r3);
    jg.push_back(s.jump_gamma_r2);
  }
  const bool dec = strictly_decreasing(jr3) && strictly_decreasing(jg);
  return {worst <= 0.1 && dec, fmt("AC/BC |ratio - 1| at n = 30: %.3g; ", worst) +
                                   fmt("jump at r3 %.3g -> ", jr3.front()) + fmt("%.3g, ", jr3.back()) +
                                   fmt("at gamma r2 %.3g -> %.3g", jg.front(), jg.back())};
}

Outcome determinism() {
  auto cloak_csv = [](unsigned threads) {
    std::ostringstream s;
    analysis::write_csv(s, analysis::cloaking_study(trivial_cloak(), study(threads)));
    return s.str();
  };
  auto suite_csv = [] {
    std::ostringstream s;
    const analysis::HelmholtzSuite suite = analysis::helmholtz_suite({});
    analysis::write_csv(s, suite);
    analysis::write_summary_csv(s, suite);
    return s.str();
  };
  const bool a = cloak_csv(1) == cloak_csv(0);
  const bool b = suite_csv() == suite_csv();
  return {a && b, std::string("convergence CSV ") + (a ? "identical" : "DIFFERS") + ", three-spheres CSV " +
                      (b ? "identical" : "DIFFERS")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "transform algebra", 1.0, transforms},
      {2, "special functions", 5.0, special_functions},
      {3, "solver vs finite differences", 30.0, solver_oracle},
      {4, "cloaking, trivial object", 120.0, trivial_cloaking},
      {5, "cloaking, a = 3I, sigma = 2", 120.0, object_cloaking},
      {6, "illusion, a_c = 2I, sigma_c = 1.5", 120.0, illusion},
      {7, "three-spheres suite and counterexample", 60.0, three_spheres},
      {8, "resonance profile", 120.0, resonance},
      {9, "singularity diagnostic", 60.0, diagnostic},
      {10, "determinism", 240.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < c.limit_seconds;
    const bool ok = o.pass && in_time;
    failed += ok ? 0 : 1;
    std::printf("criterion %2d %s: %s  %s  [%.2f s, limit %.0f s%s]\n", c.id, c.name, ok ? "PASS" : "FAIL",
                o.detail.c_str(), dt, c.limit_seconds, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
