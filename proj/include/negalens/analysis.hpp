#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "negalens/media.hpp"
#include "negalens/modal_solver.hpp"
#include "negalens/trace.hpp"

namespace negalens::analysis {

using complex = std::complex<double>;

// ---- trace norms ------------------------------------------------------------

enum class TracePart { value, flux };

/// (sum_n (1 + l_n)^s |c_n|^2 mu(r))^{1/2}, l_n = n^2 (d = 2) or n(n+1) (d = 3).
/// s must be -1/2, 0 or 1/2.
double trace_norm(const SphereTrace& trace, double s, TracePart part = TracePart::value);

/// max over a dense angular grid of |sum_n c_n angular_n|.
double sup_norm(const SphereTrace& trace, TracePart part = TracePart::value, int samples = 2048);

/// ||u||_{H^{1/2}} + ||flux||_{H^{-1/2}}; throws if the trace has no flux data.
double h_norm(const SphereTrace& trace);

/// Trace of sum_n c_n J_n(k r) e^{i n theta} (d = 2), or j_n with Y_n^0 (d = 3).
SphereTrace bessel_trace(const std::vector<std::pair<int, complex>>& modes, double k, double r, int dimension = 2);

// ---- three spheres ----------------------------------------------------------

enum class ThreeSpheresNorm { h, l2, sup };

/// (R2^-q - R3^-q) / (R1^-q - R3^-q); q = 0 gives the Hadamard limit
/// log(R3/R2) / log(R3/R1).
double three_spheres_alpha(double r1, double r2, double r3, double q);

struct ThreeSpheresReport {
  std::array<double, 3> radii{};
  double q = 4.0;
  double alpha = 0.0;
  std::array<double, 3> norms{};
  double c_min = 0.0;
  bool degenerate = false;  ///< all norms zero
  bool violation = false;   ///< N1 = 0 with N2 != 0: no finite constant
  // |Delta v| <= c1 |grad v| + c2 |v| for the family the traces come from
  double c1 = 0.0;
  double c2 = 0.0;
};

ThreeSpheresReport three_spheres_eval(const std::array<SphereTrace, 3>& traces, double q,
                                      ThreeSpheresNorm norm = ThreeSpheresNorm::h);

struct HelmholtzSuiteOptions {
  double k = 1.0;
  int n_max = 20;
  std::array<double, 3> radii{1.0, 1.5, 2.25};
  double annulus_in = 0.5;
  double annulus_out = 4.0;
  std::vector<double> q_values{4.0};
  int samples = 200;
  std::uint64_t seed = 20240601;
};

struct HelmholtzSample {
  int index = 0;
  int order = 0;  ///< highest |n| present
  ThreeSpheresReport report;
};

struct SuiteSummary {
  double q = 0.0;
  int samples = 0;
  double max_c = 0.0;
  double median_c = 0.0;
  bool all_finite = true;
};

struct HelmholtzSuite {
  HelmholtzSuiteOptions options;
  std::vector<HelmholtzSample> rows;  ///< q-major, then sample index
  std::vector<SuiteSummary> summaries;
};

/// Random solutions sum_{|n| <= N} (a_n J_n(kr) + b_n Y_n(kr)) e^{i n theta}
/// on the annulus, N uniform in [0, n_max], Gaussian coefficients, each basis
/// function scaled to unit size at R2. Sample i of a larger run equals sample i
/// of a smaller one.
HelmholtzSuite helmholtz_suite(const HelmholtzSuiteOptions& options);

struct Counterexample {
  double k = 1.0;
  int n = 1;
  std::array<double, 3> radii{};
  double j_at_r1 = 0.0;
  std::array<double, 3> l2{};
  std::array<double, 3> h{};
  double l2_ratio = 0.0;  ///< L2(R1) / L2(R2)
  double h_ratio = 0.0;   ///< H(R1) / H(R2)
};

/// First positive zero R1 of J_n(k r), found by bisection between consecutive
/// extrema; R2 is the next extremum and R3 = 2 R2 - R1.
Counterexample bessel_counterexample(double k, int n, double search_limit = 200.0);

// ---- convergence studies ----------------------------------------------------

struct StudyOptions {
  std::vector<double> deltas;
  std::vector<double> radii{2.5, 3.5};  ///< exterior circles, r3 < r < R
  int n_max = -1;                       ///< -1: highest order in the source
  modal::SolveOptions solve;
  unsigned threads = 0;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t points = 0;
  bool valid = false;
};

/// Least squares on (log x, log y) over the entries with use[i] set.
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, const std::vector<bool>& use);

struct ConvergenceRow {
  double delta = 0.0;
  std::vector<double> errors;  ///< per configured radius
  double error = 0.0;          ///< max over radii
  bool resonance = false;
  std::string message;
  bool in_fit = false;
  double residual = 0.0;
};

struct ConvergenceReport {
  std::string kind;  ///< "cloak" or "illusion"
  std::vector<double> radii;
  std::vector<ConvergenceRow> rows;
  LogLogFit fit;
  bool monotone = true;
  double noise_floor = 0.0;
  std::vector<double> reference_norms;  ///< H-norm of the reference trace per radius
  /// Illusion only: H-norm of (virtual - homogeneous) per radius.
  std::vector<double> reference_gap;
};

ConvergenceReport cloaking_study(const media::CloakScenario& scenario, const StudyOptions& options);
ConvergenceReport illusion_study(const media::CloakScenario& scenario, const geometry::RadialTensorProfile& a_c,
                                 const geometry::ScalarProfile& sigma_c, const StudyOptions& options);

// ---- resonance --------------------------------------------------------------

struct LayerEnergy {
  std::size_t layer = 0;
  media::LayerRole role = media::LayerRole::homogeneous;
  double r_in = 0.0;
  double r_out = 0.0;
  std::vector<double> gradient;  ///< per delta
  std::vector<double> l2;
  double p_gradient = 0.0;  ///< energy ~ delta^{-p}
  double p_l2 = 0.0;
  double p = 0.0;  ///< of gradient + l2
};

struct ResonanceReport {
  std::vector<double> deltas;
  std::vector<bool> resonance;
  std::vector<LayerEnergy> layers;
  std::vector<double> global;  ///< H^1 energy over the whole domain, per delta
  double p_global = 0.0;
  double p_exterior = 0.0;
};

ResonanceReport resonance_profile(const media::CloakScenario& scenario, const StudyOptions& options);

// ---- removing the localized singularity --------------------------------------

struct ReflectionCoefficients {
  double ac = 0.0;
  double bc = 0.0;
  double ac_leading = 0.0;  ///< leading large-n term
  double bc_leading = 0.0;
};

/// AC_n = -Y^/(J^ Y^' - J^' Y^)(k r3), BC_n = -J^/(Y^ J^' - Y^' J^)(k r3), with
/// raw J_0, Y_0 for n = 0 in d = 2. Leading terms (n >= 1):
///   d = 2:  r3^{1-n} / (2n),      -r3^{1+n} / (2n)
///   d = 3:  r3^{1-n} / (2n+1),    -r3^{n+2} / (2n+1)
ReflectionCoefficients reflection_coefficients(int n, double r3, double k, int d);

/// (a, b) with a J^_n(k r) + b Y^_n(k r) matching the given value and
/// r-derivative at r (raw J_0, Y_0 for n = 0 in d = 2).
std::array<complex, 2> hatted_split(int n, double k, double r, int d, complex value, complex derivative);

struct DiagnosticMode {
  int n = 0;
  int m = 0;
  complex c;  ///< radial derivative of u1 - u2 at r3
  complex a;
  complex b;
  bool skipped = false;
};

struct SingularityDiagnostic {
  double delta = 0.0;
  std::vector<DiagnosticMode> modes;
  double jump_r3 = 0.0;         ///< H-norm of [U] and [dU/dr] on |x| = r3
  double jump_gamma_r2 = 0.0;   ///< same on |x| = gamma r2
  double residual = 0.0;        ///< misfit of a J^ + b Y^ to u1 - u2 at gamma r2 (H-norm)
  double field_norm = 0.0;      ///< H-norm of u_delta on |x| = r3
};

/// u1 = u o F^{-1}, u2 = u1 o G^{-1}; expands u1 - u2 on (gamma r2, r3) from its
/// Cauchy data at r3 and glues U = u outside r3, u - u^ on the annulus, u2
/// inside gamma r2. The correction V1 is not built; its O(delta) share stays in
/// the residual.
SingularityDiagnostic singularity_diagnostic(const media::CloakScenario& scenario, double delta,
                                             const StudyOptions& options = {});

// ---- output -----------------------------------------------------------------

void write_csv(std::ostream& out, const ConvergenceReport& report);
void write_csv(std::ostream& out, const ResonanceReport& report);
void write_csv(std::ostream& out, const HelmholtzSuite& suite);
void write_summary_csv(std::ostream& out, const HelmholtzSuite& suite);
void write_csv(std::ostream& out, const Counterexample& c);
void write_csv(std::ostream& out, const std::vector<SingularityDiagnostic>& diagnostics);

nlohmann::json to_json(const ConvergenceReport& report);
nlohmann::json to_json(const ResonanceReport& report);
nlohmann::json to_json(const HelmholtzSuite& suite);
nlohmann::json to_json(const Counterexample& c);

}  // namespace negalens::analysis
