#pragma once

// Separation of variables for div(s A grad u) + k^2 s_0 sigma u = f on B_R
// with u = 0 on the boundary, for radially layered media and ring sources.

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "negalens/geometry.hpp"
#include "negalens/media.hpp"
#include "negalens/source.hpp"
#include "negalens/trace.hpp"

namespace negalens::modal {

using geometry::complex;
using media::Layer;
using media::LayeredMedium;

/// n^2 for d = 2, n (n + 1) for d = 3.
double angular_eigenvalue(int n, int d);

/// (r^{d-1} s alpha_r u')' + r^{d-1} (k^2 s_0 sigma - l s alpha_t / r^2) u = 0
struct ModeOde {
  int dimension = 2;
  int order = 0;
  double k = 1.0;
  double ell = 0.0;
  complex s = 1.0;
  double s_zero = 1.0;
  geometry::RadialTensorProfile tensor = geometry::RadialTensorProfile::identity();
  geometry::ScalarProfile sigma = geometry::ScalarProfile::constant(1.0);
  /// k~ with k~^2 = k^2 s_0 sigma / (s alpha), principal root; only for
  /// constant isotropic layers.
  std::optional<complex> wavenumber;

  /// s alpha_r(r), the factor turning u' into the flux.
  [[nodiscard]] complex flux_factor(double r) const { return s * tensor.alpha_r(r); }
  /// k^2 s_0 sigma(r) - l s alpha_t(r) / r^2
  [[nodiscard]] complex potential(double r) const;
};

ModeOde effective_mode_ode(const Layer& layer, int n, double k, int d);

/// A solution value and its flux s alpha_r du/dr.
struct BasisValue {
  complex value;
  complex flux;
};
using BasisPair = std::array<BasisValue, 2>;

enum class PairKind {
  bessel,      ///< J/Y (or j/y) at the effective wavenumber
  power,       ///< r^n and its partner, for k~ = 0
  pullback,    ///< v(rho(r)) for an image-layer pair v
  integrated,  ///< adaptive Runge-Kutta from the layer midpoint
};

/// Two independent solutions on one layer, each scaled to unit size at the
/// layer midpoint. For bessel and power pairs member 0 is the one regular at
/// the origin.
class FundamentalPair {
 public:
  using Evaluator = std::function<BasisPair(double)>;
  using RegularEvaluator = std::function<BasisValue(double)>;

  /// Throws std::runtime_error if the Wronskian is below 1e-13 of its scale.
  /// `regular` evaluates member 0 alone (needed at r = 0).
  FundamentalPair(ModeOde ode, PairKind kind, Evaluator raw, double r_in, double r_out,
                  RegularEvaluator regular = {});

  [[nodiscard]] BasisPair operator()(double r) const;
  /// Member 0 only. Valid at r = 0 for bessel and power pairs.
  [[nodiscard]] BasisValue regular(double r) const;
  /// r^{d-1} (w1 flux2 - flux1 w2); constant on the layer.
  [[nodiscard]] complex wronskian(double r) const;
  [[nodiscard]] complex derivative(double r, complex flux) const { return flux / ode_.flux_factor(r); }

  [[nodiscard]] PairKind kind() const { return kind_; }
  [[nodiscard]] const ModeOde& ode() const { return ode_; }
  [[nodiscard]] double r_in() const { return r_in_; }
  [[nodiscard]] double r_out() const { return r_out_; }
  [[nodiscard]] bool regular_at_origin() const { return kind_ == PairKind::bessel || kind_ == PairKind::power; }

 private:
  ModeOde ode_;
  PairKind kind_;
  Evaluator raw_;
  RegularEvaluator regular_raw_;
  double r_in_;
  double r_out_;
  std::array<complex, 2> scale_{1.0, 1.0};
};

struct PairOptions {
  /// Integrate the ODE even when a closed form is available.
  bool force_integrated = false;
};

/// Closed-form pair when the layer is constant isotropic, the pullback of the
/// image pair when the layer records its origin, else an integrated pair.
FundamentalPair fundamental_pair(const Layer& layer, int n, double k, int d, PairOptions options = {});

enum class Side { inner, outer };

enum class Precision {
  standard,
  extended,  ///< long double residuals with iterative refinement
};

struct SolveOptions {
  Precision precision = Precision::standard;
  unsigned threads = 0;  ///< 0: hardware concurrency
  /// Reciprocal condition estimate below which the system counts as resonant.
  double min_rcond = 1e-15;
  double max_residual = 1e-9;
};

class ResonanceError : public std::runtime_error {
 public:
  ResonanceError(const std::string& what, int mode, double rcond)
      : std::runtime_error(what), mode_(mode), rcond_(rcond) {}
  [[nodiscard]] int mode() const { return mode_; }
  /// Reciprocal condition estimate of the scaled system.
  [[nodiscard]] double rcond() const { return rcond_; }

 private:
  int mode_;
  double rcond_;
};

struct Segment {
  double r_in = 0.0;
  double r_out = 0.0;
  std::size_t layer = 0;
  std::shared_ptr<const FundamentalPair> pair;
  complex a;
  complex b;
};

/// Radial profile of one angular order for a unit flux jump at the ring.
struct RadialSolution {
  int dimension = 2;
  int order = 0;
  double k = 1.0;
  double source_radius = 0.0;
  std::vector<Segment> segments;
  double residual = 0.0;  ///< relative to the system scale
  double rcond = 1.0;

  [[nodiscard]] BasisValue at(double r, std::optional<Side> side = {}) const;
  [[nodiscard]] complex derivative(double r, std::optional<Side> side = {}) const;
  /// True at a layer interface or at the source radius.
  [[nodiscard]] bool is_breakpoint(double r) const;
  [[nodiscard]] const Segment& segment_at(double r, std::optional<Side> side = {}) const;
};

RadialSolution solve_radial(const LayeredMedium& medium, int order, double k, double source_radius,
                            const SolveOptions& options = {});

/// One angular mode: amplitude times a shared radial solution.
class ModalField {
 public:
  ModalField() = default;
  ModalField(int n, int m, complex amplitude, std::shared_ptr<const RadialSolution> radial);

  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int m() const { return m_; }
  [[nodiscard]] complex amplitude() const { return amplitude_; }
  [[nodiscard]] bool is_zero() const { return amplitude_ == complex(0.0) || !radial_; }
  [[nodiscard]] const RadialSolution* radial() const { return radial_.get(); }

  [[nodiscard]] BasisValue at(double r, std::optional<Side> side = {}) const;
  [[nodiscard]] complex derivative(double r, std::optional<Side> side = {}) const;
  /// Per-segment coefficients (A, B) of the normalized pair, amplitude included.
  [[nodiscard]] std::vector<std::array<complex, 2>> coefficients() const;

 private:
  int n_ = 0;
  int m_ = 0;
  complex amplitude_;
  std::shared_ptr<const RadialSolution> radial_;
};

ModalField solve_mode(const LayeredMedium& medium, int n, double k, const SourceSpec& source,
                      const SolveOptions& options = {});

struct FieldSample {
  complex u;
  complex u_r;
  std::array<complex, 3> gradient;  ///< Cartesian; third entry zero for d = 2
};

class Field {
 public:
  int dimension = 2;
  double k = 1.0;
  double outer_radius = 0.0;
  int n_max = 0;
  std::vector<ModalField> modes;  ///< deterministic (n, m) order
  /// Largest |u_n| at the source radius over the top order, relative to the sum
  /// over all orders.
  double tail_estimate = 0.0;
  double max_residual = 0.0;
  double min_rcond = 1.0;

  [[nodiscard]] FieldSample evaluate(const geometry::Point& x, std::optional<Side> side = {}) const;
  /// theta is the polar angle for d = 3 and the planar angle for d = 2.
  [[nodiscard]] FieldSample evaluate_polar(double r, double theta, double phi = 0.0,
                                           std::optional<Side> side = {}) const;
  [[nodiscard]] const ModalField* find(int n, int m = 0) const;
  [[nodiscard]] std::size_t nonzero_modes() const;
};

/// Solves orders up to n_max; modes of the source above n_max are dropped.
/// Resonance failures propagate as ResonanceError carrying the mode index.
Field solve_field(const LayeredMedium& medium, double k, const SourceSpec& source, int n_max,
                  const SolveOptions& options = {});
Field homogeneous_reference(double k, const SourceSpec& source, double outer_radius, int dimension, int n_max,
                            const SolveOptions& options = {});

/// Modal coefficients of u and of s alpha_r du/dr on |x| = r. Throws
/// std::invalid_argument at a breakpoint without a side.
SphereTrace trace(const Field& field, double r, std::optional<Side> side = {});

/// Y_n^m(theta, phi) and its theta derivative; orthonormal, Condon-Shortley phase.
std::pair<complex, complex> spherical_harmonic(int n, int m, double theta, double phi);

/// 2 pi r for d = 2, r^2 for d = 3.
double sphere_measure(double r, int d);

struct Energy {
  double gradient = 0.0;  ///< integral of |grad u|^2
  double l2 = 0.0;        ///< integral of |u|^2
};

/// Energies over the shell r_a < |x| < r_b by adaptive Gauss-Kronrod
/// quadrature of the modal profiles.
Energy energy(const Field& field, double r_a, double r_b);

/// Integral of s A grad u . grad conj(u) over B_R.
complex sesquilinear_energy(const Field& field);
/// Integral of f conj(u) for the ring source.
complex source_pairing(const Field& field, const SourceSpec& source);

/// Columns r, theta, Re_u, Im_u, Re_ur, Im_ur; %.17g formatting.
void write_field_csv(std::ostream& out, const Field& field, const std::vector<double>& radii,
                     const std::vector<double>& thetas);

}  // namespace negalens::modal
