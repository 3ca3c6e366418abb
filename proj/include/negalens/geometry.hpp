#pragma once

// Radial diffeomorphisms (Kelvin transforms, dilations) and the push-forward
// of radially symmetric media coefficients.
//
// Every supported map is a monomial rho(r) = c * r^e with e = +1 (dilation,
// identity) or e = -1 (Kelvin transform, c = r0^2). Its differential has the
// same stretch lambda(r) = c * r^(e-1) in the radial and tangential
// directions, so J = lambda^d and a radial tensor stays radial under
// push-forward:
//   alpha_r -> lambda^(2-d) alpha_r,  alpha_t -> lambda^(2-d) alpha_t,
//   sigma   -> lambda^(-d) sigma,
// all evaluated at the preimage radius.

#include <array>
#include <complex>
#include <limits>
#include <memory>
#include <variant>

namespace negalens::geometry {

using complex = std::complex<double>;
using Point = std::array<double, 3>;  ///< third component ignored for d = 2

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = 0.0;
  double hi = kInfinity;

  [[nodiscard]] bool contains(double r) const { return r >= lo && r <= hi; }
  [[nodiscard]] bool contains(const Interval& other, double rel_tol = 1e-12) const;
  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class MapKind { identity, dilation, kelvin };

class RadialMap {
 public:
  static RadialMap identity(int dimension, Interval domain = {});
  /// r -> r0^2 / r. Fixes |x| = r0, reverses the radial orientation.
  static RadialMap kelvin(double r0, int dimension, Interval domain = {});
  /// r -> factor * r.
  static RadialMap dilation(double factor, int dimension, Interval domain = {});

  [[nodiscard]] MapKind kind() const { return kind_; }
  /// r0 for Kelvin maps, the factor for dilations, 1 for the identity.
  [[nodiscard]] double parameter() const { return parameter_; }
  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] const Interval& domain() const { return domain_; }
  [[nodiscard]] Interval image() const;

  [[nodiscard]] double radius(double r) const;
  [[nodiscard]] double preimage_radius(double rho) const;
  /// d rho / d r (negative for Kelvin maps).
  [[nodiscard]] double radial_derivative(double r) const;
  /// rho(r) / r; equals |rho'(r)| for every supported map.
  [[nodiscard]] double stretch(double r) const;
  /// |det DT| at radius r.
  [[nodiscard]] double jacobian(double r) const;
  [[nodiscard]] bool reverses_orientation() const { return kind_ == MapKind::kelvin; }

  [[nodiscard]] Point apply(const Point& x) const;
  [[nodiscard]] RadialMap inverse() const;
  [[nodiscard]] RadialMap restricted(Interval domain) const;

  /// Monomial form rho = coefficient * r^exponent.
  [[nodiscard]] double coefficient() const;
  [[nodiscard]] int exponent() const { return kind_ == MapKind::kelvin ? -1 : 1; }

  friend bool operator==(const RadialMap&, const RadialMap&) = default;

 private:
  RadialMap(MapKind kind, double parameter, int dimension, Interval domain);

  MapKind kind_;
  double parameter_;
  int dimension_;
  Interval domain_;
};

/// Returns outer o inner in canonical form, e.g. kelvin(r3) o kelvin(r2) =
/// dilation(r3^2 / r2^2). Throws std::invalid_argument when the image of inner
/// does not lie in the domain of outer or the dimensions differ.
RadialMap compose(const RadialMap& outer, const RadialMap& inner);

inline RadialMap kelvin_map(double r0, int dimension) { return RadialMap::kelvin(r0, dimension); }

/// How a pushed-forward component is weighted by the map's stretch.
enum class PushWeight { tensor, scalar };

class ScalarProfile {
 public:
  struct PowerLaw {
    complex coefficient;
    double exponent = 0.0;
  };
  /// value(y) = lambda(x)^w * base(x), x = T^{-1}(y), w = 2 - d or -d.
  struct Pushed {
    std::shared_ptr<const ScalarProfile> base;
    RadialMap map;
    PushWeight weight;
  };

  ScalarProfile() : rep_(PowerLaw{1.0, 0.0}) {}
  static ScalarProfile constant(complex value);
  static ScalarProfile power_law(complex coefficient, double exponent);
  static ScalarProfile pushed(ScalarProfile base, RadialMap map, PushWeight weight);

  [[nodiscard]] complex operator()(double r) const;
  [[nodiscard]] bool is_power_law() const { return std::holds_alternative<PowerLaw>(rep_); }
  [[nodiscard]] bool is_constant() const;
  [[nodiscard]] const PowerLaw& power_law() const { return std::get<PowerLaw>(rep_); }
  [[nodiscard]] const Pushed& pushed_form() const { return std::get<Pushed>(rep_); }

  /// Same representation (power laws compare coefficients exactly).
  [[nodiscard]] bool same_as(const ScalarProfile& other) const;

 private:
  std::variant<PowerLaw, Pushed> rep_;
};

ScalarProfile operator*(complex factor, const ScalarProfile& profile);

/// Radial tensor stored by its eigenvalues: alpha_r on x/|x|, alpha_t on the
/// tangent space.
struct RadialTensorProfile {
  ScalarProfile alpha_r;
  ScalarProfile alpha_t;

  static RadialTensorProfile isotropic(ScalarProfile alpha) { return {alpha, alpha}; }
  static RadialTensorProfile identity() { return isotropic(ScalarProfile::constant(1.0)); }
  [[nodiscard]] bool is_isotropic() const { return alpha_r.same_as(alpha_t); }
};

struct PushedMedium {
  RadialTensorProfile tensor;
  ScalarProfile sigma;
};

/// Push-forward T_* a = DT a DT^T / J, T_* sigma = sigma / J. Power laws map to
/// power laws in closed form; other profiles are wrapped lazily.
/// Throws std::invalid_argument if the domain touches r = 0 for a Kelvin map.
PushedMedium push_forward(const RadialMap& map, const RadialTensorProfile& tensor,
                          const ScalarProfile& sigma);
ScalarProfile push_forward(const RadialMap& map, const ScalarProfile& profile, PushWeight weight);

struct RealRange {
  double min = 0.0;
  double max = 0.0;
};

/// Range of Re(profile) over the interval. Exact for power laws; pushed
/// profiles are bounded from their base range and the map's stretch range.
RealRange real_range(const ScalarProfile& profile, Interval interval);

/// Range of lambda(r)^w over the map's domain restricted to `interval`.
RealRange distortion_range(const RadialMap& map, Interval interval, PushWeight weight);

/// Smallest Lambda >= 1 with Re(alpha) in [1/Lambda, Lambda] for both
/// eigenvalues over the interval; infinity if not elliptic.
double ellipticity_constant(const RadialTensorProfile& tensor, Interval interval);

}  // namespace negalens::geometry
