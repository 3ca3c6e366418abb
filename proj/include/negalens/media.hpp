#pragma once

// Layered radial media: the complementary-media cloak, the illusion device
// and its virtual counterpart.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "negalens/geometry.hpp"
#include "negalens/source.hpp"

namespace negalens::media {

using geometry::complex;
using geometry::RadialMap;
using geometry::RadialTensorProfile;
using geometry::ScalarProfile;

enum class LayerRole {
  homogeneous,
  inner_fill,      ///< magnified-space filling of B_{r1}
  complementary,   ///< negative layer on (r1, r2)
  object,          ///< cloaked object on (r2, gamma r2)
  shell,           ///< (I, 1) on (gamma r2, r3)
  exterior,        ///< (I, 1) outside B_{r3}
  illusion_core,   ///< (a_c, sigma_c) on B_{r2/m}
  virtual_inclusion,
};

std::string to_string(LayerRole role);

/// Where a layer's coefficients came from when they are a push-forward of an
/// image layer: coefficients = (to_image^{-1})_* (image tensor, image sigma).
struct LayerOrigin {
  RadialMap to_image;
  RadialTensorProfile image_tensor;
  ScalarProfile image_sigma;
};

struct Layer {
  double r_in = 0.0;
  double r_out = 0.0;
  RadialTensorProfile tensor = RadialTensorProfile::identity();
  ScalarProfile sigma = ScalarProfile::constant(1.0);
  complex s_delta = 1.0;
  double s_zero = 1.0;
  LayerRole role = LayerRole::homogeneous;
  std::optional<LayerOrigin> origin;
};

class LayeredMedium {
 public:
  /// Throws std::invalid_argument unless the layers tile (0, outer radius)
  /// contiguously and s_zero matches the sign of Re(s_delta).
  LayeredMedium(int dimension, std::vector<Layer> layers);

  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] double outer_radius() const { return layers_.back().r_out; }
  /// Index of the layer containing r; at an interface the outer layer wins.
  [[nodiscard]] std::size_t layer_index(double r) const;
  [[nodiscard]] std::vector<double> interfaces() const;

 private:
  int dimension_;
  std::vector<Layer> layers_;
};

/// Homogeneous (I, 1) ball of radius outer_radius.
LayeredMedium homogeneous_medium(int dimension, double outer_radius);

struct ObjectSpec {
  RadialTensorProfile tensor = RadialTensorProfile::identity();
  ScalarProfile sigma = ScalarProfile::constant(1.0);
};

struct CloakScenario {
  int dimension = 2;
  double k = 1.0;
  double r2 = 1.0;
  double r3 = 2.0;
  double gamma = 1.5;
  double delta = 1e-3;
  double outer_radius = 4.0;
  ObjectSpec object;
  modal::SourceSpec source;
  /// Declared ellipticity bound Lambda for the object.
  double ellipticity_bound = 10.0;

  [[nodiscard]] double r1() const { return r2 * r2 / r3; }
  [[nodiscard]] double magnification() const { return (r3 * r3) / (r2 * r2); }
};

/// Throws std::invalid_argument describing the first violated constraint.
void check_scenario(const CloakScenario& scenario);

/// Layers, inside out:
///   (0, r1)          (m^{d-2} I, m^d)
///   (r1, r2/gamma)   F^{-1}_*(I, 1),   s_delta = -1 + i delta
///   (r2/gamma, r2)   F^{-1}_*(a, sigma), s_delta = -1 + i delta
///   (r2, gamma r2)   (a, sigma)
///   (gamma r2, r3)   (I, 1)
///   (r3, R)          (I, 1)
/// with F the Kelvin transform about |x| = r2 and m = r3^2 / r2^2.
LayeredMedium build_cloak(const CloakScenario& scenario);

/// build_cloak with B_{r2/m} overwritten by (a_c, sigma_c).
LayeredMedium build_illusion_device(const CloakScenario& scenario, const RadialTensorProfile& a_c,
                                    const ScalarProfile& sigma_c);

/// (I, 1) outside B_{r2}; inside, the push-forward of (a_c, sigma_c) under the
/// dilation x -> m x, i.e. (m^{2-d} a_c(x/m), m^{-d} sigma_c(x/m)).
LayeredMedium build_virtual_medium(const CloakScenario& scenario, const RadialTensorProfile& a_c,
                                   const ScalarProfile& sigma_c);

struct LayerReport {
  std::size_t index = 0;
  double r_in = 0.0;
  double r_out = 0.0;
  LayerRole role = LayerRole::homogeneous;
  double ellipticity = 1.0;  ///< Lambda for the unsigned tensor on this layer
  complex s_delta = 1.0;
  double s_zero = 1.0;
};

struct InterfaceGap {
  double radius = 0.0;
  double alpha_r_jump = 0.0;
  double alpha_t_jump = 0.0;
  double sigma_jump = 0.0;
};

struct ValidationReport {
  std::vector<LayerReport> layers;
  double ellipticity = 1.0;  ///< max over layers
  /// Maximal contiguous radial intervals with s_zero = -1.
  std::vector<geometry::Interval> sign_changing_regions;
  std::vector<InterfaceGap> gaps;
  std::size_t sign_changing_layer_count = 0;
};

ValidationReport validate(const LayeredMedium& medium);

nlohmann::json to_json(const ScalarProfile& profile);
nlohmann::json to_json(const LayeredMedium& medium);

}  // namespace negalens::media
