#include "negalens/media.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "negalens/special_functions.hpp"

namespace negalens::media {
namespace {

using geometry::Interval;
using geometry::PushWeight;

constexpr double kMinGamma = 1.0 + 1e-6;

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

std::string num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

Layer plain_layer(double r_in, double r_out, LayerRole role) {
  Layer l;
  l.r_in = r_in;
  l.r_out = r_out;
  l.role = role;
  return l;
}

// Complementary layer on F^{-1}(image) with F the Kelvin transform about r2.
Layer complementary_layer(const CloakScenario& s, Interval image, const RadialTensorProfile& tensor,
                          const ScalarProfile& sigma) {
  const int d = s.dimension;
  const RadialMap f_inverse = RadialMap::kelvin(s.r2, d, image);
  const geometry::PushedMedium pushed = geometry::push_forward(f_inverse, tensor, sigma);
  const Interval domain = f_inverse.image();
  Layer l;
  l.r_in = domain.lo;
  l.r_out = domain.hi;
  l.tensor = pushed.tensor;
  l.sigma = pushed.sigma;
  l.s_delta = complex(-1.0, s.delta);
  l.s_zero = -1.0;
  l.role = LayerRole::complementary;
  l.origin = LayerOrigin{RadialMap::kelvin(s.r2, d, domain), tensor, sigma};
  return l;
}

bool imaginary_part_nonnegative(const ScalarProfile& sigma, Interval interval) {
  const ScalarProfile rotated = complex(0.0, -1.0) * sigma;  // Re(-i s) = Im(s)
  return geometry::real_range(rotated, interval).min >= 0.0;
}

}  // namespace

std::string to_string(LayerRole role) {
  switch (role) {
    case LayerRole::homogeneous: return "homogeneous";
    case LayerRole::inner_fill: return "inner_fill";
    case LayerRole::complementary: return "complementary";
    case LayerRole::object: return "object";
    case LayerRole::shell: return "shell";
    case LayerRole::exterior: return "exterior";
    case LayerRole::illusion_core: return "illusion_core";
    case LayerRole::virtual_inclusion: return "virtual_inclusion";
  }
  return "unknown";
}

LayeredMedium::LayeredMedium(int dimension, std::vector<Layer> layers)
    : dimension_(dimension), layers_(std::move(layers)) {
  if (dimension_ != 2 && dimension_ != 3) fail("dimension must be 2 or 3");
  if (layers_.empty()) fail("medium needs at least one layer");
  if (layers_.front().r_in != 0.0) fail("innermost layer must start at r = 0");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (!(l.r_out > l.r_in)) fail("layer " + std::to_string(i) + " has r_out <= r_in");
    if (i > 0 && l.r_in != layers_[i - 1].r_out) {
      fail("layers " + std::to_string(i - 1) + " and " + std::to_string(i) + " are not contiguous");
    }
    if (l.s_zero != 1.0 && l.s_zero != -1.0) fail("s_zero must be +1 or -1");
    if ((l.s_delta.real() < 0.0) != (l.s_zero < 0.0)) {
      fail("s_zero must equal the sign of Re(s_delta) on layer " + std::to_string(i));
    }
  }
}

std::size_t LayeredMedium::layer_index(double r) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (r < layers_[i].r_out) return i;
  }
  return layers_.size() - 1;
}

std::vector<double> LayeredMedium::interfaces() const {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) out.push_back(layers_[i].r_out);
  return out;
}

LayeredMedium homogeneous_medium(int dimension, double outer_radius) {
  if (!(outer_radius > 0.0)) fail("outer radius must be positive");
  return LayeredMedium(dimension, {plain_layer(0.0, outer_radius, LayerRole::homogeneous)});
}

void check_scenario(const CloakScenario& s) {
  if (s.dimension != 2 && s.dimension != 3) fail("dimension must be 2 or 3");
  if (!(s.k > 0.0)) fail("wavenumber k must be positive");
  if (!(s.r2 > 0.0)) fail("r2 must be positive");
  if (!(s.gamma >= kMinGamma && s.gamma < 2.0)) fail("gamma must lie in [1 + 1e-6, 2), got " + num(s.gamma));
  if (!(s.gamma * s.r2 < s.r3)) fail("radii out of order: need gamma * r2 < r3");
  if (!(s.r3 < s.outer_radius)) fail("radii out of order: need r3 < R_omega");
  if (!(s.delta > 0.0 && s.delta < 1.0)) fail("delta must lie in (0, 1), got " + num(s.delta));
  if (!(s.source.radius > s.r3 && s.source.radius < s.outer_radius)) {
    fail("source radius must lie in (r3, R_omega)");
  }
  for (const modal::SourceMode& mode : s.source.modes) {
    const int order = s.dimension == 2 ? std::abs(mode.n) : mode.n;
    if (order > special::kMaxOrder || (s.dimension == 3 && (mode.n < 0 || std::abs(mode.m) > mode.n))) {
      fail("invalid source mode n = " + std::to_string(mode.n) + ", m = " + std::to_string(mode.m));
    }
  }
  const Interval object_zone{s.r2, s.gamma * s.r2};
  if (!(s.ellipticity_bound >= 1.0)) fail("ellipticity bound Lambda must be >= 1");
  const double lambda = geometry::ellipticity_constant(s.object.tensor, object_zone);
  if (!(lambda <= s.ellipticity_bound)) {
    fail("object violates ellipticity bounds: Lambda = " + num(lambda) + " > " + num(s.ellipticity_bound));
  }
  if (!imaginary_part_nonnegative(s.object.sigma, object_zone)) fail("object sigma must have Im(sigma) >= 0");
}

LayeredMedium build_cloak(const CloakScenario& s) {
  check_scenario(s);
  const int d = s.dimension;
  const double m = s.magnification();
  const double r1 = s.r1();
  const double object_out = s.gamma * s.r2;

  std::vector<Layer> layers;
  Layer inner = plain_layer(0.0, r1, LayerRole::inner_fill);
  inner.tensor = RadialTensorProfile::isotropic(ScalarProfile::constant(std::pow(m, d - 2)));
  inner.sigma = ScalarProfile::constant(std::pow(m, d));
  layers.push_back(inner);

  layers.push_back(complementary_layer(s, {object_out, s.r3}, RadialTensorProfile::identity(),
                                       ScalarProfile::constant(1.0)));
  layers.push_back(complementary_layer(s, {s.r2, object_out}, s.object.tensor, s.object.sigma));
  // Kelvin images land on r1 and r2 up to rounding; pin the tiling.
  layers[1].r_in = r1;
  layers[1].r_out = layers[2].r_in;
  layers[2].r_out = s.r2;

  Layer object = plain_layer(s.r2, object_out, LayerRole::object);
  object.tensor = s.object.tensor;
  object.sigma = s.object.sigma;
  layers.push_back(object);
  layers.push_back(plain_layer(object_out, s.r3, LayerRole::shell));
  layers.push_back(plain_layer(s.r3, s.outer_radius, LayerRole::exterior));
  return LayeredMedium(d, std::move(layers));
}

LayeredMedium build_illusion_device(const CloakScenario& s, const RadialTensorProfile& a_c,
                                    const ScalarProfile& sigma_c) {
  const LayeredMedium cloak = build_cloak(s);
  const double core = s.r2 / s.magnification();
  if (!(geometry::ellipticity_constant(a_c, {0.0, core}) < geometry::kInfinity)) fail("a_c must be elliptic");
  if (!imaginary_part_nonnegative(sigma_c, {0.0, core})) fail("sigma_c must have Im(sigma_c) >= 0");

  std::vector<Layer> layers;
  Layer inner_core = plain_layer(0.0, core, LayerRole::illusion_core);
  inner_core.tensor = a_c;
  inner_core.sigma = sigma_c;
  layers.push_back(inner_core);
  Layer rest = cloak.layers().front();
  rest.r_in = core;
  layers.push_back(rest);
  layers.insert(layers.end(), cloak.layers().begin() + 1, cloak.layers().end());
  return LayeredMedium(s.dimension, std::move(layers));
}

LayeredMedium build_virtual_medium(const CloakScenario& s, const RadialTensorProfile& a_c,
                                   const ScalarProfile& sigma_c) {
  check_scenario(s);
  const int d = s.dimension;
  const double m = s.magnification();
  const double core = s.r2 / m;
  if (!(geometry::ellipticity_constant(a_c, {0.0, core}) < geometry::kInfinity)) fail("a_c must be elliptic");
  if (!imaginary_part_nonnegative(sigma_c, {0.0, core})) fail("sigma_c must have Im(sigma_c) >= 0");

  const geometry::PushedMedium magnified =
      geometry::push_forward(RadialMap::dilation(m, d, {0.0, core}), a_c, sigma_c);
  Layer inclusion = plain_layer(0.0, s.r2, LayerRole::virtual_inclusion);
  inclusion.tensor = magnified.tensor;
  inclusion.sigma = magnified.sigma;
  return LayeredMedium(d, {inclusion, plain_layer(s.r2, s.r3, LayerRole::shell),
                           plain_layer(s.r3, s.outer_radius, LayerRole::exterior)});
}

ValidationReport validate(const LayeredMedium& medium) {
  ValidationReport report;
  const auto& layers = medium.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    LayerReport lr;
    lr.index = i;
    lr.r_in = l.r_in;
    lr.r_out = l.r_out;
    lr.role = l.role;
    lr.ellipticity = geometry::ellipticity_constant(l.tensor, {l.r_in, l.r_out});
    lr.s_delta = l.s_delta;
    lr.s_zero = l.s_zero;
    report.ellipticity = std::max(report.ellipticity, lr.ellipticity);
    report.layers.push_back(lr);

    if (l.s_zero < 0.0) {
      ++report.sign_changing_layer_count;
      if (!report.sign_changing_regions.empty() && report.sign_changing_regions.back().hi == l.r_in) {
        report.sign_changing_regions.back().hi = l.r_out;
      } else {
        report.sign_changing_regions.push_back({l.r_in, l.r_out});
      }
    }
    if (i + 1 < layers.size()) {
      const Layer& next = layers[i + 1];
      const double r = l.r_out;
      report.gaps.push_back({r, std::abs(next.tensor.alpha_r(r) - l.tensor.alpha_r(r)),
                             std::abs(next.tensor.alpha_t(r) - l.tensor.alpha_t(r)),
                             std::abs(next.sigma(r) - l.sigma(r))});
    }
  }
  return report;
}

nlohmann::json to_json(const ScalarProfile& profile) {
  if (profile.is_power_law()) {
    const auto& pl = profile.power_law();
    return {{"kind", "power_law"}, {"re", pl.coefficient.real()}, {"im", pl.coefficient.imag()}, {"p", pl.exponent}};
  }
  const auto& pf = profile.pushed_form();
  const char* kind = pf.map.kind() == geometry::MapKind::kelvin     ? "kelvin"
                     : pf.map.kind() == geometry::MapKind::dilation ? "dilation"
                                                                    : "identity";
  return {{"kind", "pushed"},
          {"weight", pf.weight == PushWeight::tensor ? "tensor" : "scalar"},
          {"map", {{"kind", kind}, {"parameter", pf.map.parameter()}}},
          {"base", to_json(*pf.base)}};
}

nlohmann::json to_json(const LayeredMedium& medium) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : medium.layers()) {
    layers.push_back({{"r_in", l.r_in},
                      {"r_out", l.r_out},
                      {"role", to_string(l.role)},
                      {"alpha_r", to_json(l.tensor.alpha_r)},
                      {"alpha_t", to_json(l.tensor.alpha_t)},
                      {"sigma", to_json(l.sigma)},
                      {"s_delta", {{"re", l.s_delta.real()}, {"im", l.s_delta.imag()}}},
                      {"s_zero", l.s_zero}});
  }
  return {{"dimension", medium.dimension()}, {"outer_radius", medium.outer_radius()}, {"layers", layers}};
}

}  // namespace negalens::media
