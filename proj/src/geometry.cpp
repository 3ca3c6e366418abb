#include "negalens/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace negalens::geometry {
namespace {

void check_dimension(int d) {
  if (d != 2 && d != 3) throw std::invalid_argument("dimension must be 2 or 3, got " + std::to_string(d));
}

void check_domain(const Interval& domain) {
  if (!(domain.lo >= 0.0) || !(domain.hi > domain.lo)) {
    throw std::invalid_argument("radial domain must satisfy 0 <= lo < hi");
  }
}

int weight_exponent(PushWeight weight, int d) { return weight == PushWeight::tensor ? 2 - d : -d; }

// r^p with the limits at 0 and infinity.
double radial_power(double r, double p) {
  if (p == 0.0) return 1.0;
  if (r == 0.0) return p > 0.0 ? 0.0 : kInfinity;
  if (std::isinf(r)) return p > 0.0 ? kInfinity : 0.0;
  return std::pow(r, p);
}

RealRange ordered(double a, double b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

bool Interval::contains(const Interval& other, double rel_tol) const {
  const auto slack = [rel_tol](double x) { return std::isinf(x) ? 0.0 : rel_tol * std::max(1.0, std::abs(x)); };
  return other.lo >= lo - slack(lo) && other.hi <= hi + slack(hi);
}

RadialMap::RadialMap(MapKind kind, double parameter, int dimension, Interval domain)
    : kind_(kind), parameter_(parameter), dimension_(dimension), domain_(domain) {
  check_dimension(dimension);
  check_domain(domain);
}

RadialMap RadialMap::identity(int dimension, Interval domain) {
  return RadialMap(MapKind::identity, 1.0, dimension, domain);
}

RadialMap RadialMap::kelvin(double r0, int dimension, Interval domain) {
  if (!(r0 > 0.0) || !std::isfinite(r0)) {
    throw std::invalid_argument("Kelvin radius must be positive, got " + std::to_string(r0));
  }
  return RadialMap(MapKind::kelvin, r0, dimension, domain);
}

RadialMap RadialMap::dilation(double factor, int dimension, Interval domain) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("dilation factor must be positive, got " + std::to_string(factor));
  }
  if (factor == 1.0) return identity(dimension, domain);
  return RadialMap(MapKind::dilation, factor, dimension, domain);
}

double RadialMap::coefficient() const {
  return kind_ == MapKind::kelvin ? parameter_ * parameter_ : parameter_;
}

double RadialMap::radius(double r) const {
  switch (kind_) {
    case MapKind::identity:
      return r;
    case MapKind::dilation:
      return parameter_ * r;
    case MapKind::kelvin:
      if (r == 0.0) return kInfinity;
      if (std::isinf(r)) return 0.0;
      return parameter_ * parameter_ / r;
  }
  return r;
}

double RadialMap::preimage_radius(double rho) const {
  switch (kind_) {
    case MapKind::identity:
      return rho;
    case MapKind::dilation:
      return rho / parameter_;
    case MapKind::kelvin:
      return radius(rho);
  }
  return rho;
}

Interval RadialMap::image() const {
  const double a = radius(domain_.lo);
  const double b = radius(domain_.hi);
  return {std::min(a, b), std::max(a, b)};
}

double RadialMap::radial_derivative(double r) const {
  return kind_ == MapKind::kelvin ? -stretch(r) : stretch(r);
}

double RadialMap::stretch(double r) const {
  if (kind_ == MapKind::kelvin) return parameter_ * parameter_ / (r * r);
  return parameter_;
}

double RadialMap::jacobian(double r) const { return std::pow(stretch(r), dimension_); }

Point RadialMap::apply(const Point& x) const {
  const int d = dimension_;
  double r2 = 0.0;
  for (int i = 0; i < d; ++i) r2 += x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
  double factor = 1.0;
  if (kind_ == MapKind::dilation) factor = parameter_;
  if (kind_ == MapKind::kelvin) {
    if (r2 == 0.0) throw std::domain_error("Kelvin transform is undefined at the origin");
    factor = parameter_ * parameter_ / r2;
  }
  Point y{0.0, 0.0, 0.0};
  for (int i = 0; i < d; ++i) y[static_cast<std::size_t>(i)] = factor * x[static_cast<std::size_t>(i)];
  return y;
}

RadialMap RadialMap::inverse() const {
  switch (kind_) {
    case MapKind::identity:
      return *this;
    case MapKind::dilation:
      return dilation(1.0 / parameter_, dimension_, image());
    case MapKind::kelvin:
      return kelvin(parameter_, dimension_, image());
  }
  return *this;
}

RadialMap RadialMap::restricted(Interval domain) const {
  if (!domain_.contains(domain)) throw std::invalid_argument("restriction leaves the map's domain");
  RadialMap out = *this;
  check_domain(domain);
  out.domain_ = domain;
  return out;
}

RadialMap compose(const RadialMap& outer, const RadialMap& inner) {
  if (outer.dimension() != inner.dimension()) {
    throw std::invalid_argument("cannot compose maps of different dimensions");
  }
  if (!outer.domain().contains(inner.image())) {
    throw std::invalid_argument("incompatible domains: image of inner map leaves domain of outer map");
  }
  const int d = inner.dimension();
  // rho_o(rho_i(r)) = c_o * (c_i r^e_i)^e_o
  const double c = outer.coefficient() * std::pow(inner.coefficient(), outer.exponent());
  const int e = outer.exponent() * inner.exponent();
  if (e == 1) {
    if (std::abs(c - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
      return RadialMap::identity(d, inner.domain());
    }
    return RadialMap::dilation(c, d, inner.domain());
  }
  return RadialMap::kelvin(std::sqrt(c), d, inner.domain());
}

ScalarProfile ScalarProfile::constant(complex value) { return power_law(value, 0.0); }

ScalarProfile ScalarProfile::power_law(complex coefficient, double exponent) {
  ScalarProfile p;
  p.rep_ = PowerLaw{coefficient, exponent};
  return p;
}

ScalarProfile ScalarProfile::pushed(ScalarProfile base, RadialMap map, PushWeight weight) {
  ScalarProfile p;
  p.rep_ = Pushed{std::make_shared<const ScalarProfile>(std::move(base)), std::move(map), weight};
  return p;
}

complex ScalarProfile::operator()(double r) const {
  if (const auto* pl = std::get_if<PowerLaw>(&rep_)) {
    return pl->exponent == 0.0 ? pl->coefficient : pl->coefficient * std::pow(r, pl->exponent);
  }
  const auto& pf = std::get<Pushed>(rep_);
  const double x = pf.map.preimage_radius(r);
  const double lambda = pf.map.stretch(x);
  return std::pow(lambda, weight_exponent(pf.weight, pf.map.dimension())) * (*pf.base)(x);
}

bool ScalarProfile::is_constant() const { return is_power_law() && power_law().exponent == 0.0; }

bool ScalarProfile::same_as(const ScalarProfile& other) const {
  if (is_power_law() && other.is_power_law()) {
    return power_law().coefficient == other.power_law().coefficient &&
           power_law().exponent == other.power_law().exponent;
  }
  if (!is_power_law() && !other.is_power_law()) {
    const auto& a = pushed_form();
    const auto& b = other.pushed_form();
    return a.map == b.map && a.weight == b.weight && a.base->same_as(*b.base);
  }
  return false;
}

ScalarProfile operator*(complex factor, const ScalarProfile& profile) {
  if (profile.is_power_law()) {
    return ScalarProfile::power_law(factor * profile.power_law().coefficient, profile.power_law().exponent);
  }
  const auto& pf = profile.pushed_form();
  return ScalarProfile::pushed(factor * *pf.base, pf.map, pf.weight);
}

ScalarProfile push_forward(const RadialMap& map, const ScalarProfile& profile, PushWeight weight) {
  if (map.kind() == MapKind::identity) return profile;
  if (!profile.is_power_law()) return ScalarProfile::pushed(profile, map, weight);
  // base b r^p, lambda = c r^(e-1), r = (y/c)^e:
  //   value(y) = b c^w (y/c)^(e (w (e-1) + p))
  const double w = weight_exponent(weight, map.dimension());
  const double c = map.coefficient();
  const double e = map.exponent();
  const double p = profile.power_law().exponent;
  const double q = e * (w * (e - 1.0) + p);
  const double scale = std::pow(c, w - q);
  return ScalarProfile::power_law(profile.power_law().coefficient * scale, q);
}

PushedMedium push_forward(const RadialMap& map, const RadialTensorProfile& tensor, const ScalarProfile& sigma) {
  return {{push_forward(map, tensor.alpha_r, PushWeight::tensor), push_forward(map, tensor.alpha_t, PushWeight::tensor)},
          push_forward(map, sigma, PushWeight::scalar)};
}

RealRange distortion_range(const RadialMap& map, Interval interval, PushWeight weight) {
  const double w = weight_exponent(weight, map.dimension());
  const double lo = std::max(interval.lo, map.domain().lo);
  const double hi = std::min(interval.hi, map.domain().hi);
  if (map.kind() != MapKind::kelvin) {
    const double v = std::pow(map.stretch(lo), w);
    return {v, v};
  }
  // lambda = r0^2 r^-2, so lambda^w = r0^(2w) r^(-2w)
  const double c = std::pow(map.parameter(), 2.0 * w);
  return ordered(c * radial_power(lo, -2.0 * w), c * radial_power(hi, -2.0 * w));
}

RealRange real_range(const ScalarProfile& profile, Interval interval) {
  if (profile.is_power_law()) {
    const auto& pl = profile.power_law();
    const double re = pl.coefficient.real();
    if (re == 0.0) return {0.0, 0.0};
    return ordered(re * radial_power(interval.lo, pl.exponent), re * radial_power(interval.hi, pl.exponent));
  }
  const auto& pf = profile.pushed_form();
  const double a = pf.map.preimage_radius(interval.lo);
  const double b = pf.map.preimage_radius(interval.hi);
  const Interval pre{std::min(a, b), std::max(a, b)};
  const RealRange base = real_range(*pf.base, pre);
  const RealRange dist = distortion_range(pf.map, pre, pf.weight);
  const double corners[] = {base.min * dist.min, base.min * dist.max, base.max * dist.min, base.max * dist.max};
  return {*std::min_element(std::begin(corners), std::end(corners)),
          *std::max_element(std::begin(corners), std::end(corners))};
}

double ellipticity_constant(const RadialTensorProfile& tensor, Interval interval) {
  double lambda = 1.0;
  for (const ScalarProfile* alpha : {&tensor.alpha_r, &tensor.alpha_t}) {
    const RealRange range = real_range(*alpha, interval);
    if (!(range.min > 0.0) || std::isinf(range.max)) return kInfinity;
    lambda = std::max({lambda, range.max, 1.0 / range.min});
  }
  return lambda;
}

}  // namespace negalens::geometry
