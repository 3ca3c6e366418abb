#include "negalens/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace negalens {
namespace {

SphereTrace combine(const SphereTrace& a, const SphereTrace& b, double sign) {
  if (a.dimension != b.dimension || std::abs(a.radius - b.radius) > 1e-12 * std::max(1.0, a.radius)) {
    throw std::invalid_argument("traces live on different spheres");
  }
  std::map<std::pair<int, int>, SphereTrace::Mode> modes;
  for (const auto& m : a.modes) {
    auto& slot = modes[{m.n, m.m}];
    slot.n = m.n;
    slot.m = m.m;
    slot.u += m.u;
    slot.flux += m.flux;
  }
  for (const auto& m : b.modes) {
    auto& slot = modes[{m.n, m.m}];
    slot.n = m.n;
    slot.m = m.m;
    slot.u += sign * m.u;
    slot.flux += sign * m.flux;
  }
  SphereTrace out;
  out.radius = a.radius;
  out.dimension = a.dimension;
  out.has_flux = a.has_flux && b.has_flux;
  for (const auto& [key, m] : modes) out.modes.push_back(m);
  return out;
}

}  // namespace

SphereTrace operator-(const SphereTrace& a, const SphereTrace& b) { return combine(a, b, -1.0); }
SphereTrace operator+(const SphereTrace& a, const SphereTrace& b) { return combine(a, b, 1.0); }

SphereTrace operator*(std::complex<double> factor, const SphereTrace& t) {
  SphereTrace out = t;
  for (auto& m : out.modes) {
    m.u *= factor;
    m.flux *= factor;
  }
  return out;
}

}  // namespace negalens
