#include "negalens/source.hpp"

#include <stdexcept>

namespace negalens::modal {

SourceSpec SourceSpec::uniform(double radius, int n_max, int dimension) {
  SourceSpec spec;
  spec.radius = radius;
  if (dimension == 2) {
    for (int n = -n_max; n <= n_max; ++n) spec.modes.push_back({n, 0, 1.0});
  } else if (dimension == 3) {
    for (int n = 0; n <= n_max; ++n) spec.modes.push_back({n, 0, 1.0});
  } else {
    throw std::invalid_argument("dimension must be 2 or 3");
  }
  return spec;
}

}  // namespace negalens::modal
