#pragma once

#include <complex>
#include <vector>

namespace negalens {

/// Angular coefficients on the sphere |x| = radius of a field u and of its
/// normal flux M grad u . nu. For d = 2 the basis is e^{i n theta}; for d = 3 it
/// is the orthonormal Y_n^m.
struct SphereTrace {
  struct Mode {
    int n = 0;
    int m = 0;
    std::complex<double> u;
    std::complex<double> flux;
  };

  double radius = 1.0;
  int dimension = 2;
  std::vector<Mode> modes;
  bool has_flux = true;
};

/// Mode-wise difference; both traces must share radius and dimension. Modes
/// missing on one side count as zero.
SphereTrace operator-(const SphereTrace& a, const SphereTrace& b);
SphereTrace operator+(const SphereTrace& a, const SphereTrace& b);
SphereTrace operator*(std::complex<double> factor, const SphereTrace& t);

}  // namespace negalens
