#pragma once

#include <complex>
#include <vector>

namespace negalens::modal {

/// One angular component of a ring source. For d = 2 the angular factor is
/// e^{i n theta}; for d = 3 it is the orthonormal harmonic Y_n^m.
struct SourceMode {
  int n = 0;
  int m = 0;
  std::complex<double> amplitude;
};

/// f = delta(|x| - radius) * sum_n amplitude_n * angular_n. Each mode imposes a
/// jump of amplitude_n in the normal flux across |x| = radius.
struct SourceSpec {
  double radius = 3.0;
  std::vector<SourceMode> modes;

  /// Modes |n| <= n_max with unit amplitude (d = 2) or degrees n <= n_max,
  /// m = 0 (d = 3).
  static SourceSpec uniform(double radius, int n_max, int dimension);
};

}  // namespace negalens::modal
