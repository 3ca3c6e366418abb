#pragma once

// Integer-order Bessel and spherical Bessel functions of complex argument,
// plus the hatted normalizations used for the singular-part expansion.

#include <complex>
#include <vector>

namespace negalens::special {

using complex = std::complex<double>;

/// Supported envelope. Requests outside it raise std::range_error instead of
/// returning silently inaccurate values.
inline constexpr int kMaxOrder = 60;
inline constexpr double kMaxArgument = 100.0;

struct CylinderValues {
  complex j;
  complex y;
  complex dj;  ///< derivative with respect to the argument
  complex dy;
};

/// Values for all orders 0..n_max at one argument.
struct CylinderSequence {
  std::vector<complex> j;
  std::vector<complex> y;
  std::vector<complex> dj;
  std::vector<complex> dy;
};

/// J_n and its derivative only; defined at z = 0.
std::vector<complex> bessel_j_sequence(int n_max, complex z);
complex bessel_j(int n, complex z);

/// J_n, Y_n and derivatives for n = 0..n_max.
///
/// J comes from Miller's backward recurrence, normalized by the generating
/// function identity e^{-iz} = J_0 + 2 sum (-i)^k J_k (or its conjugate form)
/// for |z| <= 25 and by the Hankel asymptotic J_0/J_1 beyond. Y_0 and Y_1 come
/// from Neumann series over the J sequence (|z| <= 25) or Hankel asymptotics,
/// then forward recurrence.
///
/// Throws std::domain_error for z = 0 or arg z = pi, std::range_error outside
/// the envelope or when a value overflows.
CylinderSequence bessel_jy_sequence(int n_max, complex z);
CylinderValues bessel_jy(int n, complex z);

/// Spherical j_n, y_n and derivatives for n = 0..n_max.
CylinderSequence spherical_jy_sequence(int n_max, complex z);
CylinderValues spherical_jy(int n, complex z);

/// Spherical j_n for n = 0..n_max; defined at z = 0.
std::vector<complex> spherical_j_sequence(int n_max, complex z);

struct RegularValues {
  complex value;
  complex derivative;  ///< with respect to the argument
};

/// J_n (d = 2) or j_n (d = 3) and derivative, without touching the singular
/// member; defined at z = 0.
RegularValues regular_radial(int d, int n, complex z);

/// Radial solutions for dimension d: cylinder functions for d = 2, spherical
/// functions for d = 3.
CylinderValues radial_jy(int d, int n, complex z);

struct HattedValues {
  complex j;
  complex dj;
  complex y;
  complex dy;
};

/// Hatted pair normalized so that, as n grows with t fixed,
///   d = 2:  J^_n(t) ~ t^n,  Y^_n(t) ~ t^{-n}
///   d = 3:  j^_n(t) ~ t^n,  y^_n(t) ~ t^{-n-1}
/// with J^_n = 2^n n! J_n, Y^_n = -pi / (2^n (n-1)!) Y_n,
///      j^_n = (2n+1)!! j_n, y^_n = -y_n / (2n-1)!!.
/// Y^_0 is undefined for d = 2 (std::domain_error).
HattedValues hatted(int n, complex z, int d);

/// Multiplicative factors taking (J_n, Y_n) (or (j_n, y_n)) to the hatted pair.
double hatted_j_scale(int n, int d);
double hatted_y_scale(int n, int d);

}  // namespace negalens::special
