#include "negalens/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace negalens::special {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;
constexpr double kAsymptoticThreshold = 25.0;
constexpr double kRescaleAbove = 1e250;
constexpr double kRescaleBy = 1e-250;

void check_order(int n) {
  if (n < 0) throw std::domain_error("negative Bessel order " + std::to_string(n));
  if (n > kMaxOrder) {
    throw std::range_error("Bessel order " + std::to_string(n) + " exceeds supported maximum " +
                           std::to_string(kMaxOrder));
  }
}

void check_argument(complex z, bool allow_zero) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw std::domain_error("non-finite Bessel argument");
  }
  const double mod = std::abs(z);
  if (mod > kMaxArgument) {
    throw std::range_error("Bessel argument |z| = " + std::to_string(mod) +
                           " exceeds supported maximum " + std::to_string(kMaxArgument));
  }
  if (mod == 0.0 && !allow_zero) throw std::domain_error("Y_n has a pole at z = 0");
  if (z.imag() == 0.0 && z.real() < 0.0) {
    throw std::domain_error("Bessel argument on the branch cut arg z = pi");
  }
}

void check_finite(const std::vector<complex>& v, const char* what) {
  for (const complex& x : v) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) {
      throw std::range_error(std::string(what) + " overflows at the requested order/argument");
    }
  }
}

int miller_start(int n_max, double mod) {
  const int base = std::max(n_max, static_cast<int>(std::ceil(mod)));
  return base + 30 + static_cast<int>(std::ceil(4.0 * std::cbrt(mod + 1.0)));
}

// Hankel asymptotic P, Q for order nu at large |z|.
void hankel_pq(int nu, complex z, complex& p, complex& q) {
  const double mu = 4.0 * nu * nu;
  p = 1.0;
  q = 0.0;
  complex term = 1.0;
  const complex inv8z = 1.0 / (8.0 * z);
  for (int k = 1; k <= 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) * inv8z / static_cast<double>(k);
    if (k % 2 == 1) {
      q += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    } else {
      p += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    }
    if (std::abs(term) < 1e-18 || std::abs(term) > 1.0) break;
  }
}

void hankel_jy(int nu, complex z, complex& j, complex& y) {
  complex p;
  complex q;
  hankel_pq(nu, z, p, q);
  const complex chi = z - (0.5 * nu + 0.25) * kPi;
  const complex amp = std::sqrt(2.0 / (kPi * z));
  const complex c = std::cos(chi);
  const complex s = std::sin(chi);
  j = amp * (p * c - q * s);
  y = amp * (p * s + q * c);
}

// Unnormalized Miller sequence f_0..f_{n_top} for the recurrence
// f_{k-1} = (2k + shift) / z * f_k - f_{k+1}, started at order `start`.
// shift = 0 for cylinder, 1 for spherical functions. Values are rescaled on
// the fly; orders that underflow are below double range after normalization.
std::vector<complex> miller(int n_top, int start, complex z, int shift) {
  std::vector<complex> f(static_cast<std::size_t>(start) + 2, 0.0);
  f[static_cast<std::size_t>(start)] = 1e-280;
  for (int k = start; k >= 1; --k) {
    const auto i = static_cast<std::size_t>(k);
    f[i - 1] = (2.0 * k + shift) / z * f[i] - f[i + 1];
    if (std::abs(f[i - 1]) > kRescaleAbove) {
      for (std::size_t m = i - 1; m < f.size(); ++m) f[m] *= kRescaleBy;
    }
  }
  f.resize(static_cast<std::size_t>(n_top) + 1);
  return f;
}

}  // namespace

namespace {

// Miller sequence to order `top`, normalized; `top` must be at least the
// Miller start for the orders of interest.
std::vector<complex> normalized_j(int top, complex z) {
  std::vector<complex> f = miller(top, top, z, 0);
  complex scale;
  if (std::abs(z) <= kAsymptoticThreshold) {
    // Generating-function identity whose left side is large in modulus.
    const complex unit = z.imag() >= 0.0 ? complex(0.0, -1.0) : complex(0.0, 1.0);
    complex sum = f[0];
    complex power = 1.0;
    for (int k = 1; k <= top; ++k) {
      power *= unit;
      sum += 2.0 * power * f[static_cast<std::size_t>(k)];
    }
    scale = std::exp(unit * z) / sum;
  } else {
    complex j0;
    complex y0;
    complex j1;
    complex y1;
    hankel_jy(0, z, j0, y0);
    hankel_jy(1, z, j1, y1);
    scale = std::abs(f[0]) >= std::abs(f[1]) ? j0 / f[0] : j1 / f[1];
  }
  for (complex& v : f) v *= scale;
  return f;
}

}  // namespace

std::vector<complex> bessel_j_sequence(int n_max, complex z) {
  check_order(n_max);
  check_argument(z, /*allow_zero=*/true);
  if (std::abs(z) == 0.0) {
    std::vector<complex> j(static_cast<std::size_t>(n_max) + 1, 0.0);
    j[0] = 1.0;
    return j;
  }
  std::vector<complex> j = normalized_j(miller_start(n_max, std::abs(z)), z);
  j.resize(static_cast<std::size_t>(n_max) + 1);
  return j;
}

complex bessel_j(int n, complex z) { return bessel_j_sequence(n, z)[static_cast<std::size_t>(n)]; }

CylinderSequence bessel_jy_sequence(int n_max, complex z) {
  check_order(n_max);
  check_argument(z, /*allow_zero=*/false);
  const double mod = std::abs(z);
  const int n_work = std::max(n_max, 1);
  const auto work = static_cast<std::size_t>(n_work) + 1;

  CylinderSequence out;
  out.y.assign(work, 0.0);
  if (mod <= kAsymptoticThreshold) {
    // Neumann series for Y_0, Y_1 over the normalized J sequence.
    const int top = std::max(miller_start(n_work, mod), 2 * static_cast<int>(std::ceil(mod)) + 40);
    const std::vector<complex> jall = normalized_j(top, z);
    const complex log_term = std::log(0.5 * z) + kEulerGamma;
    complex s0 = 0.0;
    complex s1 = 0.0;
    for (int k = 1; 2 * k + 1 <= top; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      const auto i = static_cast<std::size_t>(2 * k);
      s0 += sign * jall[i] / static_cast<double>(k);
      s1 += sign * (jall[i - 1] - jall[i + 1]) / static_cast<double>(k);
    }
    out.y[0] = (2.0 / kPi) * log_term * jall[0] - (4.0 / kPi) * s0;
    out.y[1] = (2.0 / kPi) * log_term * jall[1] - (2.0 / kPi) * jall[0] / z + (2.0 / kPi) * s1;
    out.j.assign(jall.begin(), jall.begin() + static_cast<std::ptrdiff_t>(work));
  } else {
    out.j = normalized_j(miller_start(n_work, mod), z);
    out.j.resize(work);
    complex j0;
    complex j1;
    hankel_jy(0, z, j0, out.y[0]);
    hankel_jy(1, z, j1, out.y[1]);
  }
  for (int k = 1; k < n_work; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out.y[i + 1] = (2.0 * k) / z * out.y[i] - out.y[i - 1];
  }
  check_finite(out.y, "Y_n");

  out.dj.resize(work);
  out.dy.resize(work);
  out.dj[0] = -out.j[1];
  out.dy[0] = -out.y[1];
  for (int k = 1; k <= n_work; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out.dj[i] = out.j[i - 1] - static_cast<double>(k) / z * out.j[i];
    out.dy[i] = out.y[i - 1] - static_cast<double>(k) / z * out.y[i];
  }
  check_finite(out.dy, "Y_n'");
  const auto count = static_cast<std::size_t>(n_max) + 1;
  out.j.resize(count);
  out.y.resize(count);
  out.dj.resize(count);
  out.dy.resize(count);
  return out;
}

CylinderValues bessel_jy(int n, complex z) {
  const CylinderSequence s = bessel_jy_sequence(n, z);
  const auto i = static_cast<std::size_t>(n);
  return {s.j[i], s.y[i], s.dj[i], s.dy[i]};
}

CylinderSequence spherical_jy_sequence(int n_max, complex z) {
  check_order(n_max);
  check_argument(z, /*allow_zero=*/false);
  const double mod = std::abs(z);
  const int top = std::max(n_max, 1) + 1;
  const std::size_t count = static_cast<std::size_t>(n_max) + 1;

  const complex sz = std::sin(z);
  const complex cz = std::cos(z);
  const complex j0 = sz / z;
  const complex j1 = sz / (z * z) - cz / z;

  const int start = miller_start(top, mod);
  std::vector<complex> f = miller(top, start, z, 1);
  const complex scale = std::abs(j0) >= std::abs(j1) ? j0 / f[0] : j1 / f[1];

  CylinderSequence out;
  std::vector<complex> j(static_cast<std::size_t>(top) + 1);
  for (std::size_t k = 0; k < j.size(); ++k) j[k] = f[k] * scale;
  // Low orders from closed forms avoid normalization error where Miller is
  // not needed.
  j[0] = j0;
  if (mod > 0.5) j[1] = j1;

  std::vector<complex> y(static_cast<std::size_t>(top) + 1);
  y[0] = -cz / z;
  y[1] = -cz / (z * z) - sz / z;
  for (int k = 1; k < top; ++k) {
    y[static_cast<std::size_t>(k + 1)] =
        (2.0 * k + 1.0) / z * y[static_cast<std::size_t>(k)] - y[static_cast<std::size_t>(k - 1)];
  }

  out.j.assign(j.begin(), j.begin() + static_cast<std::ptrdiff_t>(count));
  out.y.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(count));
  check_finite(out.y, "y_n");
  out.dj.resize(count);
  out.dy.resize(count);
  out.dj[0] = -j[1];
  out.dy[0] = -y[1];
  for (int k = 1; k <= n_max; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out.dj[i] = j[i - 1] - (k + 1.0) / z * j[i];
    out.dy[i] = y[i - 1] - (k + 1.0) / z * y[i];
  }
  check_finite(out.dy, "y_n'");
  return out;
}

CylinderValues spherical_jy(int n, complex z) {
  const CylinderSequence s = spherical_jy_sequence(n, z);
  const auto i = static_cast<std::size_t>(n);
  return {s.j[i], s.y[i], s.dj[i], s.dy[i]};
}

std::vector<complex> spherical_j_sequence(int n_max, complex z) {
  check_order(n_max);
  check_argument(z, /*allow_zero=*/true);
  const auto count = static_cast<std::size_t>(n_max) + 1;
  if (std::abs(z) == 0.0) {
    std::vector<complex> j(count, 0.0);
    j[0] = 1.0;
    return j;
  }
  const int top = std::max(n_max, 1);
  std::vector<complex> f = miller(top, miller_start(top, std::abs(z)), z, 1);
  const complex j0 = std::sin(z) / z;
  const complex j1 = std::sin(z) / (z * z) - std::cos(z) / z;
  const bool use_j1 = std::abs(z) > 0.5 && std::abs(j1) > std::abs(j0);
  const complex scale = use_j1 ? j1 / f[1] : j0 / f[0];
  for (complex& v : f) v *= scale;
  f[0] = j0;
  if (std::abs(z) > 0.5) f[1] = j1;
  f.resize(count);
  return f;
}

RegularValues regular_radial(int d, int n, complex z) {
  check_order(n);
  if (n + 1 > kMaxOrder) throw std::range_error("order too large for the derivative recurrence");
  const auto i = static_cast<std::size_t>(n);
  if (d == 2) {
    const std::vector<complex> j = bessel_j_sequence(n + 1, z);
    const complex dj = n == 0 ? -j[1] : 0.5 * (j[i - 1] - j[i + 1]);
    return {j[i], dj};
  }
  if (d == 3) {
    const std::vector<complex> j = spherical_j_sequence(n + 1, z);
    const complex dj = n == 0 ? -j[1] : (static_cast<double>(n) * j[i - 1] - (n + 1.0) * j[i + 1]) / (2.0 * n + 1.0);
    return {j[i], dj};
  }
  throw std::invalid_argument("dimension must be 2 or 3");
}

CylinderValues radial_jy(int d, int n, complex z) {
  if (d == 2) return bessel_jy(n, z);
  if (d == 3) return spherical_jy(n, z);
  throw std::invalid_argument("dimension must be 2 or 3");
}

double hatted_j_scale(int n, int d) {
  check_order(n);
  double s = 1.0;
  if (d == 2) {
    for (int k = 1; k <= n; ++k) s *= 2.0 * k;  // 2^n n!
  } else if (d == 3) {
    for (int k = 1; k <= n; ++k) s *= 2.0 * k + 1.0;  // (2n+1)!!
  } else {
    throw std::invalid_argument("dimension must be 2 or 3");
  }
  return s;
}

double hatted_y_scale(int n, int d) {
  check_order(n);
  if (d == 2) {
    if (n == 0) throw std::domain_error("Y^_0 is undefined in two dimensions");
    double denom = std::ldexp(1.0, n);  // 2^n (n-1)!
    for (int k = 2; k <= n - 1; ++k) denom *= k;
    return -kPi / denom;
  }
  if (d == 3) {
    double denom = 1.0;  // (2n-1)!!
    for (int k = 1; k <= n; ++k) denom *= 2.0 * k - 1.0;
    return -1.0 / denom;
  }
  throw std::invalid_argument("dimension must be 2 or 3");
}

HattedValues hatted(int n, complex z, int d) {
  const double sj = hatted_j_scale(n, d);
  const double sy = hatted_y_scale(n, d);
  const CylinderValues v = radial_jy(d, n, z);
  return {sj * v.j, sj * v.dj, sy * v.y, sy * v.dy};
}

}  // namespace negalens::special
