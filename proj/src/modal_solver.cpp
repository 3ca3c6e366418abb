#include "negalens/modal_solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "negalens/format.hpp"
#include "negalens/parallel.hpp"
#include "negalens/special_functions.hpp"

namespace negalens::modal {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBreakTol = 1e-12;

double radial_weight(double r, int d) { return d == 2 ? r : r * r; }  // r^{d-1}

// ---- pairs ----------------------------------------------------------------

FundamentalPair bessel_pair(const ModeOde& ode, double r_in, double r_out) {
  const complex kt = *ode.wavenumber;
  const int d = ode.dimension;
  const int n = ode.order;
  auto raw = [ode, kt, d, n](double r) -> BasisPair {
    const special::CylinderValues v = special::radial_jy(d, n, kt * r);
    const complex f = ode.flux_factor(r) * kt;
    return {BasisValue{v.j, f * v.dj}, BasisValue{v.y, f * v.dy}};
  };
  auto regular = [ode, kt, d, n](double r) -> BasisValue {
    const special::RegularValues v = special::regular_radial(d, n, kt * r);
    return {v.value, ode.flux_factor(r) * kt * v.derivative};
  };
  return {ode, PairKind::bessel, raw, r_in, r_out, regular};
}

FundamentalPair power_pair(const ModeOde& ode, double r_in, double r_out) {
  const int d = ode.dimension;
  const double n = ode.order;
  auto regular = [ode, n](double r) -> BasisValue {
    const double value = std::pow(r, n);
    const double deriv = n == 0.0 ? 0.0 : n * std::pow(r, n - 1.0);
    return {value, ode.flux_factor(r) * deriv};
  };
  auto raw = [ode, n, d, regular](double r) -> BasisPair {
    BasisValue second;
    if (d == 2 && n == 0.0) {
      second = {std::log(r), ode.flux_factor(r) / r};
    } else {
      const double p = d == 2 ? -n : -n - 1.0;
      second = {std::pow(r, p), ode.flux_factor(r) * p * std::pow(r, p - 1.0)};
    }
    return {regular(r), second};
  };
  return {ode, PairKind::power, raw, r_in, r_out, regular};
}

using OdeState = std::array<double, 8>;

// Step control relative to the size of each member's whole state. The
// componentwise default stalls where a component crosses zero and cannot
// follow a member that decays by many orders across the layer.
struct MemberNormChecker {
  double rtol = 1e-10;

  template <class Algebra>
  double error(Algebra&, const OdeState& x, const OdeState&, OdeState& err, double) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      double size = 0.0;
      double e = 0.0;
      for (std::size_t c = 4 * j; c < 4 * j + 4; ++c) {
        size = std::max(size, std::abs(x[c]));
        e = std::max(e, std::abs(err[c]));
      }
      if (size > 0.0) worst = std::max(worst, e / (rtol * size));
    }
    return worst;
  }
};

FundamentalPair integrated_pair(const ModeOde& ode, double r_in, double r_out) {
  const double mid = 0.5 * (r_in + r_out);
  const int d = ode.dimension;
  auto raw = [ode, mid, d](double r) -> BasisPair {
    const double wmid = radial_weight(mid, d);
    const complex p2 = wmid * ode.flux_factor(mid) / mid;
    OdeState x{1.0, 0.0, 0.0, 0.0, 0.0, 0.0, p2.real(), p2.imag()};
    if (r != mid) {
      auto rhs = [&ode, d](const OdeState& s, OdeState& ds, double t) {
        const double w = radial_weight(t, d);
        const complex fac = ode.flux_factor(t) * w;
        const complex q = ode.potential(t) * w;
        for (int j = 0; j < 2; ++j) {
          const complex u(s[4 * j], s[4 * j + 1]);
          const complex p(s[4 * j + 2], s[4 * j + 3]);
          const complex du = p / fac;
          const complex dp = -q * u;
          ds[4 * j] = du.real();
          ds[4 * j + 1] = du.imag();
          ds[4 * j + 2] = dp.real();
          ds[4 * j + 3] = dp.imag();
        }
      };
      namespace odeint = boost::numeric::odeint;
      using Dopri = odeint::runge_kutta_dopri5<OdeState>;
      odeint::controlled_runge_kutta<Dopri, MemberNormChecker> stepper{MemberNormChecker{}};
      std::size_t steps = 0;
      odeint::integrate_adaptive(stepper, rhs, x, mid, r, (r - mid) / 64.0, [&steps](const OdeState&, double) {
        if (++steps > 1'000'000) throw std::runtime_error("ODE integration exceeded 1e6 steps");
      });
    }
    const double w = radial_weight(r, d);
    return {BasisValue{complex(x[0], x[1]), complex(x[2], x[3]) / w},
            BasisValue{complex(x[4], x[5]), complex(x[6], x[7]) / w}};
  };
  return {ode, PairKind::integrated, raw, r_in, r_out};
}

FundamentalPair pullback_pair(const Layer& layer, const ModeOde& ode, int n, double k, int d) {
  const media::LayerOrigin& origin = *layer.origin;
  const geometry::Interval img = origin.to_image.image();
  Layer image;
  image.r_in = img.lo;
  image.r_out = img.hi;
  image.tensor = origin.image_tensor;
  // div(s A grad w) + k^2 s0 sigma w = 0 is div(A grad w) + k^2 (s0/s) sigma w = 0.
  image.sigma = (layer.s_zero / layer.s_delta) * origin.image_sigma;
  auto image_pair = std::make_shared<const FundamentalPair>(fundamental_pair(image, n, k, d));
  const geometry::RadialMap map = origin.to_image;
  auto raw = [ode, map, image_pair](double r) -> BasisPair {
    const double rho = map.radius(r);
    const double drho = map.radial_derivative(r);
    const BasisPair v = (*image_pair)(rho);
    const complex image_factor = image_pair->ode().flux_factor(rho);
    const complex f = ode.flux_factor(r) * drho / image_factor;
    return {BasisValue{v[0].value, f * v[0].flux}, BasisValue{v[1].value, f * v[1].flux}};
  };
  return {ode, PairKind::pullback, raw, layer.r_in, layer.r_out};
}

}  // namespace

double angular_eigenvalue(int n, int d) {
  if (d == 2) return static_cast<double>(n) * n;
  if (d == 3) return static_cast<double>(n) * (n + 1);
  throw std::invalid_argument("dimension must be 2 or 3");
}

complex ModeOde::potential(double r) const {
  return k * k * s_zero * sigma(r) - ell * s * tensor.alpha_t(r) / (r * r);
}

ModeOde effective_mode_ode(const Layer& layer, int n, double k, int d) {
  ModeOde ode;
  ode.dimension = d;
  ode.order = n;
  ode.k = k;
  ode.ell = angular_eigenvalue(n, d);
  ode.s = layer.s_delta;
  ode.s_zero = layer.s_zero;
  ode.tensor = layer.tensor;
  ode.sigma = layer.sigma;
  if (layer.tensor.is_isotropic() && layer.tensor.alpha_r.is_constant() && layer.sigma.is_constant()) {
    const complex alpha = layer.tensor.alpha_r.power_law().coefficient;
    const complex sigma = layer.sigma.power_law().coefficient;
    ode.wavenumber = std::sqrt(k * k * layer.s_zero * sigma / (layer.s_delta * alpha));
  }
  return ode;
}

FundamentalPair::FundamentalPair(ModeOde ode, PairKind kind, Evaluator raw, double r_in, double r_out,
                                 RegularEvaluator regular)
    : ode_(std::move(ode)),
      kind_(kind),
      raw_(std::move(raw)),
      regular_raw_(std::move(regular)),
      r_in_(r_in),
      r_out_(r_out) {
  const double mid = 0.5 * (r_in + r_out);
  const BasisPair v = raw_(mid);
  const complex factor = ode_.flux_factor(mid);
  for (std::size_t i = 0; i < 2; ++i) {
    const double size = std::max(std::abs(v[i].value), std::abs(v[i].flux / factor) * mid);
    if (!(size > 0.0) || !std::isfinite(size)) throw std::runtime_error("degenerate fundamental pair");
    scale_[i] = 1.0 / size;
  }
  const double w = radial_weight(mid, ode_.dimension);
  const BasisPair s = (*this)(mid);
  const double ref = w * (std::abs(s[0].value * s[1].flux) + std::abs(s[0].flux * s[1].value));
  if (std::abs(wronskian(mid)) < 1e-13 * ref) throw std::runtime_error("degenerate fundamental pair");
}

BasisPair FundamentalPair::operator()(double r) const {
  BasisPair v = raw_(r);
  for (std::size_t i = 0; i < 2; ++i) {
    v[i].value *= scale_[i];
    v[i].flux *= scale_[i];
  }
  return v;
}

BasisValue FundamentalPair::regular(double r) const {
  BasisValue v = regular_raw_ ? regular_raw_(r) : raw_(r)[0];
  v.value *= scale_[0];
  v.flux *= scale_[0];
  return v;
}

complex FundamentalPair::wronskian(double r) const {
  const BasisPair v = (*this)(r);
  return radial_weight(r, ode_.dimension) * (v[0].value * v[1].flux - v[0].flux * v[1].value);
}

FundamentalPair fundamental_pair(const Layer& layer, int n, double k, int d, PairOptions options) {
  const ModeOde ode = effective_mode_ode(layer, n, k, d);
  if (options.force_integrated) return integrated_pair(ode, layer.r_in, layer.r_out);
  if (ode.wavenumber) {
    if (*ode.wavenumber == complex(0.0)) return power_pair(ode, layer.r_in, layer.r_out);
    return bessel_pair(ode, layer.r_in, layer.r_out);
  }
  if (layer.origin) return pullback_pair(layer, ode, n, k, d);
  return integrated_pair(ode, layer.r_in, layer.r_out);
}

// ---- radial solve -----------------------------------------------------------

const Segment& RadialSolution::segment_at(double r, std::optional<Side> side) const {
  if (r < 0.0) throw std::domain_error("negative radius");
  const double tol = kBreakTol * std::max(1.0, r);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    if (std::abs(r - seg.r_out) <= tol) {
      if (side == Side::inner || i + 1 == segments.size()) return seg;
      return segments[i + 1];
    }
    if (r < seg.r_out) return seg;
  }
  throw std::out_of_range("radius " + std::to_string(r) + " outside the computational ball");
}

bool RadialSolution::is_breakpoint(double r) const {
  const double tol = kBreakTol * std::max(1.0, r);
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    if (std::abs(r - segments[i].r_out) <= tol) return true;
  }
  return false;
}

BasisValue RadialSolution::at(double r, std::optional<Side> side) const {
  const Segment& seg = segment_at(r, side);
  if (&seg == &segments.front()) {
    const BasisValue v = seg.pair->regular(r);
    return {seg.a * v.value, seg.a * v.flux};
  }
  const BasisPair v = (*seg.pair)(r);
  return {seg.a * v[0].value + seg.b * v[1].value, seg.a * v[0].flux + seg.b * v[1].flux};
}

complex RadialSolution::derivative(double r, std::optional<Side> side) const {
  const Segment& seg = segment_at(r, side);
  return seg.pair->derivative(r, at(r, side).flux);
}

RadialSolution solve_radial(const LayeredMedium& medium, int order, double k, double source_radius,
                            const SolveOptions& options) {
  const int d = medium.dimension();
  const double outer = medium.outer_radius();
  if (!(source_radius > 0.0 && source_radius < outer)) {
    throw std::invalid_argument("source radius must lie inside the computational ball");
  }
  const auto& layers = medium.layers();
  std::vector<std::shared_ptr<const FundamentalPair>> pairs;
  pairs.reserve(layers.size());
  for (const Layer& layer : layers) {
    pairs.push_back(std::make_shared<const FundamentalPair>(fundamental_pair(layer, order, k, d)));
  }
  if (!pairs.front()->regular_at_origin()) {
    throw std::invalid_argument("innermost layer must be constant isotropic");
  }

  RadialSolution sol;
  sol.dimension = d;
  sol.order = order;
  sol.k = k;
  sol.source_radius = source_radius;
  const double tol = kBreakTol * std::max(1.0, source_radius);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (source_radius > layer.r_in + tol && source_radius < layer.r_out - tol) {
      sol.segments.push_back({layer.r_in, source_radius, i, pairs[i], 0.0, 0.0});
      sol.segments.push_back({source_radius, layer.r_out, i, pairs[i], 0.0, 0.0});
    } else {
      sol.segments.push_back({layer.r_in, layer.r_out, i, pairs[i], 0.0, 0.0});
    }
  }

  // Unknowns: a_0, then (a_i, b_i) for i >= 1.
  const std::size_t count = sol.segments.size();
  const auto size = static_cast<Eigen::Index>(2 * count - 1);
  auto column = [](std::size_t seg, int member) -> Eigen::Index {
    return seg == 0 ? 0 : static_cast<Eigen::Index>(2 * seg - 1 + static_cast<std::size_t>(member));
  };
  auto values = [&](std::size_t seg, double r) -> BasisPair {
    if (seg == 0) return {sol.segments[0].pair->regular(r), BasisValue{}};
    return (*sol.segments[seg].pair)(r);
  };
  const int members_first = 1;
  auto members = [&](std::size_t seg) { return seg == 0 ? members_first : 2; };

  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(size, size);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(size);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    const double r = sol.segments[i].r_out;
    const BasisPair left = values(i, r);
    const BasisPair right = values(i + 1, r);
    for (int j = 0; j < members(i); ++j) {
      a(row, column(i, j)) = left[static_cast<std::size_t>(j)].value;
      a(row + 1, column(i, j)) = left[static_cast<std::size_t>(j)].flux;
    }
    for (int j = 0; j < 2; ++j) {
      a(row, column(i + 1, j)) = -right[static_cast<std::size_t>(j)].value;
      a(row + 1, column(i + 1, j)) = -right[static_cast<std::size_t>(j)].flux;
    }
    // flux(outer) - flux(inner) = 1 at the ring
    if (std::abs(r - source_radius) <= tol) rhs(row + 1) = -1.0;
    row += 2;
  }
  {
    const std::size_t last = count - 1;
    const BasisPair v = values(last, outer);
    for (int j = 0; j < members(last); ++j) a(row, column(last, j)) = v[static_cast<std::size_t>(j)].value;
  }

  Eigen::VectorXd row_scale(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const double m = a.row(i).cwiseAbs().maxCoeff();
    row_scale(i) = m > 0.0 ? 1.0 / m : 1.0;
  }
  a = row_scale.asDiagonal() * a;
  rhs = row_scale.asDiagonal() * rhs;
  Eigen::VectorXd col_scale(size);
  for (Eigen::Index j = 0; j < size; ++j) {
    const double m = a.col(j).cwiseAbs().maxCoeff();
    col_scale(j) = m > 0.0 ? 1.0 / m : 1.0;
  }
  a = a * col_scale.asDiagonal();

  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  sol.rcond = lu.rcond();
  if (std::isnan(sol.rcond)) sol.rcond = 0.0;
  if (!(sol.rcond >= options.min_rcond)) {
    throw ResonanceError("near-singular system for order " + std::to_string(order) +
                             " (rcond " + format_double(sol.rcond) + ")",
                         order, sol.rcond);
  }
  Eigen::VectorXcd x = lu.solve(rhs);
  if (options.precision == Precision::extended) {
    using ComplexL = std::complex<long double>;
    for (int iter = 0; iter < 3; ++iter) {
      Eigen::VectorXcd res(size);
      for (Eigen::Index i = 0; i < size; ++i) {
        ComplexL acc = ComplexL(rhs(i));
        for (Eigen::Index j = 0; j < size; ++j) acc -= ComplexL(a(i, j)) * ComplexL(x(j));
        res(i) = complex(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
      }
      x += lu.solve(res);
    }
  }
  const double a_norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  const double scale = a_norm * x.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
  sol.residual = (a * x - rhs).cwiseAbs().maxCoeff() / scale;
  if (!(sol.residual <= options.max_residual)) {
    throw ResonanceError("residual " + format_double(sol.residual) + " too large for order " +
                             std::to_string(order),
                         order, sol.rcond);
  }
  x = col_scale.asDiagonal() * x;

  sol.segments[0].a = x(0);
  for (std::size_t i = 1; i < count; ++i) {
    sol.segments[i].a = x(column(i, 0));
    sol.segments[i].b = x(column(i, 1));
  }
  return sol;
}

// ---- modal fields ------------------------------------------------------------

ModalField::ModalField(int n, int m, complex amplitude, std::shared_ptr<const RadialSolution> radial)
    : n_(n), m_(m), amplitude_(amplitude), radial_(std::move(radial)) {}

BasisValue ModalField::at(double r, std::optional<Side> side) const {
  if (is_zero()) return {};
  const BasisValue v = radial_->at(r, side);
  return {amplitude_ * v.value, amplitude_ * v.flux};
}

complex ModalField::derivative(double r, std::optional<Side> side) const {
  if (is_zero()) return 0.0;
  return amplitude_ * radial_->derivative(r, side);
}

std::vector<std::array<complex, 2>> ModalField::coefficients() const {
  std::vector<std::array<complex, 2>> out;
  if (!radial_) return out;
  for (const Segment& seg : radial_->segments) out.push_back({amplitude_ * seg.a, amplitude_ * seg.b});
  return out;
}

namespace {

int radial_order(int n, int d) { return d == 2 ? std::abs(n) : n; }

complex source_amplitude(const SourceSpec& source, int n, int m) {
  complex total = 0.0;
  for (const SourceMode& mode : source.modes) {
    if (mode.n == n && mode.m == m) total += mode.amplitude;
  }
  return total;
}

void check_source(const SourceSpec& source, int d) {
  for (const SourceMode& mode : source.modes) {
    if (d == 3 && (mode.n < 0 || std::abs(mode.m) > mode.n)) {
      throw std::invalid_argument("source mode (n, m) must satisfy 0 <= |m| <= n in three dimensions");
    }
    if (d == 2 && mode.m != 0) throw std::invalid_argument("source modes carry m = 0 in two dimensions");
  }
}

}  // namespace

ModalField solve_mode(const LayeredMedium& medium, int n, double k, const SourceSpec& source,
                      const SolveOptions& options) {
  const int d = medium.dimension();
  check_source(source, d);
  const complex amp = source_amplitude(source, n, 0);
  if (amp == complex(0.0)) return ModalField(n, 0, 0.0, nullptr);
  try {
    auto radial = std::make_shared<const RadialSolution>(
        solve_radial(medium, radial_order(n, d), k, source.radius, options));
    return ModalField(n, 0, amp, std::move(radial));
  } catch (const ResonanceError& e) {
    throw ResonanceError(e.what(), n, e.rcond());
  }
}

Field solve_field(const LayeredMedium& medium, double k, const SourceSpec& source, int n_max,
                  const SolveOptions& options) {
  const int d = medium.dimension();
  check_source(source, d);
  if (n_max < 0 || n_max + 1 > special::kMaxOrder) {
    throw std::invalid_argument("truncation order outside the special-function envelope");
  }

  // (n, m) -> amplitude, in deterministic order.
  std::map<std::pair<int, int>, complex> wanted;
  if (d == 2) {
    for (int n = -n_max; n <= n_max; ++n) wanted[{n, 0}] = 0.0;
  }
  for (const SourceMode& mode : source.modes) {
    if (std::abs(mode.n) > n_max) continue;
    wanted[{mode.n, mode.m}] += mode.amplitude;
  }

  std::vector<int> orders;
  for (const auto& [key, amp] : wanted) {
    if (amp != complex(0.0)) orders.push_back(radial_order(key.first, d));
  }
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());

  std::vector<std::shared_ptr<const RadialSolution>> solutions(orders.size());
  std::vector<std::exception_ptr> errors(orders.size());
  parallel_for(orders.size(), options.threads, [&](std::size_t i) {
    try {
      solutions[i] = std::make_shared<const RadialSolution>(solve_radial(medium, orders[i], k, source.radius, options));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ResonanceError& e) {
      throw ResonanceError(e.what(), orders[i], e.rcond());
    }
  }

  Field field;
  field.dimension = d;
  field.k = k;
  field.outer_radius = medium.outer_radius();
  field.n_max = n_max;
  int top_order = -1;
  for (const auto& [key, amp] : wanted) {
    std::shared_ptr<const RadialSolution> radial;
    if (amp != complex(0.0)) {
      const int order = radial_order(key.first, d);
      const auto it = std::lower_bound(orders.begin(), orders.end(), order);
      radial = solutions[static_cast<std::size_t>(it - orders.begin())];
      field.max_residual = std::max(field.max_residual, radial->residual);
      field.min_rcond = std::min(field.min_rcond, radial->rcond);
      top_order = std::max(top_order, order);
    }
    field.modes.emplace_back(key.first, key.second, amp, std::move(radial));
  }
  double total = 0.0;
  double top = 0.0;
  for (const ModalField& mode : field.modes) {
    if (mode.is_zero()) continue;
    const double size = std::abs(mode.at(source.radius).value);
    total += size;
    if (radial_order(mode.n(), d) == top_order) top = std::max(top, size);
  }
  field.tail_estimate = total > 0.0 ? top / total : 0.0;
  return field;
}

Field homogeneous_reference(double k, const SourceSpec& source, double outer_radius, int dimension, int n_max,
                            const SolveOptions& options) {
  return solve_field(media::homogeneous_medium(dimension, outer_radius), k, source, n_max, options);
}

const ModalField* Field::find(int n, int m) const {
  for (const ModalField& mode : modes) {
    if (mode.n() == n && mode.m() == m) return &mode;
  }
  return nullptr;
}

std::size_t Field::nonzero_modes() const {
  return static_cast<std::size_t>(std::count_if(modes.begin(), modes.end(), [](const ModalField& f) {
    return !f.is_zero();
  }));
}

std::pair<complex, complex> spherical_harmonic(int n, int m, double theta, double phi) {
  const int am = std::abs(m);
  const double p = std::sph_legendre(static_cast<unsigned>(n), static_cast<unsigned>(am), theta);
  const complex e = std::polar(1.0, am * phi);
  complex y = p * e;
  complex dy = am * std::cos(theta) / std::sin(theta) * y;
  if (am < n) {
    const double next = std::sph_legendre(static_cast<unsigned>(n), static_cast<unsigned>(am + 1), theta);
    dy += std::sqrt(static_cast<double>((n - am) * (n + am + 1))) * next * std::polar(1.0, am * phi);
  }
  if (m < 0) {
    const double sign = (am % 2 == 0) ? 1.0 : -1.0;
    y = sign * std::conj(y);
    dy = sign * std::conj(dy);
  }
  return {y, dy};
}

FieldSample Field::evaluate_polar(double r, double theta, double phi, std::optional<Side> side) const {
  FieldSample out{};
  // Angular derivatives divided by r have finite limits at the origin.
  const double r_ang = r > 0.0 ? r : 1e-10 * outer_radius;
  if (dimension == 2) {
    complex u_theta = 0.0;
    for (const ModalField& mode : modes) {
      if (mode.is_zero()) continue;
      const complex e = std::polar(1.0, mode.n() * theta);
      out.u += mode.at(r, side).value * e;
      out.u_r += mode.derivative(r, side) * e;
      if (mode.n() != 0) {
        const complex v = r > 0.0 ? mode.at(r, side).value : mode.at(r_ang, side).value;
        u_theta += complex(0.0, mode.n()) * v * e;
      }
    }
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    out.gradient = {c * out.u_r - s * u_theta / r_ang, s * out.u_r + c * u_theta / r_ang, 0.0};
    return out;
  }
  const double th = std::clamp(theta, 1e-9, kPi - 1e-9);
  complex u_theta = 0.0;
  complex u_phi = 0.0;
  for (const ModalField& mode : modes) {
    if (mode.is_zero()) continue;
    const auto [y, dy] = spherical_harmonic(mode.n(), mode.m(), th, phi);
    const complex v = mode.at(r, side).value;
    const complex va = r > 0.0 ? v : mode.at(r_ang, side).value;
    out.u += v * y;
    out.u_r += mode.derivative(r, side) * y;
    u_theta += va * dy;
    u_phi += complex(0.0, mode.m()) * va * y;
  }
  const double st = std::sin(th);
  const double ct = std::cos(th);
  const double sp = std::sin(phi);
  const double cp = std::cos(phi);
  const complex gt = u_theta / r_ang;
  const complex gp = u_phi / (r_ang * st);
  out.gradient = {st * cp * out.u_r + ct * cp * gt - sp * gp, st * sp * out.u_r + ct * sp * gt + cp * gp,
                  ct * out.u_r - st * gt};
  return out;
}

FieldSample Field::evaluate(const geometry::Point& x, std::optional<Side> side) const {
  if (dimension == 2) {
    const double r = std::hypot(x[0], x[1]);
    return evaluate_polar(r, std::atan2(x[1], x[0]), 0.0, side);
  }
  const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  const double theta = r > 0.0 ? std::acos(std::clamp(x[2] / r, -1.0, 1.0)) : 0.0;
  return evaluate_polar(r, theta, std::atan2(x[1], x[0]), side);
}

double sphere_measure(double r, int d) { return d == 2 ? 2.0 * kPi * r : r * r; }

SphereTrace trace(const Field& field, double r, std::optional<Side> side) {
  if (!(r > 0.0 && r <= field.outer_radius * (1.0 + kBreakTol))) {
    throw std::invalid_argument("trace radius outside (0, R]");
  }
  SphereTrace out;
  out.radius = r;
  out.dimension = field.dimension;
  for (const ModalField& mode : field.modes) {
    if (!side && !mode.is_zero() && mode.radial()->is_breakpoint(r)) {
      throw std::invalid_argument("trace radius " + format_double(r) + " is an interface; a side is required");
    }
    const BasisValue v = mode.at(r, side);
    out.modes.push_back({mode.n(), mode.m(), v.value, v.flux});
  }
  return out;
}

// ---- energies -----------------------------------------------------------------

namespace {

template <typename F>
double integrate(F&& f, double a, double b) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-12);
}

// Integrates g(seg, r, value, derivative) over (r_a, r_b) by segment.
template <typename G>
double integrate_radial(const RadialSolution& radial, double r_a, double r_b, G&& g) {
  double total = 0.0;
  for (const Segment& seg : radial.segments) {
    const double lo = std::max(r_a, seg.r_in);
    const double hi = std::min(r_b, seg.r_out);
    if (!(hi > lo)) continue;
    const bool first = &seg == &radial.segments.front();
    total += integrate(
        [&](double r) {
          BasisValue v;
          if (first) {
            const BasisValue w = seg.pair->regular(r);
            v = {seg.a * w.value, seg.a * w.flux};
          } else {
            const BasisPair w = (*seg.pair)(r);
            v = {seg.a * w[0].value + seg.b * w[1].value, seg.a * w[0].flux + seg.b * w[1].flux};
          }
          return g(seg, r, v.value, seg.pair->derivative(r, v.flux));
        },
        lo, hi);
  }
  return total;
}

double angular_measure(int d) { return d == 2 ? 2.0 * kPi : 1.0; }

}  // namespace

Energy energy(const Field& field, double r_a, double r_b) {
  const int d = field.dimension;
  std::map<const RadialSolution*, double> weights;  // sum of |amplitude|^2 per radial profile
  for (const ModalField& mode : field.modes) {
    if (!mode.is_zero()) weights[mode.radial()] += std::norm(mode.amplitude());
  }
  // Iterate in mode order for reproducible summation.
  Energy out;
  std::vector<const RadialSolution*> seen;
  for (const ModalField& mode : field.modes) {
    if (mode.is_zero()) continue;
    const RadialSolution* radial = mode.radial();
    if (std::find(seen.begin(), seen.end(), radial) != seen.end()) continue;
    seen.push_back(radial);
    const double ell = angular_eigenvalue(radial->order, d);
    const double w = weights[radial] * angular_measure(d);
    out.gradient += w * integrate_radial(*radial, r_a, r_b, [&](const Segment&, double r, complex u, complex du) {
      return (std::norm(du) + ell * std::norm(u) / (r * r)) * radial_weight(r, d);
    });
    out.l2 += w * integrate_radial(*radial, r_a, r_b, [&](const Segment&, double r, complex u, complex) {
      return std::norm(u) * radial_weight(r, d);
    });
  }
  return out;
}

complex sesquilinear_energy(const Field& field) {
  const int d = field.dimension;
  complex total = 0.0;
  for (const ModalField& mode : field.modes) {
    if (mode.is_zero()) continue;
    const RadialSolution& radial = *mode.radial();
    const double ell = angular_eigenvalue(radial.order, d);
    auto density = [&](const Segment& seg, double r, complex u, complex du) {
      const ModeOde& ode = seg.pair->ode();
      return (ode.s * ode.tensor.alpha_r(r) * std::norm(du) + ode.s * ode.tensor.alpha_t(r) * ell * std::norm(u) / (r * r)) *
             radial_weight(r, d);
    };
    const double re = integrate_radial(radial, 0.0, field.outer_radius,
                                       [&](const Segment& s, double r, complex u, complex du) {
                                         return density(s, r, u, du).real();
                                       });
    const double im = integrate_radial(radial, 0.0, field.outer_radius,
                                       [&](const Segment& s, double r, complex u, complex du) {
                                         return density(s, r, u, du).imag();
                                       });
    total += std::norm(mode.amplitude()) * angular_measure(d) * complex(re, im);
  }
  return total;
}

complex source_pairing(const Field& field, const SourceSpec& source) {
  complex total = 0.0;
  for (const ModalField& mode : field.modes) {
    if (mode.is_zero()) continue;
    const complex f = source_amplitude(source, mode.n(), mode.m());
    total += f * std::conj(mode.at(source.radius).value);
  }
  return sphere_measure(source.radius, field.dimension) * total;
}

void write_field_csv(std::ostream& out, const Field& field, const std::vector<double>& radii,
                     const std::vector<double>& thetas) {
  out << "r,theta,Re_u,Im_u,Re_ur,Im_ur\n";
  for (const double r : radii) {
    for (const double theta : thetas) {
      const FieldSample s = field.evaluate_polar(r, theta);
      out << format_double(r) << ',' << format_double(theta) << ',' << format_double(s.u.real()) << ','
          << format_double(s.u.imag()) << ',' << format_double(s.u_r.real()) << ',' << format_double(s.u_r.imag())
          << '\n';
    }
  }
}

}  // namespace negalens::modal
