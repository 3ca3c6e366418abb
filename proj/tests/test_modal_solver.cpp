#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "negalens/modal_solver.hpp"
#include "negalens/special_functions.hpp"
#include "oracle/bessel_oracle.hpp"
#include "oracle/fd_bvp.hpp"

using namespace negalens;
using namespace negalens::modal;
using geometry::ScalarProfile;

namespace {

media::CloakScenario cloak_scenario(int d, double delta) {
  media::CloakScenario s;
  s.dimension = d;
  s.delta = delta;
  s.source = SourceSpec::uniform(3.0, 6, d);
  return s;
}

SourceSpec single(int n, complex amp = 1.0, double radius = 3.0) {
  SourceSpec s;
  s.radius = radius;
  s.modes.push_back({n, 0, amp});
  return s;
}

// Oracle BVP for one layer medium, with coefficients read from the layers.
oracle::RadialBvp bvp_for(const LayeredMedium& m, int order, double k, double r_s, complex amp) {
  oracle::RadialBvp b;
  b.dimension = m.dimension();
  b.order = order;
  b.outer_radius = m.outer_radius();
  b.source_radius = r_s;
  b.amplitude = amp;
  b.breakpoints = m.interfaces();
  const double ell = angular_eigenvalue(order, m.dimension());
  b.p = [&m](double r) {
    const Layer& l = m.layers()[m.layer_index(r)];
    return l.s_delta * l.tensor.alpha_r(r);
  };
  b.q = [&m, k, ell](double r) {
    const Layer& l = m.layers()[m.layer_index(r)];
    return k * k * l.s_zero * l.sigma(r) - ell * l.s_delta * l.tensor.alpha_t(r) / (r * r);
  };
  return b;
}

double max_rel_error(const ModalField& f, const oracle::FdSolution& o, double outer) {
  double err = 0.0;
  double scale = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double r = outer * i / 400.0;
    const complex want = o.at(r);
    err = std::max(err, std::abs(f.at(r).value - want));
    scale = std::max(scale, std::abs(want));
  }
  return err / scale;
}

// (r^{d-1} flux)' + r^{d-1} q u by a five-point stencil, relative to the
// natural scale r^{d-1} (|flux| / r + |q u|).
double collocation_residual(const FundamentalPair& p, double r, int member) {
  const int d = p.ode().dimension;
  const double h = 1e-3 * r;
  auto wflux = [&](double t) { return std::pow(t, d - 1) * p(t)[static_cast<std::size_t>(member)].flux; };
  const complex dflux = (-wflux(r + 2 * h) + 8.0 * wflux(r + h) - 8.0 * wflux(r - h) + wflux(r - 2 * h)) / (12 * h);
  const complex u = p(r)[static_cast<std::size_t>(member)].value;
  const complex pot = std::pow(r, d - 1) * p.ode().potential(r) * u;
  return std::abs(dflux + pot) / (std::abs(wflux(r)) / r + std::abs(pot));
}

}  // namespace

TEST_CASE("effective wavenumbers") {
  Layer plain;
  plain.r_out = 1.0;
  CHECK(effective_mode_ode(plain, 0, 1.3, 2).wavenumber == complex(1.3));
  const LayeredMedium cloak = media::build_cloak(cloak_scenario(2, 1e-2));
  CHECK(std::abs(*effective_mode_ode(cloak.layers()[0], 3, 1.0, 2).wavenumber - 4.0) < 1e-15);
  // complementary layer: potential prefactor k^2 sigma / (1 - i delta)
  const Layer& comp = cloak.layers()[1];
  const ModeOde ode = effective_mode_ode(comp, 0, 1.0, 2);
  CHECK(!ode.wavenumber);
  const double r = 0.6;
  const complex scaled = ode.potential(r) / ode.s;
  CHECK(std::abs(scaled - comp.sigma(r) / complex(1.0, -1e-2)) < 1e-14 * std::abs(scaled));
}

TEST_CASE("zero source gives the zero field") {
  const Field f = homogeneous_reference(1.0, SourceSpec{3.0, {}}, 4.0, 2, 4);
  CHECK(f.nonzero_modes() == 0);
  CHECK(f.evaluate({0.5, 0.2, 0.0}).u == complex(0.0));
}

TEST_CASE("homogeneous disk against the finite-difference oracle") {
  const LayeredMedium disk = media::homogeneous_medium(2, 4.0);
  for (int n = 0; n <= 8; ++n) {
    const ModalField f = solve_mode(disk, n, 1.0, single(n));
    const oracle::FdSolution o = oracle::solve_fd(bvp_for(disk, n, 1.0, 3.0, 1.0));
    CAPTURE(n);
    CHECK(max_rel_error(f, o, 4.0) < 1e-5);
    if (n == 0) CHECK(std::abs(f.at(0.0).value - o.u[0]) < 1e-5 * std::abs(o.u[0]));
  }
  const LayeredMedium ball = media::homogeneous_medium(3, 4.0);
  for (int n : {0, 1, 4}) {
    const ModalField f = solve_mode(ball, n, 1.0, single(n));
    const oracle::FdSolution o = oracle::solve_fd(bvp_for(ball, n, 1.0, 3.0, 1.0));
    CAPTURE(n);
    CHECK(max_rel_error(f, o, 4.0) < 1e-5);
  }
}

TEST_CASE("cloak modes against the finite-difference oracle") {
  for (int d : {2, 3}) {
    media::CloakScenario s = cloak_scenario(d, 0.1);
    s.object.tensor = geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(3.0));
    s.object.sigma = ScalarProfile::constant(2.0);
    const LayeredMedium m = media::build_cloak(s);
    for (int n : {0, 1, 3}) {
      const ModalField f = solve_mode(m, n, 1.0, single(n));
      const oracle::FdSolution o = oracle::solve_fd(bvp_for(m, n, 1.0, 3.0, 1.0));
      CAPTURE(d);
      CAPTURE(n);
      CHECK(max_rel_error(f, o, 4.0) < 1e-4);
    }
  }
}

TEST_CASE("single source mode gives a single nonzero modal field") {
  const Field f = homogeneous_reference(1.0, single(2), 4.0, 2, 5);
  CHECK(f.nonzero_modes() == 1);
  CHECK(f.modes.size() == 11);
  const SphereTrace t = trace(f, 1.7);
  int nonzero = 0;
  for (const auto& m : t.modes) nonzero += (m.u != complex(0.0)) ? 1 : 0;
  CHECK(nonzero == 1);
}

TEST_CASE("full solve is the superposition of per-mode oracles") {
  SourceSpec src;
  src.radius = 3.0;
  src.modes = {{0, 0, 1.0}, {1, 0, complex(0.5, -0.2)}, {-2, 0, 2.0}, {3, 0, complex(0.0, 1.0)}};
  const LayeredMedium disk = media::homogeneous_medium(2, 4.0);
  const Field f = solve_field(disk, 1.0, src, 4);
  std::vector<oracle::FdSolution> per_mode;
  for (const auto& m : src.modes) per_mode.push_back(oracle::solve_fd(bvp_for(disk, std::abs(m.n), 1.0, 3.0, m.amplitude)));
  for (double r : {0.3, 1.1, 2.5, 3.6}) {
    for (double th : {0.0, 0.7, 2.9}) {
      complex want = 0.0;
      for (std::size_t i = 0; i < src.modes.size(); ++i) want += per_mode[i].at(r) * std::polar(1.0, src.modes[i].n * th);
      const complex got = f.evaluate({r * std::cos(th), r * std::sin(th), 0.0}).u;
      CHECK(std::abs(got - want) < 1e-5 * std::abs(want) + 1e-8);
    }
  }
}

TEST_CASE("flux jumps by the source amplitude at the ring") {
  const complex amp(0.7, -0.3);
  const ModalField f = solve_mode(media::homogeneous_medium(2, 4.0), 2, 1.0, single(2, amp));
  const complex jump = f.at(3.0, Side::outer).flux - f.at(3.0, Side::inner).flux;
  CHECK(std::abs(jump - amp) < 1e-10 * std::abs(amp));
  CHECK(std::abs(f.at(3.0, Side::outer).value - f.at(3.0, Side::inner).value) < 1e-12);
  CHECK(std::abs(f.at(4.0).value) < 1e-10 * std::abs(f.at(2.0).value));
}

TEST_CASE("traces") {
  const Field f = homogeneous_reference(1.0, single(0), 4.0, 2, 0);
  const SphereTrace t = trace(f, 1.0);
  REQUIRE(t.modes.size() == 1);
  // inside the ring the mode is a multiple of J_0(kr): flux / value = k J_0'(k) / J_0(k)
  const oracle::JY o = oracle::bessel_jy(0, 1.0);
  CHECK(std::abs(t.modes[0].flux / t.modes[0].u - o.dj / o.j) < 1e-12);
  CHECK(std::abs(o.dj + oracle::bessel_jy(1, 1.0).j) < 1e-15);

  const SphereTrace left = trace(f, 2.2, Side::inner);
  const SphereTrace right = trace(f, 2.2, Side::outer);
  CHECK(std::abs(left.modes[0].u - right.modes[0].u) < 1e-10);
  CHECK(std::abs(left.modes[0].flux - right.modes[0].flux) < 1e-10);
  CHECK_THROWS_AS(trace(f, 3.0), std::invalid_argument);
  CHECK_NOTHROW(trace(f, 3.0, Side::inner));

  const LayeredMedium cloak = media::build_cloak(cloak_scenario(2, 1e-2));
  const Field c = solve_field(cloak, 1.0, single(1), 1);
  CHECK_THROWS_AS(trace(c, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(trace(c, 0.5), std::invalid_argument);
  CHECK_NOTHROW(trace(c, 1.25));
}

TEST_CASE("modes n and -n share the radial profile") {
  SourceSpec src;
  src.radius = 3.0;
  src.modes = {{3, 0, 1.0}, {-3, 0, 1.0}};
  const LayeredMedium cloak = media::build_cloak(cloak_scenario(2, 1e-2));
  const Field f = solve_field(cloak, 1.0, src, 3);
  for (double r : {0.2, 0.6, 0.9, 1.2, 1.8, 3.5}) {
    CHECK(f.find(3)->at(r).value == f.find(-3)->at(r).value);
  }
  const ModalField a = solve_mode(cloak, 3, 1.0, src);
  const ModalField b = solve_mode(cloak, -3, 1.0, src);
  CHECK(a.at(0.8).value == b.at(0.8).value);
}

TEST_CASE("Abel identity for every pair kind") {
  for (int d : {2, 3}) {
    media::CloakScenario s = cloak_scenario(d, 1e-2);
    s.object.tensor = geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(3.0));
    s.object.sigma = ScalarProfile::constant(2.0);
    const LayeredMedium m = media::build_cloak(s);
    for (const Layer& layer : m.layers()) {
      for (int n : {0, 2, 7}) {
        for (bool force : {false, true}) {
          const FundamentalPair p = fundamental_pair(layer, n, 1.0, d, {force});
          const double lo = layer.r_in > 0.0 ? layer.r_in : 0.05 * layer.r_out;
          const complex w0 = p.wronskian(0.5 * (lo + layer.r_out));
          double drift = 0.0;
          // relative to the size of the products that cancel in W, which is
          // what floating point can resolve once both members blow up near 0
          for (int i = 0; i <= 10; ++i) {
            const double r = lo + (layer.r_out - lo) * i / 10.0;
            const BasisPair v = p(r);
            const double scale = std::pow(r, d - 1) * (std::abs(v[0].value * v[1].flux) + std::abs(v[0].flux * v[1].value));
            drift = std::max(drift, std::abs(p.wronskian(r) - w0) / std::max(std::abs(w0), scale));
          }
          CAPTURE(d);
          CAPTURE(n);
          CAPTURE(force);
          CAPTURE(layer.r_in);
          CHECK(drift <= 1e-8);
        }
      }
    }
  }
  Layer laplace;
  laplace.r_in = 0.5;
  laplace.r_out = 2.0;
  laplace.sigma = ScalarProfile::constant(0.0);
  for (int d : {2, 3}) {
    for (int n : {0, 3}) {
      const FundamentalPair p = fundamental_pair(laplace, n, 1.0, d);
      CHECK(p.kind() == PairKind::power);
      CHECK(std::abs(p.wronskian(0.6) / p.wronskian(1.9) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("pullback pairs solve the complementary-layer equation") {
  for (int d : {2, 3}) {
    const LayeredMedium m = media::build_cloak(cloak_scenario(d, 1e-3));
    const Layer& comp = m.layers()[1];
    for (int n : {0, 1, 5}) {
      const FundamentalPair p = fundamental_pair(comp, n, 1.0, d);
      REQUIRE(p.kind() == PairKind::pullback);
      double worst = 0.0;
      for (int i = 0; i < 50; ++i) {
        const double r = comp.r_in + (comp.r_out - comp.r_in) * (i + 0.5) / 50.0;
        worst = std::max({worst, collocation_residual(p, r, 0), collocation_residual(p, r, 1)});
      }
      CAPTURE(d);
      CAPTURE(n);
      CHECK(worst <= 1e-8);
    }
  }
}

TEST_CASE("integrated pair agrees with the pullback pair on a sigma ~ r^-4 layer") {
  const LayeredMedium m = media::build_cloak(cloak_scenario(2, 1e-3));
  const Layer& comp = m.layers()[1];
  REQUIRE(std::abs(comp.sigma(0.6) - std::pow(0.6, -4.0)) < 1e-12 * std::pow(0.6, -4.0));
  for (int n : {0, 2, 6}) {
    const FundamentalPair a = fundamental_pair(comp, n, 1.0, 2);
    const FundamentalPair b = fundamental_pair(comp, n, 1.0, 2, {true});
    REQUIRE(b.kind() == PairKind::integrated);
    // b_j = c_j0 a_0 + c_j1 a_1, fixed from values and fluxes at one radius
    const double r0 = comp.r_in;
    const BasisPair va = a(r0);
    const BasisPair vb = b(r0);
    const complex det = va[0].value * va[1].flux - va[1].value * va[0].flux;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const complex c0 = (vb[jj].value * va[1].flux - va[1].value * vb[jj].flux) / det;
      const complex c1 = (va[0].value * vb[jj].flux - vb[jj].value * va[0].flux) / det;
      for (int i = 0; i <= 20; ++i) {
        const double r = comp.r_in + (comp.r_out - comp.r_in) * i / 20.0;
        const BasisPair pa = a(r);
        const BasisPair pb = b(r);
        const complex v = c0 * pa[0].value + c1 * pa[1].value;
        const complex fl = c0 * pa[0].flux + c1 * pa[1].flux;
        worst = std::max(worst, std::abs(v - pb[jj].value) / std::max(1.0, std::abs(pb[jj].value)));
        worst = std::max(worst, std::abs(fl - pb[jj].flux) / std::max(1.0, std::abs(pb[jj].flux)));
      }
    }
    CAPTURE(n);
    CHECK(worst <= 1e-7);
  }
}

TEST_CASE("energy identity") {
  for (int d : {2, 3}) {
    media::CloakScenario s = cloak_scenario(d, 1e-2);
    s.object.tensor = geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(3.0));
    s.object.sigma = ScalarProfile::constant(2.0);
    const LayeredMedium m = media::build_cloak(s);
    const SourceSpec src = SourceSpec::uniform(3.0, 3, d);
    const Field f = solve_field(m, 1.0, src, 3);
    const complex lhs = sesquilinear_energy(f);
    const complex rhs = source_pairing(f, src);
    CAPTURE(d);
    CHECK(std::abs(lhs.imag() + rhs.imag()) <= 1e-6 * std::abs(rhs.imag()));
  }
}

TEST_CASE("reflected field matches across r2") {
  for (int d : {2, 3}) {
    for (double delta : {1e-2, 1e-4}) {
      const media::CloakScenario s = cloak_scenario(d, delta);
      const LayeredMedium m = media::build_cloak(s);
      const Field f = solve_field(m, 1.0, SourceSpec::uniform(3.0, 4, d), 4);
      for (const ModalField& mode : f.modes) {
        if (mode.is_zero()) continue;
        // u1(y) = u(r2^2 / y): value and radial derivative at y = r2 from the complementary side
        const complex u_minus = mode.at(s.r2, Side::inner).value;
        const complex u1_flux = -mode.derivative(s.r2, Side::inner);  // d/dy u(r2^2/y) at y = r2, alpha = 1
        const BasisValue plus = mode.at(s.r2, Side::outer);
        CHECK(std::abs(u_minus - plus.value) <= 1e-8 * std::abs(plus.value));
        CHECK(std::abs(complex(1.0, -delta) * u1_flux - plus.flux) <= 1e-8 * std::abs(plus.flux));
      }
    }
  }
}

TEST_CASE("Dirichlet condition and residual") {
  const LayeredMedium m = media::build_cloak(cloak_scenario(2, 1e-4));
  const Field f = solve_field(m, 1.0, SourceSpec::uniform(3.0, 6, 2), 6);
  CHECK(f.max_residual <= 1e-9);
  for (const ModalField& mode : f.modes) {
    double scale = 0.0;
    for (const auto& c : mode.coefficients()) scale = std::max({scale, std::abs(c[0]), std::abs(c[1])});
    CHECK(std::abs(mode.at(4.0).value) <= 1e-10 * std::max(scale, 1e-300));
  }
}

TEST_CASE("resonance is reported with the mode index") {
  // k R at the first zero of J_1: mode 1 of the homogeneous disk is singular.
  const double j11 = 3.8317059702075123;
  SolveOptions opts;
  opts.min_rcond = 1e-12;
  SourceSpec src = single(1);
  src.modes.push_back({0, 0, 1.0});
  try {
    (void)solve_field(media::homogeneous_medium(2, 4.0), j11 / 4.0, src, 2, opts);
    FAIL("expected a resonance error");
  } catch (const ResonanceError& e) {
    CHECK(e.mode() == 1);
    CHECK(e.rcond() < 1e-12);
  }
}

TEST_CASE("extended precision agrees with standard precision") {
  const LayeredMedium m = media::build_cloak(cloak_scenario(2, 1e-5));
  SolveOptions ext;
  ext.precision = Precision::extended;
  const Field a = solve_field(m, 1.0, single(4), 4);
  const Field b = solve_field(m, 1.0, single(4), 4, ext);
  for (double r : {0.3, 0.7, 1.2, 2.5}) {
    const complex x = a.find(4)->at(r).value;
    const complex y = b.find(4)->at(r).value;
    CHECK(std::abs(x - y) <= 1e-8 * std::abs(y));
  }
}

TEST_CASE("results do not depend on the worker count") {
  const LayeredMedium m = media::build_cloak(cloak_scenario(2, 1e-3));
  SolveOptions one;
  one.threads = 1;
  SolveOptions many;
  many.threads = 8;
  const Field a = solve_field(m, 1.0, SourceSpec::uniform(3.0, 6, 2), 6, one);
  const Field b = solve_field(m, 1.0, SourceSpec::uniform(3.0, 6, 2), 6, many);
  std::ostringstream sa;
  std::ostringstream sb;
  write_field_csv(sa, a, {0.5, 1.0, 2.5}, {0.0, 1.0});
  write_field_csv(sb, b, {0.5, 1.0, 2.5}, {0.0, 1.0});
  CHECK(sa.str() == sb.str());
}

TEST_CASE("field gradients match finite differences") {
  const Field f2 = solve_field(media::build_cloak(cloak_scenario(2, 1e-2)), 1.0, SourceSpec::uniform(3.0, 3, 2), 3);
  SourceSpec s3;
  s3.radius = 3.0;
  s3.modes = {{0, 0, 1.0}, {1, 1, complex(0.3, 0.1)}, {2, -1, 0.5}, {3, 2, complex(0.0, 0.7)}};
  const Field f3 = solve_field(media::build_cloak(cloak_scenario(3, 1e-2)), 1.0, s3, 3);
  for (const Field* f : {&f2, &f3}) {
    const geometry::Point x{0.9, -1.1, f->dimension == 3 ? 0.6 : 0.0};
    const FieldSample s = f->evaluate(x);
    for (int c = 0; c < f->dimension; ++c) {
      geometry::Point xp = x;
      geometry::Point xm = x;
      const double h = 1e-6;
      xp[static_cast<std::size_t>(c)] += h;
      xm[static_cast<std::size_t>(c)] -= h;
      const complex fd = (f->evaluate(xp).u - f->evaluate(xm).u) / (2 * h);
      CHECK(std::abs(fd - s.gradient[static_cast<std::size_t>(c)]) < 1e-6 * (1.0 + std::abs(fd)));
    }
  }
}

TEST_CASE("field CSV format") {
  const Field f = homogeneous_reference(1.0, single(0), 4.0, 2, 0);
  std::ostringstream out;
  write_field_csv(out, f, {1.0}, {0.0, 0.5});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "r,theta,Re_u,Im_u,Re_ur,Im_ur");
  std::getline(in, line);
  CHECK(line.rfind("1,0,", 0) == 0);
}
