#include "negalens/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "negalens/format.hpp"
#include "negalens/parallel.hpp"
#include "negalens/special_functions.hpp"

namespace negalens::analysis {
namespace {

constexpr double kPi = std::numbers::pi;

double ell_of(int n, int d) { return modal::angular_eigenvalue(std::abs(n), d); }

complex part_of(const SphereTrace::Mode& mode, TracePart part) {
  return part == TracePart::value ? mode.u : mode.flux;
}

void require_flux(const SphereTrace& t) {
  if (!t.has_flux) throw std::invalid_argument("trace carries no flux coefficients");
}

// ---- studies ----

int source_order(const media::CloakScenario& scenario) {
  int top = 0;
  for (const auto& mode : scenario.source.modes) top = std::max(top, std::abs(mode.n));
  return top;
}

int study_order(const media::CloakScenario& scenario, const StudyOptions& options) {
  return options.n_max >= 0 ? options.n_max : source_order(scenario);
}

void check_deltas(const std::vector<double>& deltas) {
  if (deltas.empty()) throw std::invalid_argument("delta list is empty");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0)) throw std::invalid_argument("delta values must lie in (0, 1)");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw std::invalid_argument("delta values must decrease");
  }
}

void check_radii(const media::CloakScenario& scenario, const std::vector<double>& radii) {
  if (radii.empty()) throw std::invalid_argument("no exterior radii");
  for (double r : radii) {
    if (!(r > scenario.r3 && r < scenario.outer_radius)) {
      throw std::invalid_argument("exterior radii must lie in (r3, R_omega)");
    }
  }
}

std::vector<SphereTrace> traces_at(const modal::Field& field, const std::vector<double>& radii) {
  std::vector<SphereTrace> out;
  out.reserve(radii.size());
  for (double r : radii) out.push_back(modal::trace(field, r, modal::Side::outer));
  return out;
}

modal::SolveOptions inner_options(const StudyOptions& options) {
  modal::SolveOptions inner = options.solve;
  inner.threads = 1;  // parallelism is over delta
  return inner;
}

template <typename Build>
ConvergenceReport run_study(const media::CloakScenario& scenario, const StudyOptions& options, std::string kind,
                            const modal::Field& reference, Build build) {
  check_deltas(options.deltas);
  check_radii(scenario, options.radii);
  const int n_max = study_order(scenario, options);

  ConvergenceReport report;
  report.kind = std::move(kind);
  report.radii = options.radii;
  const std::vector<SphereTrace> ref = traces_at(reference, options.radii);
  double scale = 0.0;
  for (const SphereTrace& t : ref) {
    report.reference_norms.push_back(h_norm(t));
    scale = std::max(scale, report.reference_norms.back());
  }

  report.rows.resize(options.deltas.size());
  const modal::SolveOptions inner = inner_options(options);
  parallel_for(options.deltas.size(), options.threads, [&](std::size_t i) {
    ConvergenceRow& row = report.rows[i];
    row.delta = options.deltas[i];
    media::CloakScenario s = scenario;
    s.delta = row.delta;
    try {
      const modal::Field device = modal::solve_field(build(s), s.k, s.source, n_max, inner);
      row.residual = device.max_residual;
      for (std::size_t j = 0; j < options.radii.size(); ++j) {
        row.errors.push_back(h_norm(modal::trace(device, options.radii[j], modal::Side::outer) - ref[j]));
        row.error = std::max(row.error, row.errors.back());
      }
    } catch (const modal::ResonanceError& e) {
      row.resonance = true;
      row.message = std::string(e.what()) + " (mode " + std::to_string(e.mode()) + ")";
      row.errors.assign(options.radii.size(), std::numeric_limits<double>::quiet_NaN());
      row.error = std::numeric_limits<double>::quiet_NaN();
    }
  });

  double residual = reference.max_residual;
  for (const ConvergenceRow& row : report.rows) residual = std::max(residual, row.residual);
  report.noise_floor = residual * scale;

  std::vector<double> x;
  std::vector<double> y;
  std::vector<bool> use;
  const ConvergenceRow* previous = nullptr;
  for (ConvergenceRow& row : report.rows) {
    if (row.resonance) continue;
    row.in_fit = row.error > 10.0 * report.noise_floor;
    x.push_back(row.delta);
    y.push_back(row.error);
    use.push_back(row.in_fit);
    if (previous && row.error > previous->error) report.monotone = false;
    previous = &row;
  }
  report.fit = fit_loglog(x, y, use);
  return report;
}

// ---- singularity diagnostic ----

struct Radial {
  complex value;
  complex derivative;  // d/dr
};

// Hatted pair at k r with r-derivatives; raw J_0, Y_0 when n = 0 and d = 2.
std::array<Radial, 2> hatted_pair(int n, double k, double r, int d) {
  if (d == 2 && n == 0) {
    const special::CylinderValues v = special::bessel_jy(0, k * r);
    return {Radial{v.j, k * v.dj}, Radial{v.y, k * v.dy}};
  }
  const special::HattedValues v = special::hatted(n, k * r, d);
  return {Radial{v.j, k * v.dj}, Radial{v.y, k * v.dy}};
}

SphereTrace make_trace(double r, int d) {
  SphereTrace t;
  t.radius = r;
  t.dimension = d;
  return t;
}

}  // namespace

// ---- trace norms ----------------------------------------------------------------

double trace_norm(const SphereTrace& trace, double s, TracePart part) {
  if (s != -0.5 && s != 0.0 && s != 0.5) throw std::invalid_argument("Sobolev index must be -1/2, 0 or 1/2");
  if (part == TracePart::flux) require_flux(trace);
  double sum = 0.0;
  for (const SphereTrace::Mode& mode : trace.modes) {
    const double c = std::norm(part_of(mode, part));
    if (c == 0.0) continue;
    sum += std::pow(1.0 + ell_of(mode.n, trace.dimension), s) * c;
  }
  return std::sqrt(sum * modal::sphere_measure(trace.radius, trace.dimension));
}

double sup_norm(const SphereTrace& trace, TracePart part, int samples) {
  if (samples < 4) throw std::invalid_argument("too few angular samples");
  if (part == TracePart::flux) require_flux(trace);
  double best = 0.0;
  if (trace.dimension == 2) {
    for (int i = 0; i < samples; ++i) {
      const double th = 2.0 * kPi * i / samples;
      complex v = 0.0;
      for (const auto& mode : trace.modes) v += part_of(mode, part) * std::polar(1.0, mode.n * th);
      best = std::max(best, std::abs(v));
    }
    return best;
  }
  const int n_theta = std::max(8, static_cast<int>(std::sqrt(samples / 2.0)));
  const int n_phi = 2 * n_theta;
  for (int i = 0; i <= n_theta; ++i) {
    const double th = std::clamp(kPi * i / n_theta, 1e-9, kPi - 1e-9);
    for (int j = 0; j < n_phi; ++j) {
      const double ph = 2.0 * kPi * j / n_phi;
      complex v = 0.0;
      for (const auto& mode : trace.modes) v += part_of(mode, part) * modal::spherical_harmonic(mode.n, mode.m, th, ph).first;
      best = std::max(best, std::abs(v));
    }
  }
  return best;
}

double h_norm(const SphereTrace& trace) {
  require_flux(trace);
  return trace_norm(trace, 0.5, TracePart::value) + trace_norm(trace, -0.5, TracePart::flux);
}

SphereTrace bessel_trace(const std::vector<std::pair<int, complex>>& modes, double k, double r, int dimension) {
  SphereTrace t = make_trace(r, dimension);
  for (const auto& [n, c] : modes) {
    const special::RegularValues v = special::regular_radial(dimension, std::abs(n), k * r);
    t.modes.push_back({n, 0, c * v.value, c * k * v.derivative});
  }
  return t;
}

// ---- three spheres ----------------------------------------------------------------

double three_spheres_alpha(double r1, double r2, double r3, double q) {
  if (r1 == r2 || r2 == r3 || r1 == r3) throw std::invalid_argument("coincident radii");
  if (!(r1 > 0.0 && r1 < r2 && r2 < r3)) throw std::invalid_argument("radii must satisfy 0 < R1 < R2 < R3");
  if (q == 0.0) return std::log(r3 / r2) / std::log(r3 / r1);
  if (!(q >= 1.0)) throw std::invalid_argument("q must be 0 (Hadamard limit) or at least 1");
  return (std::pow(r2, -q) - std::pow(r3, -q)) / (std::pow(r1, -q) - std::pow(r3, -q));
}

ThreeSpheresReport three_spheres_eval(const std::array<SphereTrace, 3>& traces, double q, ThreeSpheresNorm norm) {
  ThreeSpheresReport rep;
  for (std::size_t i = 0; i < 3; ++i) rep.radii[i] = traces[i].radius;
  if (traces[0].dimension != traces[1].dimension || traces[1].dimension != traces[2].dimension) {
    throw std::invalid_argument("traces of different dimensions");
  }
  rep.q = q;
  rep.alpha = three_spheres_alpha(rep.radii[0], rep.radii[1], rep.radii[2], q);
  for (std::size_t i = 0; i < 3; ++i) {
    switch (norm) {
      case ThreeSpheresNorm::h: rep.norms[i] = h_norm(traces[i]); break;
      case ThreeSpheresNorm::l2: rep.norms[i] = trace_norm(traces[i], 0.0); break;
      case ThreeSpheresNorm::sup: rep.norms[i] = sup_norm(traces[i]); break;
    }
  }
  const auto [n1, n2, n3] = rep.norms;
  rep.degenerate = n1 == 0.0 && n2 == 0.0 && n3 == 0.0;
  if (n2 == 0.0) {
    rep.c_min = 0.0;
  } else if (n1 == 0.0 || n3 == 0.0) {
    rep.violation = true;
    rep.c_min = std::numeric_limits<double>::infinity();
  } else {
    // in logs: the norms of high modes span many decades
    rep.c_min = std::exp(std::log(n2) - rep.alpha * std::log(n1) - (1.0 - rep.alpha) * std::log(n3));
  }
  return rep;
}

HelmholtzSuite helmholtz_suite(const HelmholtzSuiteOptions& options) {
  if (options.samples < 1) throw std::invalid_argument("need at least one sample");
  if (options.n_max < 0 || options.n_max + 1 > special::kMaxOrder) throw std::invalid_argument("mode count out of range");
  if (!(options.k > 0.0)) throw std::invalid_argument("k must be positive");
  const auto& R = options.radii;
  if (!(options.annulus_in < R[0] && R[2] < options.annulus_out)) {
    throw std::invalid_argument("radii must lie inside the annulus");
  }
  for (double q : options.q_values) three_spheres_alpha(R[0], R[1], R[2], q);

  HelmholtzSuite suite;
  suite.options = options;
  const double k = options.k;
  const special::CylinderSequence mid = special::bessel_jy_sequence(options.n_max, k * R[1]);
  std::array<special::CylinderSequence, 3> seq;
  for (std::size_t i = 0; i < 3; ++i) seq[i] = special::bessel_jy_sequence(options.n_max, k * R[i]);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> order(0, options.n_max);

  struct Sample {
    int order;
    std::vector<std::array<complex, 2>> coeffs;  // n = -order..order: (a_n, b_n)
  };
  std::vector<Sample> samples(static_cast<std::size_t>(options.samples));
  for (Sample& s : samples) {
    s.order = order(rng);
    for (int n = -s.order; n <= s.order; ++n) {
      const double ar = gauss(rng);
      const double ai = gauss(rng);
      const double br = gauss(rng);
      const double bi = gauss(rng);
      s.coeffs.push_back({complex(ar, ai), complex(br, bi)});
    }
  }

  std::vector<std::array<SphereTrace, 3>> traces(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    for (std::size_t j = 0; j < 3; ++j) {
      SphereTrace t = make_trace(R[j], 2);
      for (int n = -s.order; n <= s.order; ++n) {
        const auto an = static_cast<std::size_t>(std::abs(n));
        const auto [a, b] = s.coeffs[static_cast<std::size_t>(n + s.order)];
        const complex ja = a / std::abs(mid.j[an]);
        const complex yb = b / std::abs(mid.y[an]);
        t.modes.push_back({n, 0, ja * seq[j].j[an] + yb * seq[j].y[an], k * (ja * seq[j].dj[an] + yb * seq[j].dy[an])});
      }
      traces[i][j] = std::move(t);
    }
  }

  for (double q : options.q_values) {
    std::vector<double> cs;
    SuiteSummary summary;
    summary.q = q;
    summary.samples = options.samples;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      HelmholtzSample row;
      row.index = static_cast<int>(i);
      row.order = samples[i].order;
      row.report = three_spheres_eval(traces[i], q);
      row.report.c1 = 0.0;
      row.report.c2 = k * k;
      if (!std::isfinite(row.report.c_min)) summary.all_finite = false;
      cs.push_back(row.report.c_min);
      suite.rows.push_back(std::move(row));
    }
    summary.max_c = *std::max_element(cs.begin(), cs.end());
    std::sort(cs.begin(), cs.end());
    const std::size_t h = cs.size() / 2;
    summary.median_c = cs.size() % 2 == 1 ? cs[h] : 0.5 * (cs[h - 1] + cs[h]);
    suite.summaries.push_back(summary);
  }
  return suite;
}

Counterexample bessel_counterexample(double k, int n, double search_limit) {
  if (!(k > 0.0)) throw std::invalid_argument("k must be positive");
  if (n < 1) throw std::invalid_argument("order must be at least 1");
  auto jn = [&](double r) { return special::bessel_jy(n, k * r).j.real(); };
  auto djn = [&](double r) { return special::bessel_jy(n, k * r).dj.real(); };
  auto bisect = [](auto f, double lo, double hi) {
    double flo = f(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double fm = f(mid);
      if (fm == 0.0) return mid;
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
  };

  // extrema of J_n(k r): sign changes of J_n'
  std::vector<double> extrema;
  const double h = 0.05 / k;
  double prev = djn(h);
  for (double r = 2.0 * h; r <= search_limit / k && extrema.size() < 2; r += h) {
    const double cur = djn(r);
    if ((cur < 0.0) != (prev < 0.0)) extrema.push_back(bisect(djn, r - h, r));
    prev = cur;
  }
  if (extrema.size() < 2) throw std::runtime_error("zero not found in search window");

  Counterexample c;
  c.k = k;
  c.n = n;
  const double r1 = bisect(jn, extrema[0], extrema[1]);
  c.j_at_r1 = jn(r1);
  if (std::abs(c.j_at_r1) > 1e-12) throw std::runtime_error("zero not found in search window");
  c.radii = {r1, extrema[1], 2.0 * extrema[1] - r1};
  for (std::size_t i = 0; i < 3; ++i) {
    const SphereTrace t = bessel_trace({{n, 1.0}}, k, c.radii[i]);
    c.l2[i] = trace_norm(t, 0.0);
    c.h[i] = h_norm(t);
  }
  c.l2_ratio = c.l2[0] / c.l2[1];
  c.h_ratio = c.h[0] / c.h[1];
  return c;
}

// ---- studies ----------------------------------------------------------------------

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, const std::vector<bool>& use) {
  LogLogFit fit;
  double sx = 0.0;
  double sy = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!use[i] || !(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++fit.points;
  }
  if (fit.points < 2) return fit;
  const double m = static_cast<double>(fit.points);
  const double den = m * sxx - sx * sx;
  if (den == 0.0) return fit;
  fit.slope = (m * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.valid = true;
  return fit;
}

ConvergenceReport cloaking_study(const media::CloakScenario& scenario, const StudyOptions& options) {
  media::check_scenario(scenario);
  const int n_max = study_order(scenario, options);
  const modal::Field reference = modal::homogeneous_reference(scenario.k, scenario.source, scenario.outer_radius,
                                                              scenario.dimension, n_max, options.solve);
  return run_study(scenario, options, "cloak", reference,
                   [](const media::CloakScenario& s) { return media::build_cloak(s); });
}

ConvergenceReport illusion_study(const media::CloakScenario& scenario, const geometry::RadialTensorProfile& a_c,
                                 const geometry::ScalarProfile& sigma_c, const StudyOptions& options) {
  media::check_scenario(scenario);
  const int n_max = study_order(scenario, options);
  const modal::Field reference = modal::solve_field(media::build_virtual_medium(scenario, a_c, sigma_c), scenario.k,
                                                    scenario.source, n_max, options.solve);
  ConvergenceReport report = run_study(scenario, options, "illusion", reference, [&](const media::CloakScenario& s) {
    return media::build_illusion_device(s, a_c, sigma_c);
  });
  const modal::Field plain = modal::homogeneous_reference(scenario.k, scenario.source, scenario.outer_radius,
                                                          scenario.dimension, n_max, options.solve);
  for (double r : options.radii) {
    report.reference_gap.push_back(
        h_norm(modal::trace(reference, r, modal::Side::outer) - modal::trace(plain, r, modal::Side::outer)));
  }
  return report;
}

ResonanceReport resonance_profile(const media::CloakScenario& scenario, const StudyOptions& options) {
  media::check_scenario(scenario);
  check_deltas(options.deltas);
  const int n_max = study_order(scenario, options);
  const media::LayeredMedium layout = media::build_cloak(scenario);

  ResonanceReport rep;
  rep.deltas = options.deltas;
  const std::size_t nd = options.deltas.size();
  rep.resonance.assign(nd, false);
  rep.global.assign(nd, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t l = 0; l < layout.layers().size(); ++l) {
    LayerEnergy e;
    e.layer = l;
    e.role = layout.layers()[l].role;
    e.r_in = layout.layers()[l].r_in;
    e.r_out = layout.layers()[l].r_out;
    e.gradient.assign(nd, std::numeric_limits<double>::quiet_NaN());
    e.l2.assign(nd, std::numeric_limits<double>::quiet_NaN());
    rep.layers.push_back(std::move(e));
  }

  const modal::SolveOptions inner = inner_options(options);
  std::vector<char> failed(nd, 0);
  parallel_for(nd, options.threads, [&](std::size_t i) {
    media::CloakScenario s = scenario;
    s.delta = options.deltas[i];
    try {
      const modal::Field field = modal::solve_field(media::build_cloak(s), s.k, s.source, n_max, inner);
      double total = 0.0;
      for (LayerEnergy& e : rep.layers) {
        const modal::Energy en = modal::energy(field, e.r_in, e.r_out);
        e.gradient[i] = en.gradient;
        e.l2[i] = en.l2;
        total += en.gradient + en.l2;
      }
      rep.global[i] = total;
    } catch (const modal::ResonanceError&) {
      failed[i] = 1;
    }
  });

  std::vector<bool> use(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    rep.resonance[i] = failed[i] != 0;
    use[i] = !rep.resonance[i];
  }
  auto exponent = [&](const std::vector<double>& values) {
    const LogLogFit f = fit_loglog(rep.deltas, values, use);
    return f.valid ? -f.slope : std::numeric_limits<double>::quiet_NaN();
  };
  for (LayerEnergy& e : rep.layers) {
    std::vector<double> h1(nd);
    for (std::size_t i = 0; i < nd; ++i) h1[i] = e.gradient[i] + e.l2[i];
    e.p_gradient = exponent(e.gradient);
    e.p_l2 = exponent(e.l2);
    e.p = exponent(h1);
    if (e.role == media::LayerRole::exterior) rep.p_exterior = e.p;
  }
  rep.p_global = exponent(rep.global);
  return rep;
}

// ---- removing the localized singularity -----------------------------------------------

ReflectionCoefficients reflection_coefficients(int n, double r3, double k, int d) {
  if (n < 0) throw std::invalid_argument("order must be nonnegative");
  const auto [j, y] = hatted_pair(n, k, r3, d);
  const complex w = j.value * y.derivative - j.derivative * y.value;
  ReflectionCoefficients c;
  c.ac = (-y.value / w).real();
  c.bc = (-j.value / (y.value * j.derivative - y.derivative * j.value)).real();
  if (n >= 1) {
    const double t = std::pow(k * r3, -static_cast<double>(n));
    if (d == 2) {
      c.ac_leading = r3 * t / (2.0 * n);
      c.bc_leading = -r3 / t / (2.0 * n);
    } else {
      c.ac_leading = r3 * t / (2.0 * n + 1.0);
      c.bc_leading = -r3 * r3 * k / t / (2.0 * n + 1.0);
    }
  }
  return c;
}

std::array<complex, 2> hatted_split(int n, double k, double r, int d, complex value, complex derivative) {
  const auto [j, y] = hatted_pair(n, k, r, d);
  const complex w = j.value * y.derivative - j.derivative * y.value;
  return {(value * y.derivative - derivative * y.value) / w, (j.value * derivative - j.derivative * value) / w};
}

SingularityDiagnostic singularity_diagnostic(const media::CloakScenario& scenario, double delta,
                                             const StudyOptions& options) {
  media::CloakScenario s = scenario;
  s.delta = delta;
  media::check_scenario(s);
  const int d = s.dimension;
  const double k = s.k;
  const double r2 = s.r2;
  const double r3 = s.r3;
  const double r1 = s.r1();
  const double m = s.magnification();
  const double rg = s.gamma * r2;
  const modal::Field field = modal::solve_field(media::build_cloak(s), k, s.source, study_order(s, options), options.solve);

  using modal::Side;
  SingularityDiagnostic diag;
  diag.delta = delta;
  diag.field_norm = h_norm(modal::trace(field, r3, Side::outer));

  SphereTrace jump3 = make_trace(r3, d);
  SphereTrace jump_g = make_trace(rg, d);
  SphereTrace misfit = make_trace(rg, d);
  double c_scale = 0.0;
  for (const modal::ModalField& mode : field.modes) {
    if (mode.is_zero()) continue;
    DiagnosticMode dm;
    dm.n = mode.n();
    dm.m = mode.m();
    // D = u1 - u2, u1(r) = u(r2^2 / r) from (r1, r2), u2(r) = u(r / m) from (0, r1).
    // Both reach u(r1) at r = r3, so D(r3) = 0 and only the derivative is left.
    dm.c = -(r2 * r2 / (r3 * r3)) * mode.derivative(r1, Side::outer) - mode.derivative(r1, Side::inner) / m;
    c_scale = std::max(c_scale, std::abs(dm.c));
    diag.modes.push_back(dm);
  }
  const double floor = 1e-14 * c_scale;

  std::size_t next = 0;
  for (const modal::ModalField& mode : field.modes) {
    if (mode.is_zero()) continue;
    DiagnosticMode& dm = diag.modes[next++];
    const int n = std::abs(dm.n);
    if (std::abs(dm.c) <= floor) {
      dm.skipped = true;
      continue;
    }
    // D(r3) = 0, so this is a = c AC_n, b = c BC_n
    const auto [a, b] = hatted_split(n, k, r3, d, 0.0, dm.c);
    dm.a = a;
    dm.b = b;

    const auto at3 = hatted_pair(n, k, r3, d);
    const auto atg = hatted_pair(n, k, rg, d);
    // singular part u^ carries the Y^ content of orders n >= 1
    const complex bhat = n >= 1 ? dm.b : complex(0.0);
    const complex uhat3 = bhat * at3[1].value;
    const complex duhat3 = bhat * at3[1].derivative;
    const complex uhatg = bhat * atg[1].value;
    const complex duhatg = bhat * atg[1].derivative;
    jump3.modes.push_back({dm.n, dm.m, uhat3, duhat3});

    const complex u_out = mode.at(rg, Side::outer).value;
    const complex du_out = mode.derivative(rg, Side::outer);
    const complex u2 = mode.at(rg / m).value;
    const complex du2 = mode.derivative(rg / m) / m;
    jump_g.modes.push_back({dm.n, dm.m, (u_out - uhatg) - u2, (du_out - duhatg) - du2});

    const double rho = r2 * r2 / rg;
    const complex dval = mode.at(rho).value - u2;
    const complex dder = -(r2 * r2 / (rg * rg)) * mode.derivative(rho) - du2;
    const complex fit_val = dm.a * atg[0].value + dm.b * atg[1].value;
    const complex fit_der = dm.a * atg[0].derivative + dm.b * atg[1].derivative;
    misfit.modes.push_back({dm.n, dm.m, dval - fit_val, dder - fit_der});
  }
  diag.jump_r3 = h_norm(jump3);
  diag.jump_gamma_r2 = h_norm(jump_g);
  diag.residual = h_norm(misfit);
  return diag;
}

// ---- output -------------------------------------------------------------------------

void write_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "delta,status,in_fit,error";
  for (double r : report.radii) out << ",error_r" << format_double(r);
  out << ",residual\n";
  for (const ConvergenceRow& row : report.rows) {
    out << format_double(row.delta) << ',' << (row.resonance ? "resonance" : "ok") << ',' << (row.in_fit ? 1 : 0)
        << ',' << format_double(row.error);
    for (double e : row.errors) out << ',' << format_double(e);
    out << ',' << format_double(row.residual) << '\n';
  }
}

void write_csv(std::ostream& out, const ResonanceReport& report) {
  out << "delta,status,layer,role,r_in,r_out,gradient,l2\n";
  for (std::size_t i = 0; i < report.deltas.size(); ++i) {
    const char* status = report.resonance[i] ? "resonance" : "ok";
    for (const LayerEnergy& e : report.layers) {
      out << format_double(report.deltas[i]) << ',' << status << ',' << e.layer << ',' << media::to_string(e.role)
          << ',' << format_double(e.r_in) << ',' << format_double(e.r_out) << ',' << format_double(e.gradient[i])
          << ',' << format_double(e.l2[i]) << '\n';
    }
    double gradient = 0.0;
    double l2 = 0.0;
    for (const LayerEnergy& e : report.layers) {
      gradient += e.gradient[i];
      l2 += e.l2[i];
    }
    out << format_double(report.deltas[i]) << ',' << status << ",all,domain,0,"
        << format_double(report.layers.empty() ? 0.0 : report.layers.back().r_out) << ',' << format_double(gradient)
        << ',' << format_double(l2) << '\n';
  }
}

void write_csv(std::ostream& out, const HelmholtzSuite& suite) {
  out << "sample,order,q,R1,R2,R3,alpha,N1,N2,N3,C_min,flag\n";
  for (const HelmholtzSample& row : suite.rows) {
    const ThreeSpheresReport& r = row.report;
    out << row.index << ',' << row.order << ',' << format_double(r.q);
    for (double x : r.radii) out << ',' << format_double(x);
    out << ',' << format_double(r.alpha);
    for (double x : r.norms) out << ',' << format_double(x);
    out << ',' << format_double(r.c_min) << ',' << (r.violation ? "violation" : r.degenerate ? "degenerate" : "ok")
        << '\n';
  }
}

void write_summary_csv(std::ostream& out, const HelmholtzSuite& suite) {
  out << "q,samples,max_C,median_C,all_finite\n";
  for (const SuiteSummary& s : suite.summaries) {
    out << format_double(s.q) << ',' << s.samples << ',' << format_double(s.max_c) << ','
        << format_double(s.median_c) << ',' << (s.all_finite ? 1 : 0) << '\n';
  }
}

void write_csv(std::ostream& out, const Counterexample& c) {
  out << "k,n,R1,R2,R3,J_n(kR1),L2_R1,L2_R2,L2_R3,H_R1,H_R2,H_R3,L2_ratio,H_ratio\n";
  out << format_double(c.k) << ',' << c.n;
  for (double x : c.radii) out << ',' << format_double(x);
  out << ',' << format_double(c.j_at_r1);
  for (double x : c.l2) out << ',' << format_double(x);
  for (double x : c.h) out << ',' << format_double(x);
  out << ',' << format_double(c.l2_ratio) << ',' << format_double(c.h_ratio) << '\n';
}

void write_csv(std::ostream& out, const std::vector<SingularityDiagnostic>& diagnostics) {
  out << "delta,jump_r3,jump_gamma_r2,residual,field_norm\n";
  for (const SingularityDiagnostic& d : diagnostics) {
    out << format_double(d.delta) << ',' << format_double(d.jump_r3) << ',' << format_double(d.jump_gamma_r2) << ','
        << format_double(d.residual) << ',' << format_double(d.field_norm) << '\n';
  }
}

namespace {

// JSON has no NaN or infinity.
nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

nlohmann::json numbers(const std::vector<double>& xs) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : xs) out.push_back(number(x));
  return out;
}

nlohmann::json fit_json(const LogLogFit& f) {
  return {{"slope", number(f.slope)}, {"intercept", number(f.intercept)}, {"points", f.points}, {"valid", f.valid}};
}

}  // namespace

nlohmann::json to_json(const ConvergenceReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ConvergenceRow& row : report.rows) {
    rows.push_back({{"delta", row.delta},
                    {"error", number(row.error)},
                    {"errors", numbers(row.errors)},
                    {"status", row.resonance ? "resonance" : "ok"},
                    {"message", row.message},
                    {"in_fit", row.in_fit},
                    {"residual", number(row.residual)}});
  }
  nlohmann::json j = {{"kind", report.kind},
                      {"radii", report.radii},
                      {"rows", rows},
                      {"fit", fit_json(report.fit)},
                      {"monotone", report.monotone},
                      {"noise_floor", number(report.noise_floor)},
                      {"reference_norms", numbers(report.reference_norms)}};
  if (!report.reference_gap.empty()) j["reference_gap"] = numbers(report.reference_gap);
  return j;
}

nlohmann::json to_json(const ResonanceReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerEnergy& e : report.layers) {
    layers.push_back({{"layer", e.layer},
                      {"role", media::to_string(e.role)},
                      {"r_in", e.r_in},
                      {"r_out", e.r_out},
                      {"gradient", numbers(e.gradient)},
                      {"l2", numbers(e.l2)},
                      {"p_gradient", number(e.p_gradient)},
                      {"p_l2", number(e.p_l2)},
                      {"p", number(e.p)}});
  }
  nlohmann::json resonance = nlohmann::json::array();
  for (bool b : report.resonance) resonance.push_back(b);
  return {{"deltas", report.deltas},
          {"resonance", resonance},
          {"layers", layers},
          {"global", numbers(report.global)},
          {"p_global", number(report.p_global)},
          {"p_exterior", number(report.p_exterior)}};
}

nlohmann::json to_json(const HelmholtzSuite& suite) {
  nlohmann::json summaries = nlohmann::json::array();
  for (const SuiteSummary& s : suite.summaries) {
    summaries.push_back(
        {{"q", s.q}, {"samples", s.samples}, {"max_C", number(s.max_c)}, {"median_C", number(s.median_c)}, {"all_finite", s.all_finite}});
  }
  const HelmholtzSuiteOptions& o = suite.options;
  return {{"k", o.k},
          {"n_max", o.n_max},
          {"radii", o.radii},
          {"annulus", {o.annulus_in, o.annulus_out}},
          {"seed", o.seed},
          {"c1", 0.0},
          {"c2", o.k * o.k},
          {"summaries", summaries}};
}

nlohmann::json to_json(const Counterexample& c) {
  return {{"k", c.k},       {"n", c.n},   {"radii", c.radii},           {"J_n_at_R1", c.j_at_r1},
          {"l2", c.l2},     {"h", c.h},   {"l2_ratio", c.l2_ratio},     {"h_ratio", c.h_ratio}};
}

}  // namespace negalens::analysis
