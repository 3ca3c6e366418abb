#include <cmath>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "negalens/media.hpp"
#include "oracle/pushforward_oracle.hpp"

using namespace negalens;
using namespace negalens::media;
using geometry::complex;
using geometry::ScalarProfile;

namespace {

CloakScenario base_scenario(int d = 2) {
  CloakScenario s;
  s.dimension = d;
  s.r2 = 1.0;
  s.r3 = 2.0;
  s.gamma = 1.5;
  s.delta = 1e-3;
  s.outer_radius = 4.0;
  s.source = modal::SourceSpec::uniform(3.0, 2, d);
  return s;
}

const Layer& layer_at(const LayeredMedium& m, double r) { return m.layers()[m.layer_index(r)]; }

std::vector<double> samples(double lo, double hi, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * (i + 0.5) / n);
  return out;
}

}  // namespace

TEST_CASE("cloak layers for d = 2, r2 = 1, r3 = 2") {
  const CloakScenario s = base_scenario();
  CHECK(s.r1() == 0.5);
  const LayeredMedium m = build_cloak(s);
  REQUIRE(m.layers().size() == 6);
  const Layer& inner = m.layers()[0];
  CHECK(inner.r_out == 0.5);
  CHECK(inner.tensor.alpha_r(0.2) == complex(1.0));
  CHECK(inner.sigma(0.2) == complex(16.0));
  CHECK(m.layers()[1].r_in == 0.5);
  CHECK(m.layers()[2].r_out == 1.0);
  CHECK(m.layers()[1].r_out == doctest::Approx(1.0 / 1.5));
  for (int i : {1, 2}) {
    CHECK(m.layers()[static_cast<std::size_t>(i)].s_delta == complex(-1.0, 1e-3));
    CHECK(m.layers()[static_cast<std::size_t>(i)].s_zero == -1.0);
  }
  for (int i : {0, 3, 4, 5}) CHECK(m.layers()[static_cast<std::size_t>(i)].s_delta == complex(1.0));
  CHECK(m.outer_radius() == 4.0);
  CHECK(m.layers()[3].role == LayerRole::object);
  CHECK(m.layers()[4].r_in == 1.5);
}

TEST_CASE("complementary sigma matches the finite-difference push-forward") {
  const LayeredMedium m = build_cloak(base_scenario());
  for (double y : {0.55, 0.75, 0.95}) {
    // The image point under the Kelvin transform about r2 = 1.
    Eigen::VectorXd x(2);
    x << 0.0, 1.0 / y;
    const auto one = [](double) { return complex(1.0); };
    const oracle::PushedPoint o = oracle::push(oracle::kelvin(1.0), one, one, one, x);
    CHECK(o.y.norm() == doctest::Approx(y));
    const Layer& l = layer_at(m, y);
    CHECK(l.role == LayerRole::complementary);
    CHECK(std::abs(l.sigma(y) - o.sigma) < 1e-8 * std::abs(o.sigma));
    CHECK(std::abs(l.tensor.alpha_r(y) - o.tensor(0, 0)) < 1e-8);
  }
}

TEST_CASE("complementary layers reflect onto the positive shell") {
  for (int d : {2, 3}) {
    CloakScenario s = base_scenario(d);
    s.object.tensor = geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(3.0));
    s.object.sigma = ScalarProfile::constant(2.0);
    const LayeredMedium m = build_cloak(s);
    const geometry::RadialMap f = geometry::RadialMap::kelvin(s.r2, d, {s.r1(), s.r2});
    for (double x : samples(s.r1() + 1e-9, s.r2 - 1e-9, 50)) {
      const Layer& comp = layer_at(m, x);
      REQUIRE(comp.role == LayerRole::complementary);
      const double y = f.radius(x);
      const Layer& positive = layer_at(m, y);
      const double lambda = f.stretch(x);
      // F_* of the complementary coefficients evaluated at y
      const complex ar = std::pow(lambda, 2.0 - d) * comp.tensor.alpha_r(x);
      const complex sg = std::pow(lambda, -d) * comp.sigma(x);
      CHECK(std::abs(ar - positive.tensor.alpha_r(y)) < 1e-10 * std::abs(ar));
      CHECK(std::abs(sg - positive.sigma(y)) < 1e-10 * std::abs(sg));
    }
  }
}

TEST_CASE("scenario validation") {
  CloakScenario s = base_scenario();
  s.gamma = 1.0;
  CHECK_THROWS_AS(build_cloak(s), std::invalid_argument);
  s = base_scenario();
  s.gamma = 1.0 + 1e-6;
  CHECK_NOTHROW(build_cloak(s));
  s = base_scenario();
  s.r3 = 1.2;
  CHECK_THROWS_AS(build_cloak(s), std::invalid_argument);
  s = base_scenario();
  s.delta = 0.0;
  CHECK_THROWS_AS(build_cloak(s), std::invalid_argument);
  s = base_scenario();
  s.source.radius = 1.9;
  CHECK_THROWS_AS(build_cloak(s), std::invalid_argument);
  s = base_scenario();
  s.object.tensor = geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(30.0));
  CHECK_THROWS_AS(build_cloak(s), std::invalid_argument);
  s = base_scenario();
  s.object.sigma = ScalarProfile::constant(complex(1.0, -0.1));
  CHECK_THROWS_AS(build_cloak(s), std::invalid_argument);
}

TEST_CASE("illusion device overwrites only the core") {
  const CloakScenario s = base_scenario();
  const LayeredMedium cloak = build_cloak(s);
  const LayeredMedium same = build_illusion_device(s, geometry::RadialTensorProfile::identity(), ScalarProfile::constant(1.0));
  for (double r : samples(0.0, 4.0, 400)) {
    const bool in_core = r < 0.25;
    const Layer& a = layer_at(cloak, r);
    const Layer& b = layer_at(same, r);
    if (in_core) {
      CHECK(b.sigma(r) == complex(1.0));
      CHECK(a.sigma(r) == complex(16.0));
    } else {
      CHECK(a.sigma(r) == b.sigma(r));
      CHECK(a.tensor.alpha_r(r) == b.tensor.alpha_r(r));
      CHECK(a.s_delta == b.s_delta);
    }
  }
  const LayeredMedium two = build_illusion_device(s, geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(2.0)),
                                                  ScalarProfile::constant(1.5));
  CHECK(two.layers()[0].r_out == 0.25);
  CHECK(two.layers()[0].tensor.alpha_r(0.1) == complex(2.0));
  CHECK(two.layers()[0].tensor.alpha_t(0.1) == complex(2.0));
  CHECK(two.layers()[0].role == LayerRole::illusion_core);
}

TEST_CASE("filling the core with the cloak's own filling reproduces the cloak") {
  for (int d : {2, 3}) {
    const CloakScenario s = base_scenario(d);
    const double m = s.magnification();
    const LayeredMedium cloak = build_cloak(s);
    const LayeredMedium dev = build_illusion_device(
        s, geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(std::pow(m, d - 2))),
        ScalarProfile::constant(std::pow(m, d)));
    for (double r : samples(0.0, 4.0, 800)) {
      const Layer& a = layer_at(cloak, r);
      const Layer& b = layer_at(dev, r);
      CHECK(a.sigma(r) == b.sigma(r));
      CHECK(a.tensor.alpha_r(r) == b.tensor.alpha_r(r));
      CHECK(a.tensor.alpha_t(r) == b.tensor.alpha_t(r));
      CHECK(a.s_delta == b.s_delta);
    }
  }
}

TEST_CASE("virtual medium is the dilation push-forward of the core") {
  const CloakScenario s = base_scenario();
  const LayeredMedium v = build_virtual_medium(s, geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(2.0)),
                                               ScalarProfile::constant(1.5));
  REQUIRE(v.layers().size() == 3);
  CHECK(v.layers()[0].r_out == 1.0);
  CHECK(v.layers()[0].tensor.alpha_r(0.3) == complex(2.0));
  // independently: m = 4, sigma_c m^{-d} = 1.5 / 16
  CHECK(std::abs(v.layers()[0].sigma(0.3) - 0.09375) < 1e-15);
  CHECK(v.layers()[1].sigma(1.5) == complex(1.0));

  const CloakScenario s3 = base_scenario(3);
  const LayeredMedium v3 = build_virtual_medium(s3, geometry::RadialTensorProfile::identity(), ScalarProfile::constant(1.0));
  CHECK(std::abs(v3.layers()[0].tensor.alpha_r(0.5) - 0.25) < 1e-15);
  CHECK(std::abs(v3.layers()[0].sigma(0.5) - 1.0 / 64.0) < 1e-15);

  // a power-law core keeps its shape: m^{-d} sigma_c(x/m)
  const LayeredMedium vp =
      build_virtual_medium(s, geometry::RadialTensorProfile::identity(), ScalarProfile::power_law(1.0, 1.0));
  CHECK(std::abs(vp.layers()[0].sigma(0.8) - 0.8 / 4.0 / 16.0) < 1e-15);
  // a tensor vanishing at the origin is not elliptic
  CHECK_THROWS_AS(build_virtual_medium(s, geometry::RadialTensorProfile::isotropic(ScalarProfile::power_law(1.0, 1.0)),
                                       ScalarProfile::constant(1.0)),
                  std::invalid_argument);
}

TEST_CASE("validation report") {
  const ValidationReport h = validate(homogeneous_medium(2, 4.0));
  CHECK(h.ellipticity == 1.0);
  CHECK(h.sign_changing_regions.empty());

  CloakScenario s = base_scenario();
  const ValidationReport c = validate(build_cloak(s));
  REQUIRE(c.sign_changing_regions.size() == 1);
  CHECK(c.sign_changing_regions[0].lo == 0.5);
  CHECK(c.sign_changing_regions[0].hi == 1.0);
  CHECK(c.sign_changing_layer_count == 2);
  CHECK(c.gaps.size() == 5);

  s.object.tensor = geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(3.0));
  const ValidationReport o = validate(build_cloak(s));
  CHECK(o.layers[3].ellipticity == 3.0);
}

TEST_CASE("medium tiling is enforced") {
  Layer a;
  a.r_in = 0.0;
  a.r_out = 1.0;
  Layer b;
  b.r_in = 1.1;
  b.r_out = 2.0;
  CHECK_THROWS_AS(LayeredMedium(2, {a, b}), std::invalid_argument);
  b.r_in = 1.0;
  b.s_delta = complex(-1.0, 0.1);
  CHECK_THROWS_AS(LayeredMedium(2, {a, b}), std::invalid_argument);
  b.s_zero = -1.0;
  CHECK_NOTHROW(LayeredMedium(2, {a, b}));
}

TEST_CASE("illusion device golden layer list") {
  const CloakScenario s = base_scenario();
  const LayeredMedium dev = build_illusion_device(s, geometry::RadialTensorProfile::isotropic(ScalarProfile::constant(2.0)),
                                                  ScalarProfile::constant(1.5));
  const nlohmann::json got = to_json(dev);
  const std::string path = std::string(NEGALENS_GOLDEN_DIR) + "/illusion_device_d2.json";
  if (std::getenv("NEGALENS_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(path) << got.dump(2) << '\n';
  }
  std::ifstream in(path);
  REQUIRE(in.good());
  const nlohmann::json want = nlohmann::json::parse(in);
  CHECK(got == want);

  // Cross-check the golden entries against the defining formulas.
  const auto& layers = want["layers"];
  REQUIRE(layers.size() == 7);
  CHECK(layers[0]["role"] == "illusion_core");
  CHECK(layers[0]["r_out"].get<double>() == 0.25);
  CHECK(layers[0]["alpha_r"]["re"].get<double>() == 2.0);
  CHECK(layers[0]["sigma"]["re"].get<double>() == 1.5);
  CHECK(layers[1]["role"] == "inner_fill");
  CHECK(layers[1]["sigma"]["re"].get<double>() == 16.0);
  // 2D complementary layer on (r1, r2/gamma): Kelvin push of (I, 1) about r2 = 1:
  // alpha unchanged, sigma(y) = y^-4.
  CHECK(layers[2]["role"] == "complementary");
  CHECK(layers[2]["alpha_r"]["re"].get<double>() == 1.0);
  CHECK(layers[2]["sigma"]["p"].get<double>() == -4.0);
  CHECK(layers[2]["sigma"]["re"].get<double>() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(layers[2]["s_delta"]["re"].get<double>() == -1.0);
  CHECK(layers[2]["s_delta"]["im"].get<double>() == 1e-3);
  CHECK(layers[4]["role"] == "object");
  CHECK(layers[6]["r_out"].get<double>() == 4.0);
}
