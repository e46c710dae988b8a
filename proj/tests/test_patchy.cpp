#include <doctest.h>

#include <cmath>
#include <random>

#include "patchcm/patchy.hpp"
#include "patchcm/sysdef.hpp"

using namespace patchcm;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

SystemDefinition load_fixture(const char* name) {
  return load_system_definition(std::string(PATCHCM_FIXTURE_DIR) + "/" + name);
}

std::shared_ptr<const CartesianCenterSystem> harmonic_quadratic_system() {
  // dz/dt = -z + w1^2 + w2^2 over the harmonic oscillator; the manifold is
  // z = w1^2 + w2^2 exactly
  nlohmann::json doc = {{"schema_version", 1},
                        {"name", "harmonic-quadratic"},
                        {"kind", "center-system"},
                        {"B", {{-1.0}}},
                        {"Zbar", {"w1^2 + w2^2"}},
                        {"P", "0"},
                        {"Q", "0"},
                        {"reference", {"w1^2 + w2^2"}}};
  return parse_system_definition(doc).center_system();
}

std::shared_ptr<const CartesianCenterSystem> duffing_scalar_system() {
  nlohmann::json doc = {{"schema_version", 1},
                        {"name", "duffing-scalar"},
                        {"kind", "center-system"},
                        {"B", {{-1.0}}},
                        {"Zbar", {"w1^2 + w2^2"}},
                        {"P", "0"},
                        {"Q", "-a*w1^3"},
                        {"rotation", -1},
                        {"params", {{"a", 0.25}}}};
  return parse_system_definition(doc).center_system();
}

}  // namespace

TEST_CASE("radial curves") {
  SUBCASE("harmonic exosystem gives constant curves") {
    auto polar = polar_reduce(harmonic_quadratic_system());
    PeriodicCurve r = compute_radial_curve(polar, 0.5, BvpOptions{});
    for (double theta : {0.0, 1.1, 4.4}) CHECK(r.eval(theta)[0] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("duffing curve against the hamiltonian oracle") {
    auto polar = polar_reduce(duffing_scalar_system());
    PeriodicCurve r = compute_radial_curve(polar, 1.0, BvpOptions{});
    CHECK(r.eval(kTwoPi / 4)[0] == doctest::Approx(std::sqrt(1.125)).epsilon(1e-7));
    CHECK(r.eval(kTwoPi / 2)[0] == doctest::Approx(1.0).epsilon(1e-7));
  }

  SUBCASE("launch radius must be positive") {
    auto polar = polar_reduce(harmonic_quadratic_system());
    CHECK_THROWS_AS(compute_radial_curve(polar, 0.0, BvpOptions{}), ValidationError);
  }
}

TEST_CASE("compute_patch on the harmonic quadratic system") {
  auto polar = polar_reduce(harmonic_quadratic_system());
  const double r0 = 0.8;
  PeriodicCurve inner = compute_radial_curve(polar, r0, BvpOptions{});
  CurveFn guess = [&](double) { return VectorXd::Zero(1); };
  auto coeffs = compute_patch(polar, inner, 1, guess, BvpOptions{});

  // dz/dtheta = -z + r0^2 has the periodic solution z = r0^2; the first
  // coefficient solves c1' = -c1 + 2 r0, so c1 = 2 r0
  REQUIRE(coeffs.size() == 2);
  for (double theta : {0.0, 0.9, 3.3, 6.0}) {
    CHECK(coeffs[0].eval(theta)[0] == doctest::Approx(r0 * r0).epsilon(1e-8));
    CHECK(coeffs[1].eval(theta)[0] == doctest::Approx(2 * r0).epsilon(1e-8));
  }
}

TEST_CASE("patch base curve on the egg carton follows the true manifold") {
  auto polar = polar_reduce(load_fixture("eggcarton.json").center_system());
  PeriodicCurve inner = compute_radial_curve(polar, 1.0, BvpOptions{});
  SeedPolynomial seed = compute_seed(polar.base(), 2);
  CurveFn guess = [&](double theta) { return seed.eval_polar(theta, 1.0, 0)[0]; };
  auto coeffs = compute_patch(polar, inner, 1, guess, BvpOptions{});

  for (int i = 0; i < 8; ++i) {
    const double theta = kTwoPi * i / 8;
    const double w1 = std::cos(theta), w2 = std::sin(theta);
    VectorXd c0 = coeffs[0].eval(theta);
    CHECK(c0[0] == doctest::Approx(w1).epsilon(1e-7));
    CHECK(c0[1] == doctest::Approx(w2).epsilon(1e-7));
    CHECK(c0[2] == doctest::Approx(std::sin(w1) * std::sin(w2)).epsilon(1e-7));
  }
}

TEST_CASE("transport correction: c1 matches differences of base curves") {
  // on a Duffing-driven reduction the radial curves are genuinely curved,
  // so the first-order coefficient must track d psi/dr across the family
  auto polar = polar_reduce(duffing_scalar_system());
  const double r1 = 1.0, dr = 0.02;
  PeriodicCurve ra = compute_radial_curve(polar, r1 - dr, BvpOptions{});
  PeriodicCurve rb = compute_radial_curve(polar, r1, BvpOptions{});
  PeriodicCurve rc = compute_radial_curve(polar, r1 + dr, BvpOptions{});
  CurveFn guess = [&](double) { return VectorXd::Constant(1, 1.0); };
  auto pa = compute_patch(polar, ra, 1, guess, BvpOptions{});
  auto pb = compute_patch(polar, rb, 2, guess, BvpOptions{});
  auto pc = compute_patch(polar, rc, 1, guess, BvpOptions{});

  for (int i = 0; i < 12; ++i) {
    const double theta = kTwoPi * i / 12;
    const double gap = rc.eval(theta)[0] - ra.eval(theta)[0];
    const double fd = (pc[0].eval(theta)[0] - pa[0].eval(theta)[0]) / gap;
    CHECK(pb[1].eval(theta)[0] == doctest::Approx(fd).epsilon(5e-3));
  }
}

TEST_CASE("build_patchy on the egg carton") {
  auto def = load_fixture("eggcarton.json");
  auto sys = def.center_system();
  auto polar = polar_reduce(sys);
  SeedPolynomial seed = compute_seed(*sys, 2);
  PatchyOptions opts;
  std::vector<double> schedule{0.5, 1.0, 1.5, 2.0};
  PatchySolution sol = build_patchy(polar, seed, 2, schedule, opts);

  SUBCASE("accuracy against the true manifold") {
    double worst = 0;
    for (int i = 0; i < 24; ++i)
      for (double r : {0.2, 0.7, 1.2, 1.9}) {
        const double theta = kTwoPi * i / 24;
        VectorXd z = sol.evaluate(theta, r);
        VectorXd ref = def.reference_at(r * std::cos(theta), r * std::sin(theta));
        worst = std::max(worst, (z - ref).cwiseAbs().maxCoeff());
      }
    CHECK(worst < 0.05);  // dominated by the sigma^3 truncation of the 0.5-thick annuli
  }

  SUBCASE("manifold through the origin and exact wrapping") {
    CHECK(sol.evaluate(0.77, 0.0).norm() == 0.0);
    // 0.25 + 2pi is exact in binary, so the wrap must be bit-identical
    VectorXd a = sol.evaluate(0.25, 1.2), b = sol.evaluate(0.25 + kTwoPi, 1.2);
    CHECK((a - b).norm() == 0.0);
    // and any angle agrees bit-exactly with its reduced representative
    const double theta = 0.3 + kTwoPi;
    VectorXd c = sol.evaluate(theta, 1.2), d = sol.evaluate(theta - kTwoPi, 1.2);
    CHECK((c - d).norm() == 0.0);
  }

  SUBCASE("tiling: every point in the domain belongs to exactly one region") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi), rad(0.0, 2.49);
    for (int trial = 0; trial < 1000; ++trial) {
      const double theta = ang(rng), r = rad(rng);
      const int region = sol.region_of(theta, r);
      const auto& curves = sol.curves();
      if (region < 0) {
        CHECK(r < curves.front().eval(theta));
      } else {
        CHECK(r >= curves[region].eval(theta));
        if (region + 1 < static_cast<int>(curves.size()))
          CHECK((r < curves[region + 1].eval(theta) ||
                 region == static_cast<int>(sol.patches().size()) - 1));
      }
    }
  }

  SUBCASE("outer slack extends the last patch by its increment") {
    CHECK_NOTHROW(sol.evaluate(1.0, 2.3));
    CHECK_THROWS_AS(sol.evaluate(1.0, 2.6), DomainError);
  }

  SUBCASE("evaluate_cartesian") {
    CHECK(sol.evaluate_cartesian(0.0, 0.0).norm() == 0.0);
    VectorXd z = sol.evaluate_cartesian(1.0, 0.0);
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(z[1] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(z[2] == doctest::Approx(0.0).epsilon(1e-6));
  }

  SUBCASE("pde residual inside a patch") {
    const double theta = 1.0, r = 1.05;  // shallow depth inside annulus 2
    CHECK(pde_residual(polar, sol, theta, r) < 1e-3);
    CHECK(pde_residual(polar, sol, 0.4, 0.0) < 1e-6);
    CHECK_THROWS_AS(pde_residual(polar, sol, 1.0, sol.curves()[1].eval(1.0)), DomainError);
  }

  SUBCASE("serialize round trip is bit-exact") {
    nlohmann::json doc = serialize(sol);
    std::string text = doc.dump();
    PatchySolution back = deserialize(nlohmann::json::parse(text));
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi), rad(0.0, 2.4);
    for (int trial = 0; trial < 100; ++trial) {
      const double theta = ang(rng), r = rad(rng);
      VectorXd a = sol.evaluate(theta, r), b = back.evaluate(theta, r);
      for (int c = 0; c < a.size(); ++c) CHECK(a[c] == b[c]);
    }
  }

  SUBCASE("schema version is enforced") {
    nlohmann::json doc = serialize(sol);
    doc["schema_version"] = 99;
    CHECK_THROWS_AS(deserialize(doc), ValidationError);
  }
}

TEST_CASE("seed-only solution evaluates everywhere") {
  auto sys = harmonic_quadratic_system();
  auto polar = polar_reduce(sys);
  SeedPolynomial seed = compute_seed(*sys, 2);
  PatchySolution sol = build_patchy(polar, seed, 1, {}, PatchyOptions{});
  CHECK(sol.patches().empty());
  CHECK(sol.evaluate(0.3, 5.0)[0] == doctest::Approx(25.0).epsilon(1e-9));

  nlohmann::json doc = serialize(sol);
  CHECK(!doc.contains("patches"));
  PatchySolution back = deserialize(doc);
  CHECK(back.evaluate(0.3, 5.0)[0] == sol.evaluate(0.3, 5.0)[0]);
}

TEST_CASE("linear system: first patch base curve equals the seed") {
  auto def = load_fixture("linear-example1.json");
  auto sys = def.center_system();
  auto polar = polar_reduce(sys);
  SeedPolynomial seed = compute_seed(*sys, 1);
  PatchySolution sol = build_patchy(polar, seed, 1, {0.5, 1.0}, PatchyOptions{});
  for (int i = 0; i < 8; ++i) {
    const double theta = kTwoPi * i / 8;
    VectorXd expect = seed.eval_polar(theta, 0.5, 0)[0];
    VectorXd got = sol.patches()[0].coeff(0, theta);
    CHECK((expect - got).norm() < 1e-8);
  }
  // the seed is exact for linear systems, so the residual is tiny everywhere
  CHECK(pde_residual(polar, sol, 0.9, 0.25) < 1e-8);
}

TEST_CASE("pipeline failure keeps the completed prefix") {
  // a slow outward spiral: periodic for tiny radii within tolerance, but
  // the drift kills the periodicity check on the second curve
  nlohmann::json doc = {{"schema_version", 1},
                        {"name", "spiral"},
                        {"kind", "center-system"},
                        {"B", {{-1.0}}},
                        {"Zbar", {"0"}},
                        {"P", "c*w1*(w1^2 + w2^2)"},
                        {"Q", "c*w2*(w1^2 + w2^2)"},
                        {"params", {{"c", 0.0001}}}};
  auto sys = parse_system_definition(doc).center_system();
  auto polar = polar_reduce(sys);
  SeedPolynomial seed = compute_seed(*sys, 1);
  try {
    build_patchy(polar, seed, 1, {0.05, 0.1, 0.4}, PatchyOptions{});
    FAIL("expected BuildAborted");
  } catch (const BuildAborted& aborted) {
    CHECK(aborted.annulus >= 1);
    CHECK(aborted.prefix != nullptr);
    CHECK(aborted.prefix->curves().size() >= 1);
    CHECK_NOTHROW(aborted.prefix->evaluate(0.0, 0.02));
  }
}

TEST_CASE("schedule validation") {
  auto sys = harmonic_quadratic_system();
  auto polar = polar_reduce(sys);
  SeedPolynomial seed = compute_seed(*sys, 1);
  CHECK_THROWS_AS(build_patchy(polar, seed, 1, {0.5, 0.5}, PatchyOptions{}),
                  ValidationError);
  CHECK_THROWS_AS(build_patchy(polar, seed, 1, {-0.5, 0.5}, PatchyOptions{}),
                  ValidationError);
}
