#include <doctest.h>

#include <cmath>

#include "patchcm/bvp.hpp"
#include "patchcm/seed.hpp"
#include "patchcm/sysdef.hpp"

using namespace patchcm;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

SystemDefinition load_fixture(const char* name) {
  return load_system_definition(std::string(PATCHCM_FIXTURE_DIR) + "/" + name);
}

}  // namespace

TEST_CASE("example-1 linear manifold is recovered exactly") {
  auto sys = load_fixture("linear-example1.json").center_system();
  SeedPolynomial seed = compute_seed(*sys, 3);

  Eigen::MatrixXd expected(3, 2);
  expected << -1.0 / 3, 0, -0.5, -1.0 / 6, -0.5, -1.0 / 6;
  CHECK((seed.block(1) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(seed.block(2).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(seed.block(3).cwiseAbs().maxCoeff() <= 1e-12);

  // phi(1, 0) = (-1/3, -1/2, -1/2)
  VectorXd at = seed.eval(Vector2d(1.0, 0.0));
  CHECK(at[0] == doctest::Approx(-1.0 / 3).epsilon(1e-12));
  CHECK(at[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(at[2] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("egg-carton seed matches the taylor expansion of the true manifold") {
  auto sys = load_fixture("eggcarton.json").center_system();
  SeedPolynomial seed = compute_seed(*sys, 4);

  // degree 1: (w1, w2, 0)
  Eigen::MatrixXd d1(3, 2);
  d1 << 1, 0, 0, 1, 0, 0;
  CHECK((seed.block(1) - d1).cwiseAbs().maxCoeff() <= 1e-9);

  // degree 2: third component carries w1 w2 with coefficient 1
  CHECK(seed.block(2)(2, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(seed.block(2)(2, 0)) <= 1e-9);
  CHECK(std::abs(seed.block(2)(0, 1)) <= 1e-9);

  // sin w1 sin w2 has no odd-total-degree terms
  CHECK(seed.block(3).cwiseAbs().maxCoeff() <= 1e-9);

  // degree 4: -(w1^3 w2 + w1 w2^3)/6
  CHECK(seed.block(4)(2, 1) == doctest::Approx(-1.0 / 6).epsilon(1e-9));
  CHECK(seed.block(4)(2, 3) == doctest::Approx(-1.0 / 6).epsilon(1e-9));
}

TEST_CASE("eval_polar values and radial derivatives") {
  auto sys = load_fixture("eggcarton.json").center_system();
  SeedPolynomial seed = compute_seed(*sys, 2);

  SUBCASE("third component of the degree-2 seed at theta=pi/4") {
    auto out = seed.eval_polar(kTwoPi / 8, 0.2, 1);
    CHECK(out[0][2] == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(out[1][2] == doctest::Approx(0.2).epsilon(1e-9));
  }

  SUBCASE("value at r=0 is zero") {
    auto out = seed.eval_polar(1.234, 0.0, 0);
    CHECK(out[0].norm() == 0.0);
  }

  SUBCASE("rotational consistency") {
    auto a = seed.eval_polar(0.7, 1.3, 2);
    auto b = seed.eval_polar(0.7 + kTwoPi, 1.3, 2);
    for (int k = 0; k <= 2; ++k) CHECK((a[k] - b[k]).norm() <= 1e-12);
  }

  SUBCASE("kmax beyond the degree is rejected") {
    CHECK_THROWS_AS(seed.eval_polar(0.0, 1.0, 3), ValidationError);
  }
}

TEST_CASE("radial derivatives against finite differences of eval") {
  auto sys = load_fixture("volcano.json").center_system();
  SeedPolynomial seed = compute_seed(*sys, 6);
  const double theta = 0.9, r = 0.8, h = 1e-4;
  auto at = [&](double rr) { return seed.eval_polar(theta, rr, 0)[0]; };
  auto out = seed.eval_polar(theta, r, 2);
  VectorXd d1 = (at(r + h) - at(r - h)) / (2 * h);
  VectorXd d2 = (at(r + h) - 2 * at(r) + at(r - h)) / (h * h);
  CHECK((out[1] - d1).norm() <= 1e-6);
  CHECK((out[2] - d2).norm() <= 1e-4);
}

TEST_CASE("seed PDE residual scales as r^N") {
  auto def = load_fixture("eggcarton.json");
  auto sys = def.center_system();
  auto polar = polar_reduce(sys);
  const int N = 2;
  SeedPolynomial seed = compute_seed(*sys, N);

  // harmonic exosystem: residual(theta, r) = d psi/d theta - F(theta, r, psi)
  auto residual = [&](double r) {
    double worst = 0;
    const double h = 1e-5;
    for (int i = 0; i < 16; ++i) {
      const double theta = kTwoPi * i / 16 + 0.05;
      VectorXd dth =
          (seed.eval_polar(theta + h, r, 0)[0] - seed.eval_polar(theta - h, r, 0)[0]) / (2 * h);
      VectorXd f = polar.F(theta, r, seed.eval_polar(theta, r, 0)[0]);
      worst = std::max(worst, (dth - f).norm());
    }
    return worst;
  };
  const double r1 = 0.8;
  CHECK(residual(r1) / residual(r1 / 2) >= std::pow(2.0, N - 0.5));
}

TEST_CASE("linear systems produce only a degree-1 block for any degree") {
  auto sys = load_fixture("linear-example1.json").center_system();
  SeedPolynomial seed = compute_seed(*sys, 6);
  for (int d = 2; d <= 6; ++d) CHECK(seed.block(d).cwiseAbs().maxCoeff() <= 1e-11);
}

TEST_CASE("pendulum zero-exosystem seed solves the reduced PDE") {
  auto def = load_fixture("pendulum-duffing.json");
  auto sys = def.center_system();
  CHECK(sys->orientation() == -1);
  SeedPolynomial seed = compute_seed(*sys, 3);
  // leading behaviour: phi is odd, so the degree-2 block vanishes
  CHECK(seed.block(2).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(seed.block(1).cwiseAbs().maxCoeff() > 0.01);
}

TEST_CASE("compute_seed input checks") {
  auto sys = load_fixture("eggcarton.json").center_system();
  CHECK_THROWS_AS(compute_seed(*sys, 0), ValidationError);
}
