#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "patchcm/bvp.hpp"

using namespace patchcm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Duffing radial equation in the orientation-normalized frame:
// dr/dtheta = a r^3 cos^3(t) sin(t) / (1 + a r^2 cos^4(t))
ThetaRhs duffing_radial(double a) {
  return [a](double t, const VectorXd& r, VectorXd& dr) {
    const double c = std::cos(t), s = std::sin(t);
    const double r2 = r[0] * r[0];
    dr.resize(1);
    dr[0] = a * r2 * r[0] * c * c * c * s / (1.0 + a * r2 * c * c * c * c);
  };
}

}  // namespace

TEST_CASE("linear periodic: ydot = -y + cos(theta)") {
  MatrixFn A = [](double) { return MatrixXd::Constant(1, 1, -1.0); };
  VectorFn g = [](double t) { return VectorXd::Constant(1, std::cos(t)); };
  PeriodicCurve y = solve_periodic_linear(A, g, 1);
  for (int i = 0; i <= 64; ++i) {
    double t = kTwoPi * i / 64;
    CHECK(std::abs(y.eval(t)[0] - 0.5 * (std::cos(t) + std::sin(t))) < 1e-8);
  }
}

TEST_CASE("linear periodic: constant forcing") {
  MatrixFn A = [](double) { return MatrixXd::Constant(1, 1, -1.0); };
  VectorFn g = [](double) { return VectorXd::Ones(1); };
  PeriodicCurve y = solve_periodic_linear(A, g, 1);
  CHECK(y.eval(1.0)[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(y.wrap_gap() <= 1e-8 * 2);
}

TEST_CASE("monodromy of a constant system matches the matrix exponential") {
  MatrixXd B(3, 3);
  B << 1.5, 0.5, 0, -1.5, -0.5, -6, 5.0 / 6, 1.0 / 6, -1;
  MatrixFn A = [&](double) { return B; };
  MatrixXd M = monodromy(A, 3);
  MatrixXd expm = (kTwoPi * B).exp();
  CHECK((M - expm).cwiseAbs().maxCoeff() < 1e-8 * expm.cwiseAbs().maxCoeff());

  // Floquet magnitudes e^{2 pi Re lambda}: {e^{-2pi}, e^{pi}, e^{pi}}
  Eigen::EigenSolver<MatrixXd> es(M);
  std::vector<double> mags;
  for (int i = 0; i < 3; ++i) mags.push_back(std::abs(es.eigenvalues()[i]));
  std::sort(mags.begin(), mags.end());
  CHECK(mags[0] == doctest::Approx(std::exp(-kTwoPi)).epsilon(1e-6));
  CHECK(mags[1] == doctest::Approx(std::exp(kTwoPi / 2)).epsilon(1e-6));
  CHECK(mags[2] == doctest::Approx(std::exp(kTwoPi / 2)).epsilon(1e-6));

  VectorFn g = [](double) { return VectorXd::Zero(3); };
  PeriodicCurve y = solve_periodic_linear(A, g, 3);
  CHECK(y.eval(2.0).norm() < 1e-10);
}

TEST_CASE("linear periodic under a huge monodromy stays accurate") {
  // y'' = 30 y + cos(theta) has the periodic solution y = -cos(theta)/31;
  // the monodromy magnitude e^{2 pi sqrt(30)} ~ 9e14 rules out single
  // shooting but the segmented solve must not care.
  MatrixXd A0(2, 2);
  A0 << 0, 1, 30, 0;
  MatrixFn A = [&](double) { return A0; };
  VectorFn g = [](double t) { return Eigen::Vector2d(0.0, std::cos(t)); };
  PeriodicCurve y = solve_periodic_linear(A, g, 2);
  for (int i = 0; i < 32; ++i) {
    double t = kTwoPi * i / 32;
    CHECK(std::abs(y.eval(t)[0] - (-std::cos(t) / 31.0)) < 1e-8);
    CHECK(std::abs(y.eval(t)[1] - (std::sin(t) / 31.0)) < 1e-8);
  }
}

TEST_CASE("floquet multiplier at 1 is reported") {
  // A = 0 makes the monodromy the identity
  MatrixFn A = [](double) { return MatrixXd::Zero(1, 1); };
  VectorFn g = [](double t) { return VectorXd::Constant(1, std::cos(t)); };
  CHECK_THROWS_AS(solve_periodic_linear(A, g, 1), SolverError);
}

TEST_CASE("nonlinear periodic: unique fixed point of dz/dtheta = -z + c") {
  const double c = 0.75;
  ThetaRhs rhs = [c](double, const VectorXd& z, VectorXd& dz) {
    dz.resize(1);
    dz[0] = -z[0] + c;
  };
  CurveFn guess = [](double) { return VectorXd::Zero(1); };
  PeriodicCurve z = solve_periodic_nonlinear(rhs, nullptr, guess, std::nullopt);
  CHECK(z.eval(0.0)[0] == doctest::Approx(c).epsilon(1e-9));
  CHECK(z.eval(3.0)[0] == doctest::Approx(c).epsilon(1e-9));
  CHECK(z.wrap_gap() < 1e-8);
}

TEST_CASE("nonlinear periodic with strong instability") {
  // z'' = 30 sin(z) + cos(theta), periodic orbit near -cos(theta)/31
  ThetaRhs rhs = [](double t, const VectorXd& z, VectorXd& dz) {
    dz.resize(2);
    dz << z[1], 30.0 * std::sin(z[0]) + std::cos(t);
  };
  ThetaJac jac = [](double, const VectorXd& z) {
    MatrixXd J(2, 2);
    J << 0, 1, 30.0 * std::cos(z[0]), 0;
    return J;
  };
  CurveFn guess = [](double t) {
    return Eigen::Vector2d(-std::cos(t) / 31.0, std::sin(t) / 31.0);
  };
  BvpOptions opts;
  opts.segments = 24;
  PeriodicCurve z = solve_periodic_nonlinear(rhs, jac, guess, std::nullopt, opts);
  CHECK(z.wrap_gap() < 1e-7);
  // residual of the ODE at a few angles via central differences
  for (int i = 0; i < 8; ++i) {
    double t = 0.3 + kTwoPi * i / 8;
    const double h = 1e-5;
    Eigen::Vector2d d = (z.eval(t + h) - z.eval(t - h)) / (2 * h);
    VectorXd f(2);
    rhs(t, z.eval(t), f);
    CHECK((d - f).norm() < 1e-4);
  }
}

TEST_CASE("pinned duffing radial curve hits the hamiltonian oracle") {
  VectorXd r0(1);
  r0 << 1.0;
  PeriodicCurve r = solve_periodic_nonlinear(duffing_radial(0.25), nullptr, nullptr,
                                             std::make_optional(r0));
  // conservation of H = r^2/2 + a r^4/4 on the axis points
  CHECK(r.eval(kTwoPi / 4)[0] == doctest::Approx(std::sqrt(1.125)).epsilon(1e-7));
  CHECK(r.eval(kTwoPi / 2)[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.wrap_gap() < 1e-7);
}

TEST_CASE("pinned solve rejects non-periodic orbits") {
  ThetaRhs drift = [](double, const VectorXd& r, VectorXd& dr) {
    dr.resize(1);
    dr[0] = 0.01 * r[0];
  };
  VectorXd r0(1);
  r0 << 1.0;
  CHECK_THROWS_AS(
      solve_periodic_nonlinear(drift, nullptr, nullptr, std::make_optional(r0)),
      DomainError);
}

TEST_CASE("gronwall separation of pinned radial curves") {
  const double a = 0.25, eps = 1.0, delta = 1e-3;
  ThetaRhs rhs = duffing_radial(a);
  VectorXd ra(1), rb(1);
  ra << eps;
  rb << eps + delta;
  PeriodicCurve ca = solve_periodic_nonlinear(rhs, nullptr, nullptr, std::make_optional(ra));
  PeriodicCurve cb = solve_periodic_nonlinear(rhs, nullptr, nullptr, std::make_optional(rb));

  // numerical Lipschitz constant sup |d(r R)/dr| over the annulus
  double K = 0;
  for (int i = 0; i < 128; ++i) {
    double t = kTwoPi * i / 128;
    for (double rr = 0.9; rr <= 1.2; rr += 0.01) {
      const double h = 1e-6;
      VectorXd hi(1), lo(1), fhi(1), flo(1);
      hi << rr + h;
      lo << rr - h;
      rhs(t, hi, fhi);
      rhs(t, lo, flo);
      K = std::max(K, std::abs(fhi[0] - flo[0]) / (2 * h));
    }
  }
  double worst = 0;
  for (int i = 0; i <= 256; ++i) {
    double t = kTwoPi * i / 256;
    worst = std::max(worst, std::abs(cb.eval(t)[0] - ca.eval(t)[0]));
  }
  CHECK(worst <= delta * std::exp(kTwoPi * K) * (1 + 1e-6));
}
