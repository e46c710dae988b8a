#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "patchcm/jet.hpp"

using namespace patchcm;

namespace {

Jet random_jet(std::mt19937& rng, int order, int nvars, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Jet j(order, nvars);
  for (int i = 0; i < j.size(); ++i) j.raw(i) = dist(rng);
  return j;
}

bool approx_equal(const Jet& a, const Jet& b, double tol = 1e-12) {
  if (!a.same_shape(b)) return false;
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff() <= tol;
}

// central finite-difference estimate of f^(k) at x
double fd_derivative_raw(const std::function<double(double)>& f, double x, int k, double h) {
  if (k == 0) return f(x);
  auto g = [&](double xx) { return fd_derivative_raw(f, xx, k - 1, h); };
  return (g(x + h) - g(x - h)) / (2 * h);
}

// two Richardson extrapolations knock the O(h^2) and O(h^4) terms out
double fd_derivative(const std::function<double(double)>& f, double x, int k, double h) {
  double d1 = fd_derivative_raw(f, x, k, h);
  double d2 = fd_derivative_raw(f, x, k, h / 2);
  double d3 = fd_derivative_raw(f, x, k, h / 4);
  double r1 = (4 * d2 - d1) / 3;
  double r2 = (4 * d3 - d2) / 3;
  return (16 * r2 - r1) / 15;
}

}  // namespace

TEST_CASE("jet_variable seeds") {
  Jet a = Jet::variable(0, 2.0, 2, 1);
  CHECK(a.coeffs().isApprox(Eigen::Vector3d(2, 1, 0)));

  Jet b = Jet::variable(1, 0.0, 1, 2);
  CHECK(b.coeffs().isApprox(Eigen::Vector3d(0, 0, 1)));

  Jet c = Jet::variable(0, 0.5, 0, 1);
  CHECK(c.size() == 1);
  CHECK(c.value() == 0.5);

  CHECK_THROWS_AS(Jet::variable(2, 0.0, 1, 2), ValidationError);
}

TEST_CASE("elementary expansions") {
  Jet one_plus = Jet::variable(0, 1.0, 2, 1);
  Jet sq = one_plus * one_plus;
  CHECK(sq.coeffs().isApprox(Eigen::Vector3d(1, 2, 1)));

  Jet s = sin(Jet::variable(0, 0.0, 3, 1));
  CHECK(s[0] == doctest::Approx(0.0));
  CHECK(s[1] == doctest::Approx(1.0));
  CHECK(s[2] == doctest::Approx(0.0));
  CHECK(s[3] == doctest::Approx(-1.0 / 6));

  Jet geom = Jet::constant(1.0, 2, 1) / one_plus;
  CHECK(geom.coeffs().isApprox(Eigen::Vector3d(1, -1, 1)));
}

TEST_CASE("jet_coefficient and derivative scaling") {
  Jet s = sin(Jet::variable(0, 0.0, 3, 1));
  const int deg3[] = {3};
  CHECK(s.coefficient(deg3) == doctest::Approx(-1.0 / 6));  // third derivative -1

  Jet c = Jet::constant(5.0, 0, 1);
  const int deg0[] = {0};
  CHECK(c.coefficient(deg0) == 5.0);

  Jet sq = pow_int(Jet::variable(0, 1.0, 2, 1), 2);
  const int deg1[] = {1};
  CHECK(sq.coefficient(deg1) == doctest::Approx(2.0));

  const int deg4[] = {4};
  CHECK_THROWS_AS(s.coefficient(deg4), ValidationError);
}

TEST_CASE("shape mismatch rejected") {
  Jet a(2, 1), b(2, 2), c(3, 1);
  CHECK_THROWS_AS(a + b, ValidationError);
  CHECK_THROWS_AS(a * c, ValidationError);
}

TEST_CASE("domain errors") {
  Jet zero_const = Jet::variable(0, 0.0, 2, 1);
  CHECK_THROWS_AS(Jet::constant(1.0, 2, 1) / zero_const, DomainError);
  CHECK_THROWS_AS(sqrt(Jet::variable(0, -1.0, 2, 1)), DomainError);
  CHECK_THROWS_AS(sqrt(Jet::variable(0, 0.0, 2, 1)), DomainError);
}

TEST_CASE("ring laws on random jets") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 50; ++trial) {
    const int order = 1 + trial % 5;
    const int nvars = 1 + trial % 3;
    Jet a = random_jet(rng, order, nvars);
    Jet b = random_jet(rng, order, nvars);
    Jet c = random_jet(rng, order, nvars);
    CHECK(approx_equal(a + b, b + a));
    CHECK(approx_equal(a * b, b * a));
    CHECK(approx_equal((a + b) + c, a + (b + c)));
    CHECK(approx_equal((a * b) * c, a * (b * c), 1e-10));
    CHECK(approx_equal(a * (b + c), a * b + a * c, 1e-10));
  }
}

TEST_CASE("division and sqrt invert multiplication") {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const int order = 1 + trial % 6;
    const int nvars = 1 + trial % 2;
    Jet a = random_jet(rng, order, nvars);
    Jet b = random_jet(rng, order, nvars);
    b.raw(0) = 1.5 + trial * 0.05;
    CHECK(approx_equal((a * b) / b, a, 1e-10));
    Jet pos = b * b;
    CHECK(approx_equal(sqrt(pos) * sqrt(pos), pos, 1e-10));
  }
}

TEST_CASE("derivative coefficients match finite differences") {
  struct Case {
    const char* name;
    std::function<double(double)> f;
    std::function<Jet(const Jet&)> jf;
    double x0;
    double h;  // base step; smaller where high derivatives grow fast
  };
  const Case cases[] = {
      {"sin", [](double x) { return std::sin(x); }, [](const Jet& j) { return sin(j); }, 0.7, 0.2},
      {"cos", [](double x) { return std::cos(x); }, [](const Jet& j) { return cos(j); }, -0.4, 0.2},
      {"exp", [](double x) { return std::exp(x); }, [](const Jet& j) { return exp(j); }, 0.3, 0.2},
      {"sqrt", [](double x) { return std::sqrt(x); }, [](const Jet& j) { return sqrt(j); }, 1.7, 0.06},
      {"recip", [](double x) { return 1.0 / x; },
       [](const Jet& j) { return Jet::constant(1.0, j.order(), j.nvars()) / j; }, 1.3, 0.05},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Jet j = c.jf(Jet::variable(0, c.x0, 4, 1));
    double factorial = 1;
    for (int k = 1; k <= 4; ++k) {
      factorial *= k;
      double fd = fd_derivative(c.f, c.x0, k, c.h);
      double jet_deriv = j[k] * factorial;
      CHECK(std::abs(jet_deriv - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("multivariate coefficients: mixed partial of sin(x*y)") {
  // d2/dxdy sin(xy) at (a,b) = cos(ab) - ab sin(ab)
  const double a = 0.6, b = -0.8;
  Jet x = Jet::variable(0, a, 2, 2);
  Jet y = Jet::variable(1, b, 2, 2);
  Jet f = sin(x * y);
  const int mixed[] = {1, 1};
  const double expect = std::cos(a * b) - a * b * std::sin(a * b);
  CHECK(f.coefficient(mixed) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("truncation consistency") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int order = 2 + trial % 4;
    const int nvars = 1 + trial % 2;
    Jet a = random_jet(rng, order, nvars, 0.5);
    Jet b = random_jet(rng, order, nvars, 0.5);
    a.raw(0) = 1.2;
    Jet full = sin(a * b + a) / a;
    Jet lower = sin(truncated(a, order - 1) * truncated(b, order - 1) + truncated(a, order - 1)) /
                truncated(a, order - 1);
    CHECK(approx_equal(truncated(full, order - 1), lower, 1e-12));
  }
}

TEST_CASE("jet_apply dispatch") {
  Jet x = Jet::variable(0, 0.5, 3, 1);
  Jet args2[] = {x, x};
  CHECK(approx_equal(jet_apply(JetOp::add, args2), x + x));
  CHECK(approx_equal(jet_apply(JetOp::mul, args2), x * x));
  Jet args1[] = {x};
  CHECK(approx_equal(jet_apply(JetOp::pow_int, args1, 3), pow_int(x, 3)));
  CHECK(approx_equal(jet_apply(JetOp::sin, args1), sin(x)));
}

TEST_CASE("lift, integrate and extract in the last variable") {
  // start from f(x) = 1 + 2x, lift, multiply by t, integrate in t
  Jet f = Jet::variable(0, 1.0, 1, 1) * 2.0 - 1.0;  // 1 + 2x
  Jet lifted = lift_append_var(f, 3);
  CHECK(lifted.nvars() == 2);
  Jet t = Jet::variable(1, 0.0, 3, 2);
  Jet g = integrate_last_var(lifted * t);  // (1+2x) t^2/2
  const int e02[] = {0, 2};
  const int e12[] = {1, 2};
  CHECK(g.coefficient(e02) == doctest::Approx(0.5));
  CHECK(g.coefficient(e12) == doctest::Approx(1.0));

  Jet back = extract_last_var_coeff(g, 2, 1);
  CHECK(back.nvars() == 1);
  CHECK(back[0] == doctest::Approx(0.5));
  CHECK(back[1] == doctest::Approx(1.0));
}

TEST_CASE("deflate_by_var") {
  Jet x = Jet::variable(0, 0.0, 3, 1);
  Jet f = pow_int(x, 2) * 3.0 + x;  // x + 3x^2
  Jet g = deflate_by_var(f, 0);     // 1 + 3x at order 2
  CHECK(g.order() == 2);
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(3.0));

  Jet bad = x + 1.0;
  CHECK_THROWS_AS(deflate_by_var(bad, 0), DomainError);
}
