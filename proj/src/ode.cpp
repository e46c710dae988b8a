#include "patchcm/ode.hpp"

#include <algorithm>
#include <cmath>

namespace patchcm {

namespace {

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

// Shampine's quartic interpolant for the 7 stages
constexpr double bi[7][4] = {
    {1.0, -183.0 / 64, 37.0 / 12, -145.0 / 128},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 1500.0 / 371, -1000.0 / 159, 1000.0 / 371},
    {0.0, -125.0 / 32, 125.0 / 12, -375.0 / 64},
    {0.0, 9477.0 / 3392, -729.0 / 106, 25515.0 / 6784},
    {0.0, -11.0 / 7, 11.0 / 3, -55.0 / 28},
    {0.0, 3.0 / 2, -4.0, 5.0 / 2}};

}  // namespace

Eigen::VectorXd Trajectory::eval(double t) const {
  const bool fwd = mesh_.back() >= mesh_.front();
  const double lo = fwd ? mesh_.front() : mesh_.back();
  const double hi = fwd ? mesh_.back() : mesh_.front();
  t = std::clamp(t, lo, hi);

  // locate interval
  std::size_t i;
  if (fwd) {
    auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t);
    i = static_cast<std::size_t>(std::distance(mesh_.begin(), it));
  } else {
    auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t, std::greater<double>());
    i = static_cast<std::size_t>(std::distance(mesh_.begin(), it));
  }
  if (i == 0) i = 1;
  if (i >= mesh_.size()) i = mesh_.size() - 1;
  const double h = mesh_[i] - mesh_[i - 1];
  if (t == mesh_[i]) return y_[i];
  const double s = (t - mesh_[i - 1]) / h;
  const auto& P = interp_[i - 1];
  Eigen::VectorXd acc = P.col(3);
  for (int k = 2; k >= 0; --k) acc = acc * s + P.col(k);
  return y_[i - 1] + (h * s) * acc;
}

Trajectory integrate(const OdeRhs& rhs, double t0, double t1, const Eigen::VectorXd& y0,
                     const OdeOptions& opts) {
  if (t1 == t0) throw ValidationError("integrate: empty time span");
  const int n = static_cast<int>(y0.size());
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double atol = opts.tol, rtol = opts.tol;

  Trajectory traj;
  traj.tol_ = opts.tol;
  traj.mesh_.push_back(t0);
  traj.y_.push_back(y0);

  Eigen::VectorXd y = y0, f1(n), f2(n), f3(n), f4(n), f5(n), f6(n), f7(n), ytmp(n),
                  ynew(n), err(n);
  rhs(t0, y, f1);
  if (!f1.allFinite()) throw SolverError("integrate: non-finite derivative at start");

  double h;
  if (opts.fixed_step) {
    h = std::abs(*opts.fixed_step);
  } else {
    double scale = f1.cwiseAbs().maxCoeff() + y.cwiseAbs().maxCoeff() + 1.0;
    h = std::min(span / 10.0, 0.1 / scale);
    h = std::max(h, 1e-8 * span);
  }
  if (opts.max_step > 0) h = std::min(h, opts.max_step);

  double t = t0;
  double err_old = 1e-4;
  long steps = 0;
  const double hmin = 1e-14 * std::max(1.0, std::abs(t0) + std::abs(t1));

  while (dir * (t1 - t) > 0) {
    if (++steps > opts.max_steps) throw SolverError("integrate: step limit exceeded");
    bool last = false;
    if (h >= std::abs(t1 - t)) {
      h = std::abs(t1 - t);
      last = true;
    }
    const double hs = dir * h;

    ytmp = y + hs * (a21 * f1);
    rhs(t + c2 * hs, ytmp, f2);
    ytmp = y + hs * (a31 * f1 + a32 * f2);
    rhs(t + c3 * hs, ytmp, f3);
    ytmp = y + hs * (a41 * f1 + a42 * f2 + a43 * f3);
    rhs(t + c4 * hs, ytmp, f4);
    ytmp = y + hs * (a51 * f1 + a52 * f2 + a53 * f3 + a54 * f4);
    rhs(t + c5 * hs, ytmp, f5);
    ytmp = y + hs * (a61 * f1 + a62 * f2 + a63 * f3 + a64 * f4 + a65 * f5);
    rhs(t + hs, ytmp, f6);
    ynew = y + hs * (b1 * f1 + b3 * f3 + b4 * f4 + b5 * f5 + b6 * f6);
    rhs(t + hs, ynew, f7);  // FSAL

    if (!ynew.allFinite() || !f7.allFinite())
      throw SolverError("integrate: non-finite state at t=" + std::to_string(t + hs));

    err = e1 * f1 + e3 * f3 + e4 * f4 + e5 * f5 + e6 * f6 + e7 * f7;
    double errnorm = 0;
    for (int i = 0; i < n; ++i) {
      double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      double q = h * err[i] / sc;
      errnorm += q * q;
    }
    errnorm = std::sqrt(errnorm / n);

    const bool accept = opts.fixed_step.has_value() || errnorm <= 1.0;
    if (accept) {
      Eigen::Matrix<double, Eigen::Dynamic, 4> P(n, 4);
      const Eigen::VectorXd* fs[7] = {&f1, &f2, &f3, &f4, &f5, &f6, &f7};
      for (int col = 0; col < 4; ++col) {
        P.col(col).setZero();
        for (int s = 0; s < 7; ++s)
          if (bi[s][col] != 0.0) P.col(col) += bi[s][col] * (*fs[s]);
      }
      t = last ? t1 : t + hs;
      y.swap(ynew);
      f1.swap(f7);
      traj.mesh_.push_back(t);
      traj.y_.push_back(y);
      traj.interp_.push_back(std::move(P));
    }

    if (!opts.fixed_step) {
      // PI controller (Hairer dopri5 defaults)
      constexpr double beta = 0.04, expo = 0.2 - beta * 0.75, safety = 0.9;
      double fac = errnorm > 0 ? safety * std::pow(errnorm, -expo) * std::pow(err_old, beta)
                               : 5.0;
      fac = std::clamp(fac, 0.2, accept ? 5.0 : 1.0);
      h *= fac;
      if (opts.max_step > 0) h = std::min(h, opts.max_step);
      if (accept) err_old = std::max(errnorm, 1e-4);
      if (h < hmin)
        throw SolverError("integrate: step size underflow at t=" + std::to_string(t));
    }
  }
  return traj;
}

}  // namespace patchcm
