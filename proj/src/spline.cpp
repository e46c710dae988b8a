#include "patchcm/spline.hpp"

#include <cmath>

namespace patchcm {

namespace {
constexpr double kTwoPiLocal = 6.283185307179586476925286766559;

// Cyclic tridiagonal solve with constant coefficients (sub = sup = off,
// diag = d) via Sherman-Morrison; B holds one right-hand side per column.
Eigen::MatrixXd solve_cyclic_tridiag(int m, double d, double off, const Eigen::MatrixXd& B) {
  auto thomas = [&](double d0_first, double d0_last, const Eigen::MatrixXd& rhs) {
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(m, d);
    diag[0] = d0_first;
    diag[m - 1] = d0_last;
    Eigen::MatrixXd x = rhs;
    Eigen::VectorXd cp(m);
    cp[0] = off / diag[0];
    x.row(0) /= diag[0];
    for (int i = 1; i < m; ++i) {
      double denom = diag[i] - off * cp[i - 1];
      cp[i] = off / denom;
      x.row(i) = (x.row(i) - off * x.row(i - 1)) / denom;
    }
    for (int i = m - 2; i >= 0; --i) x.row(i) -= cp[i] * x.row(i + 1);
    return x;
  };
  // A = T + gamma * u v^T with u = e_0 + e_{m-1} (corner entries `off`)
  const double gamma = -d;
  Eigen::MatrixXd y = thomas(d - gamma, d - off * off / gamma, B);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(m, 1);
  u(0, 0) = gamma;
  u(m - 1, 0) = off;
  Eigen::MatrixXd q = thomas(d - gamma, d - off * off / gamma, u);
  Eigen::RowVectorXd vy = y.row(0) + (off / gamma) * y.row(m - 1);
  double vq = q(0, 0) + (off / gamma) * q(m - 1, 0);
  return y - q * (vy / (1.0 + vq));
}

}  // namespace

PeriodicSpline::PeriodicSpline(Eigen::MatrixXd values) : values_(std::move(values)) {
  const int m = static_cast<int>(values_.rows());
  if (m < 3) throw ValidationError("PeriodicSpline needs at least 3 nodes");
  h_ = kTwoPiLocal / m;

  // moment equations: (h/6)(M_{i-1} + 4 M_i + M_{i+1}) = (y_{i+1} - 2 y_i + y_{i-1})/h
  Eigen::MatrixXd rhs(m, values_.cols());
  for (int i = 0; i < m; ++i) {
    const int prev = (i + m - 1) % m, next = (i + 1) % m;
    rhs.row(i) = (values_.row(next) - 2.0 * values_.row(i) + values_.row(prev)) * (6.0 / (h_ * h_));
  }
  moments_ = solve_cyclic_tridiag(m, 4.0, 1.0, rhs);
}

Eigen::VectorXd PeriodicSpline::eval(double theta) const {
  const int m = nodes();
  double t = std::fmod(theta, kTwoPiLocal);
  if (t < 0) t += kTwoPiLocal;
  int i = static_cast<int>(t / h_);
  if (i >= m) i = m - 1;
  const int next = (i + 1) % m;
  const double a = (t - i * h_) / h_;  // local coordinate in [0, 1]
  const double b = 1.0 - a;
  // natural cubic in moment form
  Eigen::VectorXd out =
      b * values_.row(i).transpose() + a * values_.row(next).transpose() +
      (h_ * h_ / 6.0) *
          ((b * b * b - b) * moments_.row(i).transpose() + (a * a * a - a) * moments_.row(next).transpose());
  return out;
}

double PeriodicSpline::eval_scalar(double theta) const { return eval(theta)[0]; }

}  // namespace patchcm
