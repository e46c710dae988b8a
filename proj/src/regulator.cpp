#include "patchcm/regulator.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "patchcm/ode.hpp"

namespace patchcm {

namespace {

// solve A X + X A^T = W by vectorization (dimensions <= 8 here)
Eigen::MatrixXd lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& W) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // vec(A X) = (I kron A) vec X, vec(X A^T) = (A kron I) vec X
  for (int i = 0; i < n; ++i) K.block(i * n, i * n, n, n) += A;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K.block(i * n, j * n, n, n) += A(i, j) * I;

  Eigen::VectorXd w(Eigen::Map<const Eigen::VectorXd>(W.data(), n * n));
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw SolverError("lyapunov solve: singular operator");
  Eigen::VectorXd x = lu.solve(w);
  return Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
}

bool is_hurwitz(const Eigen::MatrixXd& A, double margin = 1e-9) {
  for (const auto& lambda : eigenvalues(A))
    if (lambda.real() > -margin) return false;
  return true;
}

}  // namespace

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Bin,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(Bin.cols());
  if (A.cols() != n || Bin.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m)
    throw ValidationError("lqr_gain: incompatible dimensions");
  Eigen::LLT<Eigen::MatrixXd> rchol(R);
  if (rchol.info() != Eigen::Success)
    throw ValidationError("lqr_gain: R must be positive definite");

  // initial stabilizing gain
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m, n);
  if (!is_hurwitz(A)) {
    // Bass shift: (A + beta I) W + W (A + beta I)^T = 2 B B^T, K0 = B^T W^{-1}
    double max_re = 0;
    for (const auto& lambda : eigenvalues(A)) max_re = std::max(max_re, lambda.real());
    const double beta = 1.1 * max_re + 0.5;
    Eigen::MatrixXd shifted = A + beta * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd W;
    try {
      W = lyapunov(shifted, 2.0 * Bin * Bin.transpose());
    } catch (const SolverError&) {
      throw SolverError("lqr_gain: stabilizability bootstrap failed");
    }
    Eigen::FullPivLU<Eigen::MatrixXd> wlu(W);
    if (!wlu.isInvertible())
      throw SolverError("lqr_gain: stabilizability bootstrap failed (uncontrollable unstable mode)");
    K = Bin.transpose() * wlu.inverse();
    if (!is_hurwitz(A - Bin * K))
      throw SolverError("lqr_gain: bootstrap gain does not stabilize the pair");
  }

  // Newton-Kleinman: P_k solves the Lyapunov equation of the closed loop,
  // K_{k+1} = R^{-1} B^T P_k; monotone and quadratically convergent
  const double qnorm = Q.norm();
  Eigen::MatrixXd P;
  for (int iter = 0; iter < 60; ++iter) {
    Eigen::MatrixXd Acl = A - Bin * K;
    Eigen::MatrixXd W = -(Q + K.transpose() * R * K);
    P = lyapunov(Acl.transpose(), W);
    P = 0.5 * (P + P.transpose());
    K = rchol.solve(Bin.transpose() * P);
    Eigen::MatrixXd residual =
        A.transpose() * P + P * A - P * Bin * rchol.solve(Bin.transpose() * P) + Q;
    if (residual.norm() <= 1e-8 * qnorm || residual.norm() <= 1e-300) {
      if (!Q.isZero(0) && !is_hurwitz(A - Bin * K, 1e-6))
        throw SolverError("lqr_gain: converged gain is not stabilizing");
      return K;
    }
  }
  throw SolverError("lqr_gain: Newton iteration stalled");
}

void plant_linearization(const PlantNormalForm& plant, Eigen::MatrixXd& A,
                         Eigen::MatrixXd& Bin) {
  const int r = plant.relative_degree();
  const int m = plant.zdim();
  const int n = r + m;
  A = Eigen::MatrixXd::Zero(n, n);
  Bin = Eigen::MatrixXd::Zero(n, 1);
  for (int i = 0; i + 1 < r; ++i) A(i, i + 1) = 1.0;  // chain of integrators

  // xi_r row: gradient of the drift b(z, xi); z rows: gradient of f0
  auto directional = [&](int slot) {
    // slot < r: xi_slot, else z_{slot - r}
    std::vector<Jet> zj, xj;
    for (int i = 0; i < m; ++i)
      zj.push_back(slot == r + i ? Jet::variable(0, 0.0, 1, 1) : Jet::constant(0.0, 1, 1));
    for (int i = 0; i < r; ++i)
      xj.push_back(slot == i ? Jet::variable(0, 0.0, 1, 1) : Jet::constant(0.0, 1, 1));
    Eigen::VectorXd col(1 + m);
    col[0] = plant.drift(zj, xj)[1];
    for (int i = 0; i < m; ++i) col[1 + i] = plant.f0(i, zj, xj)[1];
    return col;
  };
  for (int slot = 0; slot < n; ++slot) {
    Eigen::VectorXd col = directional(slot);
    A(r - 1, slot) = col[0];
    for (int i = 0; i < m; ++i) A(r + i, slot) = col[1 + i];
  }
  Bin(r - 1, 0) = plant.input_gain_at(Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(r));
}

Regulator::Regulator(const PlantNormalForm& plant,
                     std::shared_ptr<const PatchySolution> solution, Eigen::MatrixXd gain)
    : plant_(plant), solution_(std::move(solution)), K_(std::move(gain)) {
  if (K_.rows() != 1 || K_.cols() != plant_.state_dim())
    throw ValidationError("regulator gain has wrong dimensions");
  if (solution_->n() != plant_.zdim())
    throw ValidationError("patchy solution dimension does not match the plant zero dynamics");
  Eigen::MatrixXd A, Bin;
  plant_linearization(plant_, A, Bin);
  if (!is_hurwitz(A - Bin * K_, 1e-6))
    throw ValidationError("regulator gain does not stabilize the plant linearization");
}

Regulator build_regulator(const PlantNormalForm& plant,
                          std::shared_ptr<const PatchySolution> solution,
                          Eigen::MatrixXd gain) {
  return Regulator(plant, std::move(solution), std::move(gain));
}

Eigen::VectorXd Regulator::pi(const Eigen::Vector2d& w) const {
  Eigen::VectorXd out(plant_.state_dim());
  out.head(plant_.relative_degree()) = plant_.varphi(w);
  out.tail(plant_.zdim()) = solution_->evaluate_cartesian(w[0], w[1]);
  return out;
}

double Regulator::kappa(const Eigen::Vector2d& w) const {
  Eigen::VectorXd p = pi(w);
  return feedforward_ue(plant_, p.tail(plant_.zdim()), p.head(plant_.relative_degree()), w);
}

double Regulator::alpha(const Eigen::VectorXd& x, const Eigen::Vector2d& w) const {
  Eigen::VectorXd p = pi(w);
  double ue = feedforward_ue(plant_, p.tail(plant_.zdim()), p.head(plant_.relative_degree()), w);
  return ue - (K_ * (x - p))(0, 0);
}

namespace {

// angular period of the exosystem orbit through w0 (first return of the
// unwrapped polar angle to +-2pi)
double exosystem_period(const PlantNormalForm& plant, const Eigen::Vector2d& w0,
                        double tol) {
  if (w0.norm() == 0) return 0;
  OdeRhs rhs = [&](double, const Eigen::VectorXd& w, Eigen::VectorXd& dw) {
    Eigen::Vector2d s = plant.s_at(Eigen::Vector2d(w[0], w[1]));
    dw.resize(2);
    dw << s[0], s[1];
  };
  // crude upper bound for one revolution, then bisect on the unwrapped angle
  double t_hi = 2.0 * kTwoPi;
  Trajectory traj = integrate(rhs, 0.0, t_hi, w0, tol);
  auto unwrapped = [&](double t) {
    // track continuous angle along dense output
    const int steps = 720;
    double angle = 0;
    double prev = std::atan2(w0[1], w0[0]);
    for (int i = 1; i <= steps; ++i) {
      Eigen::VectorXd w = traj.eval(t * i / steps);
      double cur = std::atan2(w[1], w[0]);
      double d = cur - prev;
      while (d > kTwoPi / 2) d -= kTwoPi;
      while (d < -kTwoPi / 2) d += kTwoPi;
      angle += d;
      prev = cur;
    }
    return angle;
  };
  double full = unwrapped(t_hi);
  if (std::abs(full) < kTwoPi)
    throw SolverError("exosystem period: orbit does not complete a revolution");
  double lo = 0, hi = t_hi;
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    (std::abs(unwrapped(mid)) >= kTwoPi ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

ClosedLoopResult simulate_closed_loop(const Regulator& reg, const Eigen::VectorXd& x0,
                                      const Eigen::Vector2d& w0, double horizon,
                                      const SimulateOptions& opts) {
  const PlantNormalForm& plant = reg.plant();
  const int r = plant.relative_degree();
  const int m = plant.zdim();
  const int nx = r + m;
  if (x0.size() != nx) throw ValidationError("x0 has wrong dimension");
  if (!(horizon > 0)) throw ValidationError("horizon must be positive");

  double last_t = 0;
  OdeRhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    last_t = t;
    const Eigen::VectorXd x = y.head(nx);
    const Eigen::Vector2d w(y[nx], y[nx + 1]);
    const double u = reg.alpha(x, w);

    dy.resize(nx + 2);
    std::vector<Jet> zj, xj;
    for (int i = 0; i < m; ++i) zj.push_back(Jet::constant(x[r + i], 0, 1));
    for (int i = 0; i < r; ++i) xj.push_back(Jet::constant(x[i], 0, 1));
    for (int i = 0; i + 1 < r; ++i) dy[i] = x[i + 1];
    dy[r - 1] = plant.drift(zj, xj).value() + plant.input_gain(zj, xj).value() * u;
    for (int i = 0; i < m; ++i) dy[r + i] = plant.f0(i, zj, xj).value();
    const Eigen::Vector2d s = plant.s_at(w);
    dy[nx] = s[0];
    dy[nx + 1] = s[1];
  };

  Eigen::VectorXd y0(nx + 2);
  y0.head(nx) = x0;
  y0[nx] = w0[0];
  y0[nx + 1] = w0[1];

  Trajectory traj;
  try {
    traj = integrate(rhs, 0.0, horizon, y0, opts.tol);
  } catch (const DomainError& err) {
    throw DomainError("closed loop left the solved manifold region at t=" +
                      std::to_string(last_t) + ": " + err.what());
  }

  ClosedLoopResult out;
  const int samples = std::max(2, opts.samples);
  out.t.resize(samples);
  out.x.resize(samples, nx);
  out.w.resize(samples, 2);
  out.u.resize(samples);
  out.y.resize(samples);
  out.y_ref.resize(samples);
  out.e.resize(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = horizon * i / (samples - 1);
    Eigen::VectorXd y = traj.eval(t);
    const Eigen::VectorXd x = y.head(nx);
    const Eigen::Vector2d w(y[nx], y[nx + 1]);
    out.t[i] = t;
    out.x.row(i) = x.transpose();
    out.w.row(i) = w.transpose();
    out.u[i] = reg.alpha(x, w);
    out.y[i] = x[0];
    const double p = plant.p_at(w);
    out.y_ref[i] = -p;
    out.e[i] = x[0] + p;
  }

  double sup_tail = 0;
  for (int i = 0; i < samples; ++i)
    if (out.t[i] >= 2.0 * horizon / 3.0) sup_tail = std::max(sup_tail, std::abs(out.e[i]));
  out.sup_error_tail = sup_tail;

  out.settling_time = -1;
  for (int i = 0; i < samples; ++i) {
    if (std::abs(out.e[i]) > opts.band) continue;
    bool stays = true;
    for (int j = i; j < samples; ++j)
      if (std::abs(out.e[j]) > opts.band) {
        stays = false;
        break;
      }
    if (stays) {
      out.settling_time = out.t[i];
      break;
    }
  }

  try {
    out.exo_period = exosystem_period(plant, w0, opts.tol);
  } catch (const Error&) {
    out.exo_period = 0;  // degenerate orbit (w0 = 0)
  }
  if (out.exo_period > 0) {
    const int periods = static_cast<int>(horizon / out.exo_period);
    for (int p = 0; p < periods; ++p) {
      double worst = 0;
      for (int i = 0; i < samples; ++i)
        if (out.t[i] >= p * out.exo_period && out.t[i] < (p + 1) * out.exo_period)
          worst = std::max(worst, std::abs(out.e[i]));
      out.period_max_e.push_back(worst);
    }
  }
  return out;
}

}  // namespace patchcm
