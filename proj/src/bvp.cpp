#include "patchcm/bvp.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace patchcm {

PeriodicCurve::PeriodicCurve(std::vector<Trajectory> segments) : segs_(std::move(segments)) {
  breaks_.reserve(segs_.size() + 1);
  for (const auto& s : segs_) breaks_.push_back(s.t_front());
  breaks_.push_back(segs_.back().t_back());
}

int PeriodicCurve::dim() const { return segs_.empty() ? 0 : segs_.front().dim(); }

Eigen::VectorXd PeriodicCurve::eval(double theta) const {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0) t += kTwoPi;
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  std::size_t i = it == breaks_.begin() ? 0 : static_cast<std::size_t>(it - breaks_.begin()) - 1;
  if (i >= segs_.size()) i = segs_.size() - 1;
  return segs_[i].eval(t);
}

double PeriodicCurve::wrap_gap() const {
  return (segs_.back().back() - segs_.front().front()).norm();
}

namespace {

struct SegmentFlow {
  Eigen::VectorXd end;  // state at segment end
  Eigen::MatrixXd M;    // transition matrix of the variational equations
};

// Integrate state + variational matrix over [a, b].
SegmentFlow flow_with_variation(const ThetaRhs& rhs, const ThetaJac& jac, double a, double b,
                                const Eigen::VectorXd& y0, double ode_tol) {
  const int n = static_cast<int>(y0.size());
  Eigen::VectorXd z0(n + n * n);
  z0.head(n) = y0;
  Eigen::Map<Eigen::MatrixXd>(z0.data() + n, n, n) = Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd dy(n);
  OdeRhs aug = [&](double t, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
    dz.resize(n + n * n);
    Eigen::VectorXd yv = z.head(n);
    rhs(t, yv, dy);
    dz.head(n) = dy;
    Eigen::MatrixXd J = jac(t, yv);
    Eigen::Map<const Eigen::MatrixXd> V(z.data() + n, n, n);
    Eigen::Map<Eigen::MatrixXd>(dz.data() + n, n, n) = J * V;
  };
  Trajectory aug_traj = integrate(aug, a, b, z0, ode_tol);

  SegmentFlow out;
  out.end = aug_traj.back().head(n);
  out.M = Eigen::Map<const Eigen::MatrixXd>(aug_traj.back().data() + n, n, n);
  return out;
}

ThetaJac fd_jacobian(const ThetaRhs& rhs) {
  return [rhs](double t, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(y.size());
    Eigen::MatrixXd J(n, n);
    Eigen::VectorXd f0(n), f1(n), yp = y;
    rhs(t, y, f0);
    for (int j = 0; j < n; ++j) {
      double h = 1e-7 * (1.0 + std::abs(y[j]));
      yp[j] = y[j] + h;
      rhs(t, yp, f1);
      yp[j] = y[j];
      J.col(j) = (f1 - f0) / h;
    }
    return J;
  };
}

}  // namespace

PeriodicCurve solve_periodic_nonlinear(const ThetaRhs& rhs, const ThetaJac& jac_in,
                                       const CurveFn& guess,
                                       std::optional<Eigen::VectorXd> pinned,
                                       const BvpOptions& opts) {
  if (pinned) {
    Trajectory traj = integrate([&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& d) { rhs(t, y, d); },
                                0.0, kTwoPi, *pinned, opts.ode_tol);
    double gap = (traj.back() - traj.front()).norm();
    if (gap > opts.periodicity_tol)
      throw DomainError("pinned periodic solve: orbit fails to close (gap " +
                        std::to_string(gap) + "); the radius may have left the neutrally "
                        "stable region, or the tolerance is too tight");
    std::vector<Trajectory> segs;
    segs.push_back(std::move(traj));
    return PeriodicCurve(std::move(segs));
  }

  ThetaJac jac = jac_in ? jac_in : fd_jacobian(rhs);
  const int m = std::max(1, opts.segments);
  const Eigen::VectorXd probe = guess(0.0);
  const int n = static_cast<int>(probe.size());

  std::vector<double> nodes(m + 1);
  for (int i = 0; i <= m; ++i) nodes[i] = kTwoPi * i / m;

  // node unknowns Y = (y_0 ... y_{m-1})
  Eigen::VectorXd Y(m * n);
  for (int i = 0; i < m; ++i) Y.segment(i * n, n) = guess(nodes[i]);

  std::vector<SegmentFlow> flows(m);
  Eigen::VectorXd G(m * n);

  auto evaluate = [&](const Eigen::VectorXd& Ycur) {
    for (int i = 0; i < m; ++i) {
      flows[i] = flow_with_variation(rhs, jac, nodes[i], nodes[i + 1],
                                     Ycur.segment(i * n, n), opts.ode_tol);
      const int nxt = (i + 1) % m;
      G.segment(i * n, n) = flows[i].end - Ycur.segment(nxt * n, n);
    }
    return G.norm();
  };

  double gnorm = evaluate(Y);
  int iter = 0;
  while (gnorm > opts.tol) {
    if (++iter > opts.max_newton)
      throw SolverError("periodic shooting: no convergence after " +
                        std::to_string(opts.max_newton) + " iterations (residual " +
                        std::to_string(gnorm) + ")");
    Eigen::MatrixXd Jbig = Eigen::MatrixXd::Zero(m * n, m * n);
    for (int i = 0; i < m; ++i) {
      Jbig.block(i * n, i * n, n, n) = flows[i].M;
      const int nxt = (i + 1) % m;
      Jbig.block(i * n, nxt * n, n, n) -= Eigen::MatrixXd::Identity(n, n);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jbig);
    if (!lu.isInvertible())
      throw SolverError("periodic shooting: singular shooting system (Floquet multiplier at 1)");
    Eigen::VectorXd step = lu.solve(-G);

    // damped update
    double lambda = 1.0;
    Eigen::VectorXd Ytry;
    double gtry = 0;
    for (int half = 0; half < 8; ++half) {
      Ytry = Y + lambda * step;
      gtry = evaluate(Ytry);
      if (gtry < (1.0 - 0.25 * lambda) * gnorm || gtry <= opts.tol) break;
      lambda *= 0.5;
    }
    if (gtry >= gnorm && gnorm > 10 * opts.tol && iter > 3)
      throw SolverError("periodic shooting: damped Newton stalled (residual " +
                        std::to_string(gnorm) + ")");
    Y = Ytry;
    gnorm = gtry;
  }

  std::vector<Trajectory> segs;
  segs.reserve(m);
  for (int i = 0; i < m; ++i)
    segs.push_back(integrate(
        [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& d) { rhs(t, y, d); },
        nodes[i], nodes[i + 1], Y.segment(i * n, n), opts.ode_tol));
  return PeriodicCurve(std::move(segs));
}

namespace {

struct LinearSegment {
  Eigen::MatrixXd Phi;  // fundamental transition over the segment
  Eigen::VectorXd p;    // particular endpoint from zero initial data
};

LinearSegment linear_segment(const MatrixFn& A, const VectorFn* g, int n, double a, double b,
                             double ode_tol) {
  // columns: [fundamental matrix | particular]
  const int cols = g ? n + 1 : n;
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n * cols);
  Eigen::Map<Eigen::MatrixXd>(z0.data(), n, cols).leftCols(n) =
      Eigen::MatrixXd::Identity(n, n);

  OdeRhs aug = [&](double t, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
    dz.resize(n * cols);
    Eigen::MatrixXd At = A(t);
    Eigen::Map<const Eigen::MatrixXd> Z(z.data(), n, cols);
    Eigen::Map<Eigen::MatrixXd> dZ(dz.data(), n, cols);
    dZ = At * Z;
    if (g) dZ.col(n) += (*g)(t);
  };
  Trajectory traj = integrate(aug, a, b, z0, ode_tol);

  LinearSegment out;
  Eigen::Map<const Eigen::MatrixXd> Zend(traj.back().data(), n, cols);
  out.Phi = Zend.leftCols(n);
  if (g) out.p = Zend.col(n);
  return out;
}

}  // namespace

Eigen::MatrixXd monodromy(const MatrixFn& A, int dim, const BvpOptions& opts) {
  const int m = std::max(1, opts.segments);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(dim, dim);
  for (int i = 0; i < m; ++i) {
    LinearSegment seg =
        linear_segment(A, nullptr, dim, kTwoPi * i / m, kTwoPi * (i + 1) / m, opts.ode_tol);
    M = seg.Phi * M;
  }
  return M;
}

PeriodicCurve solve_periodic_linear(const MatrixFn& A, const VectorFn& g, int dim,
                                    const BvpOptions& opts) {
  const int n = dim;
  const int m = std::max(1, opts.segments);
  std::vector<LinearSegment> segs(m);
  for (int i = 0; i < m; ++i)
    segs[i] = linear_segment(A, &g, n, kTwoPi * i / m, kTwoPi * (i + 1) / m, opts.ode_tol);

  // cyclic system: Phi_i y_i - y_{i+1} = -p_i
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m * n, m * n);
  Eigen::VectorXd rhs(m * n);
  for (int i = 0; i < m; ++i) {
    const int nxt = (i + 1) % m;
    C.block(i * n, i * n, n, n) = segs[i].Phi;
    C.block(i * n, nxt * n, n, n) -= Eigen::MatrixXd::Identity(n, n);
    rhs.segment(i * n, n) = -segs[i].p;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (!lu.isInvertible())
    throw SolverError("periodic linear solve: I - M is singular (Floquet multiplier at 1)");
  Eigen::VectorXd Y = lu.solve(rhs);

  std::vector<Trajectory> trajs;
  trajs.reserve(m);
  for (int i = 0; i < m; ++i) {
    OdeRhs seg_rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      dy = A(t) * y + g(t);
    };
    trajs.push_back(
        integrate(seg_rhs, kTwoPi * i / m, kTwoPi * (i + 1) / m, Y.segment(i * n, n), opts.ode_tol));
  }
  PeriodicCurve curve(std::move(trajs));
  const double res = curve.wrap_gap();
  if (res > 1e-8 * (1.0 + Y.head(n).norm()))
    throw SolverError("periodic linear solve: wrap residual " + std::to_string(res));
  return curve;
}

}  // namespace patchcm
