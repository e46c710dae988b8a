#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>

#include "patchcm/ode.hpp"

namespace patchcm {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

using ThetaRhs = std::function<void(double theta, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;
using ThetaJac = std::function<Eigen::MatrixXd(double theta, const Eigen::VectorXd& y)>;
using MatrixFn = std::function<Eigen::MatrixXd(double theta)>;
using VectorFn = std::function<Eigen::VectorXd(double theta)>;
using CurveFn = std::function<Eigen::VectorXd(double theta)>;

struct BvpOptions {
  double tol = 1e-9;              // Newton residual target (shooting mismatch)
  double periodicity_tol = 1e-7;  // pinned-case wrap tolerance
  int max_newton = 25;
  int segments = 16;              // shooting segments over [0, 2pi]
  double ode_tol = 1e-11;
};

/// A 2pi-periodic curve assembled from per-segment trajectories; evaluation
/// wraps the angle.
class PeriodicCurve {
 public:
  PeriodicCurve() = default;
  explicit PeriodicCurve(std::vector<Trajectory> segments);

  Eigen::VectorXd eval(double theta) const;
  Eigen::VectorXd operator()(double theta) const { return eval(theta); }
  int dim() const;
  double wrap_gap() const;  // |y(2pi) - y(0)|
  const std::vector<Trajectory>& segments() const { return segs_; }

 private:
  std::vector<Trajectory> segs_;
  std::vector<double> breaks_;
};

/// Periodic solution of dy/dtheta = rhs(theta, y) on [0, 2pi].
///
/// Pinned case: integrates the initial-value problem from `pinned` and
/// verifies |y(2pi) - y(0)| <= periodicity_tol (the closed orbits of a
/// neutrally stable exosystem make the solution periodic by itself).
///
/// Unpinned case: damped Newton on the multi-segment shooting system with
/// Jacobian blocks from the variational equations; requires the period map
/// to have no unit multiplier near the solution. `jac` may be empty, in
/// which case a forward-difference Jacobian is used.
PeriodicCurve solve_periodic_nonlinear(const ThetaRhs& rhs, const ThetaJac& jac,
                                       const CurveFn& guess,
                                       std::optional<Eigen::VectorXd> pinned,
                                       const BvpOptions& opts = {});

/// Periodic solution of the linear system dy/dtheta = A(theta) y + g(theta).
/// Segment transition matrices and particular solutions are combined into
/// one cyclic linear system for the node values, which stays well
/// conditioned even when the monodromy is enormous; fails if a Floquet
/// multiplier sits at 1.
PeriodicCurve solve_periodic_linear(const MatrixFn& A, const VectorFn& g, int dim,
                                    const BvpOptions& opts = {});

/// Monodromy matrix of dy/dtheta = A(theta) y over one period.
Eigen::MatrixXd monodromy(const MatrixFn& A, int dim, const BvpOptions& opts = {});

}  // namespace patchcm
