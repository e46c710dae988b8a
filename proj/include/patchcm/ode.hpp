#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "patchcm/errors.hpp"

namespace patchcm {

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dydt)>;

struct OdeOptions {
  double tol = 1e-10;                 // absolute and relative local error target
  std::optional<double> fixed_step;   // disables adaptivity (order studies)
  double max_step = 0.0;              // 0 = no cap
  long max_steps = 2'000'000;
};

/// Solution of an initial-value problem: accepted mesh points, state samples
/// and a quartic dense-output interpolant per interval. The mesh runs from
/// t0 to t1 in integration direction (which may be decreasing).
class Trajectory {
 public:
  double t_front() const { return mesh_.front(); }
  double t_back() const { return mesh_.back(); }
  const std::vector<double>& mesh() const { return mesh_; }
  const Eigen::VectorXd& sample(std::size_t i) const { return y_[i]; }
  const Eigen::VectorXd& front() const { return y_.front(); }
  const Eigen::VectorXd& back() const { return y_.back(); }
  int dim() const { return y_.empty() ? 0 : static_cast<int>(y_.front().size()); }
  double tol() const { return tol_; }

  /// Dense output; exact at mesh points, clamped to the integration span.
  Eigen::VectorXd eval(double t) const;

 private:
  std::vector<double> mesh_;
  std::vector<Eigen::VectorXd> y_;
  // per-interval interpolation: y(t0+s*h) = y0 + h*(P1 s + P2 s^2 + P3 s^3 + P4 s^4)
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 4>> interp_;
  double tol_ = 0;

  friend Trajectory integrate(const OdeRhs&, double, double, const Eigen::VectorXd&,
                              const OdeOptions&);
};

/// Adaptive Dormand-Prince 5(4) with PI step control and quartic dense
/// output. Integrates in either direction; throws SolverError on step-size
/// underflow or non-finite state.
Trajectory integrate(const OdeRhs& rhs, double t0, double t1, const Eigen::VectorXd& y0,
                     const OdeOptions& opts = {});

inline Trajectory integrate(const OdeRhs& rhs, double t0, double t1,
                            const Eigen::VectorXd& y0, double tol) {
  OdeOptions o;
  o.tol = tol;
  return integrate(rhs, t0, t1, y0, o);
}

}  // namespace patchcm
