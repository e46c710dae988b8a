#pragma once

#include <Eigen/Core>
#include <vector>

#include "patchcm/patchy.hpp"
#include "patchcm/systems.hpp"

namespace patchcm {

/// Stabilizing LQR gain for (A, Bin) with weights Q >= 0, R > 0: solves the
/// continuous algebraic Riccati equation by Newton-Kleinman iteration
/// (Lyapunov solves on the vectorized equations; dimensions here are tiny),
/// bootstrapped by an eigenvalue-shifted Lyapunov gain when A is unstable.
/// Returns K with u = -K x convention: A - Bin K is Hurwitz and the CARE
/// residual is at most 1e-8 ||Q||_F.
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Bin,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);

/// Linearization of the plant at the origin in the simulation state ordering
/// (xi_1..xi_r, z_1..z_m), with the input column from a(0,0).
void plant_linearization(const PlantNormalForm& plant, Eigen::MatrixXd& A,
                         Eigen::MatrixXd& Bin);

/// Tracking controller alpha(x, w) = kappa(w) - K (x - pi(w)) built from a
/// patchy solution: pi(w) = (varphi(w), psi(w)) in state ordering and
/// kappa(w) = u_e(pi(w), w). K follows the u = -K x convention of lqr_gain,
/// so the loop matrix is A - Bin K.
class Regulator {
 public:
  Regulator(const PlantNormalForm& plant, std::shared_ptr<const PatchySolution> solution,
            Eigen::MatrixXd gain);

  const PlantNormalForm& plant() const { return plant_; }
  const Eigen::MatrixXd& gain() const { return K_; }
  const PatchySolution& solution() const { return *solution_; }

  /// pi(w) in state ordering (xi, z); throws DomainError outside the solved
  /// manifold region.
  Eigen::VectorXd pi(const Eigen::Vector2d& w) const;
  double kappa(const Eigen::Vector2d& w) const;
  double alpha(const Eigen::VectorXd& x, const Eigen::Vector2d& w) const;

 private:
  PlantNormalForm plant_;
  std::shared_ptr<const PatchySolution> solution_;
  Eigen::MatrixXd K_;
};

Regulator build_regulator(const PlantNormalForm& plant,
                          std::shared_ptr<const PatchySolution> solution,
                          Eigen::MatrixXd gain);

/// Closed-loop simulation record on a uniform output mesh.
struct ClosedLoopResult {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;   // rows: samples, cols: (xi, z)
  Eigen::MatrixXd w;   // rows: samples, cols: (w1, w2)
  Eigen::VectorXd u;
  Eigen::VectorXd y;      // xi_1
  Eigen::VectorXd y_ref;  // -p(w)
  Eigen::VectorXd e;      // y + p(w)

  double sup_error_tail = 0;   // sup |e| over the final third of the horizon
  double settling_time = -1;   // first time |e| stays within the band, -1 if never
  double exo_period = 0;       // angular period of the exosystem orbit
  std::vector<double> period_max_e;  // running max of |e| per exosystem period
};

struct SimulateOptions {
  double tol = 1e-9;
  int samples = 2001;
  double band = 1e-2;  // settling band on |e|
};

/// Integrates plant + exosystem under u = alpha(x, w); reports a DomainError
/// with the exit time if the exosystem leaves the solved manifold region.
ClosedLoopResult simulate_closed_loop(const Regulator& reg, const Eigen::VectorXd& x0,
                                      const Eigen::Vector2d& w0, double horizon,
                                      const SimulateOptions& opts = {});

}  // namespace patchcm
