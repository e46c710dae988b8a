#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "patchcm/expr.hpp"
#include "patchcm/jet.hpp"

namespace patchcm {

/// Jet-valued scalar field; the argument convention is documented per use.
using ScalarField = std::function<Jet(std::span<const Jet> args)>;

/// All eigenvalues of a small dense real matrix (Hessenberg + shifted QR).
std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& M);

/// Minimum |Re lambda| over the spectrum; throws HyperbolicityError if it is
/// not strictly above tol.
double check_hyperbolic(const Eigen::MatrixXd& B, double tol = 1e-6);

/// Center-manifold form
///   dz/dt  = B z + Zbar(w1, w2, z)
///   dw1/dt = -w2 + P(w1, w2)
///   dw2/dt =  w1 + Q(w1, w2)
/// stored in the normalized (counterclockwise) frame. Systems whose
/// exosystem rotates the other way are flipped (w2 -> -w2) at construction
/// and `orientation` records the original sense; conversions to and from
/// user coordinates happen at the evaluation boundary.
class CartesianCenterSystem {
 public:
  /// user_zbar/user_p/user_q evaluate in the *user* frame with args
  /// (w1, w2, z1..zn); rotation is +1 for dw1/dt = -w2 + ..., -1 for the
  /// reversed sense. Validates quadratic-plus P, Q, vanishing Zbar and
  /// dZbar/dz at the origin, and hyperbolic B.
  CartesianCenterSystem(Eigen::MatrixXd B, std::vector<ScalarField> user_zbar,
                        ScalarField user_p, ScalarField user_q, int rotation,
                        double hyperbolicity_tol = 1e-6);

  int n() const { return n_; }
  const Eigen::MatrixXd& B() const { return B_; }
  int orientation() const { return orientation_; }

  /// Normalized-frame evaluators. Zbar args: (w1, w2, z1..zn); P, Q args:
  /// (w1, w2).
  Jet P(const Jet& w1, const Jet& w2) const;
  Jet Q(const Jet& w1, const Jet& w2) const;
  Jet Zbar(int component, const Jet& w1, const Jet& w2, std::span<const Jet> z) const;

  /// Full normalized vector field (w1dot, w2dot, zdot...) on jets.
  std::vector<Jet> vector_field(const Jet& w1, const Jet& w2, std::span<const Jet> z) const;

  /// Map a user-frame point into the normalized frame (and back; the map is
  /// an involution).
  Eigen::Vector2d to_normalized(const Eigen::Vector2d& w_user) const {
    return {w_user[0], orientation_ < 0 ? -w_user[1] : w_user[1]};
  }

 private:
  int n_;
  Eigen::MatrixXd B_;
  int orientation_;
  std::vector<ScalarField> zbar_;  // user frame
  ScalarField p_, q_;              // user frame

  Jet flip_w2(const Jet& w2) const { return orientation_ < 0 ? -w2 : w2; }
};

/// Time-eliminated polar form of a CartesianCenterSystem:
///   dr/dtheta = r R(theta, r)
///   dz/dtheta = F(theta, r, z) = (B z + Zhat) / (1 + Theta_hat)
/// The division by r in R_hat and Theta_hat is removed analytically
/// (quadratic-plus P, Q), so everything is evaluable at r = 0.
class PolarReducedSystem {
 public:
  explicit PolarReducedSystem(std::shared_ptr<const CartesianCenterSystem> base,
                              double theta_rate_floor = 0.1);

  const CartesianCenterSystem& base() const { return *base_; }
  int n() const { return base_->n(); }
  int orientation() const { return base_->orientation(); }
  double theta_rate_floor() const { return floor_; }

  /// rdot/r and thetadot - 1 of the polar *time* system, jet-valued in r.
  Jet Rhat(double theta, const Jet& r) const;
  Jet Theta_hat(double theta, const Jet& r) const;

  /// Radial factor of the reduced equation: dr/dtheta = r * R(theta, r).
  Jet R(double theta, const Jet& r) const;
  double R(double theta, double r) const;

  /// Right-hand side of dz/dtheta; r enters as a jet so sigma-expansions
  /// around a base radius come out of the same code path.
  std::vector<Jet> F(double theta, const Jet& r, std::span<const Jet> z) const;
  Eigen::VectorXd F(double theta, double r, const Eigen::VectorXd& z) const;

  /// dF/dz at a point, via one directional order-1 jet per column.
  Eigen::MatrixXd dFdz(double theta, double r, const Eigen::VectorXd& z) const;

  /// Transport speed g(theta, r) = r R(theta, r) as a jet in r.
  Jet radial_speed(double theta, const Jet& r) const;

 private:
  std::shared_ptr<const CartesianCenterSystem> base_;
  double floor_;

  // numerators of Rhat/Theta_hat divided by r, order-lifted when r sits at 0
  std::pair<Jet, Jet> hat_pair(double theta, const Jet& r) const;
};

/// Builds the time-eliminated polar reduction; precondition (exosystem
/// linear part a rotation) is enforced by CartesianCenterSystem.
PolarReducedSystem polar_reduce(std::shared_ptr<const CartesianCenterSystem> sys,
                                double theta_rate_floor = 0.1);

/// SISO plant in Byrnes-Isidori normal form together with its exosystem:
///   zdot   = f0(z, xi)
///   xi_i'  = xi_{i+1},  xi_r' = b(z, xi) + a(z, xi) u
///   wdot   = s(w),      y = xi_1 + p(w)
/// The simulation state ordering is (xi_1..xi_r, z_1..z_m).
class PlantNormalForm {
 public:
  PlantNormalForm(int relative_degree, int zdim, std::vector<Expr> f0, Expr input_gain,
                  Expr drift, std::array<Expr, 2> s, Expr p,
                  std::map<std::string, double> params);

  int relative_degree() const { return r_; }
  int zdim() const { return m_; }
  int state_dim() const { return r_ + m_; }
  const std::map<std::string, double>& params() const { return params_; }

  /// f0 component on jets; args (z..., xi...).
  Jet f0(int component, std::span<const Jet> z, std::span<const Jet> xi) const;
  Jet input_gain(std::span<const Jet> z, std::span<const Jet> xi) const;
  Jet drift(std::span<const Jet> z, std::span<const Jet> xi) const;
  Jet s(int component, const Jet& w1, const Jet& w2) const;
  Jet p(const Jet& w1, const Jet& w2) const;

  double input_gain_at(const Eigen::VectorXd& z, const Eigen::VectorXd& xi) const;
  double drift_at(const Eigen::VectorXd& z, const Eigen::VectorXd& xi) const;
  Eigen::Vector2d s_at(const Eigen::Vector2d& w) const;
  double p_at(const Eigen::Vector2d& w) const;

  /// Lie derivatives L_s^k p at jet-valued w for k = 0..kmax, via the Taylor
  /// expansion of p along the exosystem flow.
  std::vector<Jet> lie_derivatives_p(const Jet& w1, const Jet& w2, int kmax) const;

  /// (phi_1..phi_r)(w) with phi_i = -L_s^{i-1} p.
  Eigen::VectorXd varphi(const Eigen::Vector2d& w) const;
  std::vector<Jet> varphi_jets(const Jet& w1, const Jet& w2) const;

  /// Exosystem rotation sense of the linear part (+1 normalized, -1
  /// reversed); validated at construction.
  int exosystem_rotation() const { return rotation_; }

  /// Center-manifold system of the zero dynamics driven through phi(w)
  /// (the reduced equation dz/dt = f0(z, phi(w)), wdot = s(w)).
  std::shared_ptr<const CartesianCenterSystem> zero_exosystem(
      double hyperbolicity_tol = 1e-6) const;

 private:
  int r_, m_;
  std::vector<Expr> f0_;
  Expr a_, b_;
  std::array<Expr, 2> s_;
  Expr p_expr_;
  std::map<std::string, double> params_;
  int rotation_;
};

/// Evaluator object for iterated Lie derivatives L_s^k p along an exosystem
/// given by expressions in (w1, w2).
class LieDerivativeChain {
 public:
  LieDerivativeChain(std::array<Expr, 2> s, Expr p, std::map<std::string, double> params,
                     int k);
  double operator()(const Eigen::Vector2d& w) const;
  Jet eval(const Jet& w1, const Jet& w2) const;

 private:
  std::array<Expr, 2> s_;
  Expr p_;
  std::map<std::string, double> params_;
  int k_;
};

/// L_s^k p for k = 0..kmax at jet arguments; the workhorse behind
/// LieDerivativeChain, varphi and the feedforward.
std::vector<Jet> lie_derivatives(const std::array<Expr, 2>& s, const Expr& p,
                                 const std::map<std::string, double>& params, const Jet& w1,
                                 const Jet& w2, int kmax);

/// Feedforward u_e = -(b(z, xi) + L_s^r p(w)) / a(z, xi).
double feedforward_ue(const PlantNormalForm& plant, const Eigen::VectorXd& z,
                      const Eigen::VectorXd& xi, const Eigen::Vector2d& w);

}  // namespace patchcm
