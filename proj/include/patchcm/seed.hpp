#pragma once

#include <Eigen/Core>
#include <vector>

#include "patchcm/systems.hpp"

namespace patchcm {

/// Taylor polynomial approximation of the center manifold z = phi(w) in the
/// normalized frame, stored as homogeneous blocks: blocks[d-1] is n x (d+1)
/// with column j holding the coefficient vector of w1^(d-j) w2^j. There is
/// no degree-0 block; the manifold passes through the origin.
class SeedPolynomial {
 public:
  SeedPolynomial() = default;
  SeedPolynomial(int n, std::vector<Eigen::MatrixXd> blocks);

  int n() const { return n_; }
  int degree() const { return static_cast<int>(blocks_.size()); }
  const Eigen::MatrixXd& block(int d) const { return blocks_[d - 1]; }
  const std::vector<Eigen::MatrixXd>& blocks() const { return blocks_; }

  /// Value at a normalized-frame point.
  Eigen::VectorXd eval(const Eigen::Vector2d& w) const;

  /// Jet-valued evaluation (used to push the polynomial through the PDE).
  std::vector<Jet> eval_jets(const Jet& w1, const Jet& w2) const;

  /// Polar evaluation psi0(theta, r) = phi(r cos, r sin) together with the
  /// radial derivatives d^k psi0 / dr^k for k = 0..kmax (kmax <= degree).
  std::vector<Eigen::VectorXd> eval_polar(double theta, double r, int kmax) const;

 private:
  int n_ = 0;
  std::vector<Eigen::MatrixXd> blocks_;
};

/// Degree-by-degree solution of the center-manifold PDE
///   dphi/dw (S w + (P, Q)) = B phi + Zbar(w, phi)
/// in the normalized frame. Each homogeneous block solves a linear system
/// whose operator is invertible because B is hyperbolic and the rotation
/// spectrum on degree-d monomials is purely imaginary; the right-hand side
/// is extracted mechanically from a 2-variable jet expansion of the PDE
/// residual. Throws SolverError if the final truncated residual exceeds
/// 1e-10 coefficient-wise (scaled).
SeedPolynomial compute_seed(const CartesianCenterSystem& sys, int degree);

}  // namespace patchcm
