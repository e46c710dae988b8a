#pragma once

#include <Eigen/Core>

#include "patchcm/errors.hpp"

namespace patchcm {

/// Periodic cubic spline interpolation of vector-valued samples on the
/// uniform mesh theta_i = 2*pi*i/M, i = 0..M-1. Construction solves the
/// cyclic tridiagonal moment system once; evaluation is O(1) and C^2 across
/// the wrap. Deterministic for identical samples.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;
  /// values: M x n (row i = sample at theta_i)
  explicit PeriodicSpline(Eigen::MatrixXd values);

  int nodes() const { return static_cast<int>(values_.rows()); }
  int dim() const { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXd& samples() const { return values_; }

  Eigen::VectorXd eval(double theta) const;
  double eval_scalar(double theta) const;  // dim() == 1 convenience

 private:
  Eigen::MatrixXd values_;   // M x n
  Eigen::MatrixXd moments_;  // M x n second derivatives at the nodes
  double h_ = 0;
};

}  // namespace patchcm
