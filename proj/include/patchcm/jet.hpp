#pragma once

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

#include "patchcm/errors.hpp"

namespace patchcm {

constexpr int kMaxJetVars = 4;

/// Monomial basis shared by all jets of a given (order, nvars): exponent
/// table in graded order (degree blocks, lexicographic within a block) plus
/// the product-index table used by multiplication, division and sqrt.
/// Instances are interned and immutable; jets hold a plain pointer.
class JetBasis {
 public:
  static const JetBasis& get(int order, int nvars);

  int order() const { return order_; }
  int nvars() const { return nvars_; }
  int size() const { return static_cast<int>(exps_.size()); }

  const std::array<int, kMaxJetVars>& exponents(int idx) const { return exps_[idx]; }
  int degree(int idx) const { return degs_[idx]; }
  /// Index of a monomial, or -1 if its total degree exceeds the order.
  int index_of(std::span<const int> exponents) const;

  /// All ordered pairs (i, j) whose product lands on monomial `target`.
  const std::vector<std::pair<int, int>>& products_onto(int target) const {
    return prod_onto_[target];
  }

 private:
  JetBasis(int order, int nvars);

  int order_, nvars_;
  std::vector<std::array<int, kMaxJetVars>> exps_;
  std::vector<int> degs_;
  std::vector<int> strides_;  // dense exponent -> index lookup
  std::vector<int> lookup_;
  std::vector<std::vector<std::pair<int, int>>> prod_onto_;
};

/// Truncated Taylor expansion of a real quantity in `nvars` perturbation
/// variables, carried through arithmetic to total degree `order`. Immutable
/// value type; all operations are pure and reject mixed shapes.
class Jet {
 public:
  Jet() : basis_(&JetBasis::get(0, 1)), c_(Eigen::VectorXd::Zero(1)) {}
  Jet(int order, int nvars)
      : basis_(&JetBasis::get(order, nvars)),
        c_(Eigen::VectorXd::Zero(JetBasis::get(order, nvars).size())) {}

  static Jet constant(double value, int order, int nvars);
  /// Jet of the affine function value + x_index.
  static Jet variable(int index, double value, int order, int nvars);

  int order() const { return basis_->order(); }
  int nvars() const { return basis_->nvars(); }
  int size() const { return basis_->size(); }
  const JetBasis& basis() const { return *basis_; }

  double value() const { return c_[0]; }
  /// Taylor coefficient of the given monomial; derivative = coeff * multidegree!.
  double coefficient(std::span<const int> multidegree) const;
  double operator[](int idx) const { return c_[idx]; }
  double& raw(int idx) { return c_[idx]; }
  const Eigen::VectorXd& coeffs() const { return c_; }
  Eigen::VectorXd& coeffs() { return c_; }

  bool same_shape(const Jet& other) const { return basis_ == other.basis_; }

  Jet operator-() const;
  Jet& operator+=(const Jet& rhs);
  Jet& operator-=(const Jet& rhs);
  Jet& operator+=(double rhs) { c_[0] += rhs; return *this; }
  Jet& operator-=(double rhs) { c_[0] -= rhs; return *this; }
  Jet& operator*=(double rhs) { c_ *= rhs; return *this; }

  friend Jet operator+(Jet lhs, const Jet& rhs) { return lhs += rhs; }
  friend Jet operator-(Jet lhs, const Jet& rhs) { return lhs -= rhs; }
  friend Jet operator+(Jet lhs, double rhs) { return lhs += rhs; }
  friend Jet operator+(double lhs, Jet rhs) { return rhs += lhs; }
  friend Jet operator-(Jet lhs, double rhs) { return lhs -= rhs; }
  friend Jet operator-(double lhs, const Jet& rhs) { return -rhs + lhs; }
  friend Jet operator*(Jet lhs, double rhs) { return lhs *= rhs; }
  friend Jet operator*(double lhs, Jet rhs) { return rhs *= lhs; }
  friend Jet operator/(Jet lhs, double rhs) { return lhs *= 1.0 / rhs; }
  friend Jet operator*(const Jet& lhs, const Jet& rhs);
  friend Jet operator/(const Jet& lhs, const Jet& rhs);

 private:
  const JetBasis* basis_;
  Eigen::VectorXd c_;

  friend void check_shapes(const Jet& a, const Jet& b);
};

Jet sin(const Jet& x);
Jet cos(const Jet& x);
Jet exp(const Jet& x);
Jet sqrt(const Jet& x);
Jet pow_int(const Jet& x, int n);

enum class JetOp { add, sub, mul, div, neg, pow_int, sin, cos, exp, sqrt };

/// Uniform dispatch over the elementary operations. `ipow` is consulted for
/// pow_int only.
Jet jet_apply(JetOp op, std::span<const Jet> args, int ipow = 0);

/// Same value re-truncated to a lower order.
Jet truncated(const Jet& x, int new_order);

/// Embed into a basis with one appended variable and order `new_order`.
Jet lift_append_var(const Jet& x, int new_order);

/// Antiderivative in the last variable: x_last^e -> x_last^(e+1)/(e+1),
/// monomials overflowing the order are dropped.
Jet integrate_last_var(const Jet& x);

/// Coefficient of x_last^k as a jet in the remaining variables, truncated to
/// `out_order`.
Jet extract_last_var_coeff(const Jet& x, int k, int out_order);

/// Divide a jet whose constant term vanishes by the variable `var`
/// (exponent shift down). The top-degree information is lost, so the result
/// carries order-1; callers wanting full order should evaluate the numerator
/// one order higher.
Jet deflate_by_var(const Jet& x, int var);

}  // namespace patchcm
