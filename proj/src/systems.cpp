#include "patchcm/systems.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace patchcm {

std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw ValidationError("eigenvalues: matrix is not square");
  if (M.rows() > 32) throw ValidationError("eigenvalues: dimension exceeds 32");
  if (!M.allFinite()) throw ValidationError("eigenvalues: non-finite entries");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(M, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw SolverError("eigenvalues: QR iteration failed to converge");
  std::vector<std::complex<double>> out(M.rows());
  for (int i = 0; i < M.rows(); ++i) out[i] = solver.eigenvalues()[i];
  return out;
}

double check_hyperbolic(const Eigen::MatrixXd& B, double tol) {
  double min_re = std::numeric_limits<double>::infinity();
  std::complex<double> worst;
  for (const auto& lambda : eigenvalues(B)) {
    if (std::abs(lambda.real()) < min_re) {
      min_re = std::abs(lambda.real());
      worst = lambda;
    }
  }
  if (!(min_re > tol))
    throw HyperbolicityError(worst, "hyperbolicity violation: eigenvalue " +
                                        std::to_string(worst.real()) + (worst.imag() >= 0 ? "+" : "-") +
                                        std::to_string(std::abs(worst.imag())) +
                                        "i has |Re| <= " + std::to_string(tol));
  return min_re;
}

namespace {

Jet field2(const ScalarField& f, const Jet& w1, const Jet& w2) {
  const Jet args[2] = {w1, w2};
  return f(std::span<const Jet>(args, 2));
}

}  // namespace

CartesianCenterSystem::CartesianCenterSystem(Eigen::MatrixXd B,
                                             std::vector<ScalarField> user_zbar,
                                             ScalarField user_p, ScalarField user_q,
                                             int rotation, double hyperbolicity_tol)
    : n_(static_cast<int>(user_zbar.size())),
      B_(std::move(B)),
      orientation_(rotation),
      zbar_(std::move(user_zbar)),
      p_(std::move(user_p)),
      q_(std::move(user_q)) {
  if (rotation != 1 && rotation != -1)
    throw ValidationError("exosystem rotation must be +1 or -1");
  if (B_.rows() != n_ || B_.cols() != n_)
    throw ValidationError("B dimensions do not match the z dimension");
  check_hyperbolic(B_, hyperbolicity_tol);

  // P, Q must vanish with vanishing first derivatives (quadratic-plus)
  const Jet w1 = Jet::variable(0, 0.0, 1, 2), w2 = Jet::variable(1, 0.0, 1, 2);
  for (const ScalarField* f : {&p_, &q_}) {
    Jet v = field2(*f, w1, w2);
    if (v.coeffs().cwiseAbs().maxCoeff() > 1e-9)
      throw ValidationError(
          "exosystem nonlinearity P/Q must vanish to second order at the origin");
  }

  // Zbar(0) = 0 and dZbar/dz(0) = 0: the z-linear part belongs to B
  for (int i = 0; i < n_; ++i) {
    for (int l = 0; l < n_; ++l) {
      std::vector<Jet> args(2 + n_, Jet::constant(0.0, 1, 1));
      args[2 + l] = Jet::variable(0, 0.0, 1, 1);
      Jet v = zbar_[i](args);
      if (std::abs(v.value()) > 1e-9)
        throw ValidationError("Zbar must vanish at the origin");
      if (std::abs(v[1]) > 1e-9)
        throw ValidationError(
            "Zbar must have no linear z-terms at the origin (fold them into B)");
    }
  }
}

Jet CartesianCenterSystem::P(const Jet& w1, const Jet& w2) const {
  return field2(p_, w1, flip_w2(w2));
}

Jet CartesianCenterSystem::Q(const Jet& w1, const Jet& w2) const {
  Jet q = field2(q_, w1, flip_w2(w2));
  return orientation_ < 0 ? -q : q;
}

Jet CartesianCenterSystem::Zbar(int component, const Jet& w1, const Jet& w2,
                                std::span<const Jet> z) const {
  std::vector<Jet> args;
  args.reserve(2 + n_);
  args.push_back(w1);
  args.push_back(flip_w2(w2));
  for (const Jet& zi : z) args.push_back(zi);
  return zbar_[component](args);
}

std::vector<Jet> CartesianCenterSystem::vector_field(const Jet& w1, const Jet& w2,
                                                     std::span<const Jet> z) const {
  std::vector<Jet> out;
  out.reserve(2 + n_);
  out.push_back(-w2 + P(w1, w2));
  out.push_back(w1 + Q(w1, w2));
  for (int i = 0; i < n_; ++i) {
    Jet zi = Zbar(i, w1, w2, z);
    for (int l = 0; l < n_; ++l)
      if (B_(i, l) != 0.0) zi += B_(i, l) * z[l];
    out.push_back(std::move(zi));
  }
  return out;
}

PolarReducedSystem::PolarReducedSystem(std::shared_ptr<const CartesianCenterSystem> base,
                                       double theta_rate_floor)
    : base_(std::move(base)), floor_(theta_rate_floor) {}

PolarReducedSystem polar_reduce(std::shared_ptr<const CartesianCenterSystem> sys,
                                double theta_rate_floor) {
  return PolarReducedSystem(std::move(sys), theta_rate_floor);
}

std::pair<Jet, Jet> PolarReducedSystem::hat_pair(double theta, const Jet& r) const {
  const double ct = std::cos(theta), st = std::sin(theta);
  if (r.value() != 0.0) {
    Jet w1 = r * ct, w2 = r * st;
    Jet pj = base_->P(w1, w2), qj = base_->Q(w1, w2);
    return {(ct * pj + st * qj) / r, (ct * qj - st * pj) / r};
  }
  // base radius 0: take the Taylor of num/r in an auxiliary radial variable
  // (one order higher, then deflated) and re-compose it with the given jet;
  // exact because the nilpotent part of r kills all missing orders.
  const int q = r.order();
  Jet rho = Jet::variable(0, 0.0, q + 1, 1);
  Jet w1 = rho * ct, w2 = rho * st;
  Jet pj = base_->P(w1, w2), qj = base_->Q(w1, w2);
  Jet hr = deflate_by_var(ct * pj + st * qj, 0);
  Jet ht = deflate_by_var(ct * qj - st * pj, 0);
  auto horner = [&](const Jet& coeffs) {
    Jet acc = Jet::constant(coeffs[q], r.order(), r.nvars());
    for (int k = q - 1; k >= 0; --k) {
      acc = acc * r;
      acc += coeffs[k];
    }
    return acc;
  };
  return {horner(hr), horner(ht)};
}

Jet PolarReducedSystem::Rhat(double theta, const Jet& r) const {
  return hat_pair(theta, r).first;
}

Jet PolarReducedSystem::Theta_hat(double theta, const Jet& r) const {
  return hat_pair(theta, r).second;
}

Jet PolarReducedSystem::R(double theta, const Jet& r) const {
  auto [rh, th] = hat_pair(theta, r);
  const double rate = 1.0 + th.value();
  if (std::abs(rate) < floor_)
    throw DomainError("theta rate |1 + Theta_hat| = " + std::to_string(std::abs(rate)) +
                      " under the floor " + std::to_string(floor_) + " at theta=" +
                      std::to_string(theta) + ", r=" + std::to_string(r.value()));
  return rh / (1.0 + th);
}

double PolarReducedSystem::R(double theta, double r) const {
  return R(theta, Jet::constant(r, 0, 1)).value();
}

Jet PolarReducedSystem::radial_speed(double theta, const Jet& r) const {
  return r * R(theta, r);
}

std::vector<Jet> PolarReducedSystem::F(double theta, const Jet& r,
                                       std::span<const Jet> z) const {
  const double ct = std::cos(theta), st = std::sin(theta);
  Jet th = hat_pair(theta, r).second;
  const double rate = 1.0 + th.value();
  if (std::abs(rate) < floor_)
    throw DomainError("theta rate |1 + Theta_hat| = " + std::to_string(std::abs(rate)) +
                      " under the floor " + std::to_string(floor_) + " at theta=" +
                      std::to_string(theta) + ", r=" + std::to_string(r.value()));
  Jet w1 = r * ct, w2 = r * st;
  Jet denom = 1.0 + th;
  const Eigen::MatrixXd& B = base_->B();
  std::vector<Jet> out;
  out.reserve(base_->n());
  for (int i = 0; i < base_->n(); ++i) {
    Jet num = base_->Zbar(i, w1, w2, z);
    for (int l = 0; l < base_->n(); ++l)
      if (B(i, l) != 0.0) num += B(i, l) * z[l];
    out.push_back(num / denom);
  }
  return out;
}

Eigen::VectorXd PolarReducedSystem::F(double theta, double r, const Eigen::VectorXd& z) const {
  std::vector<Jet> zj;
  zj.reserve(z.size());
  for (int i = 0; i < z.size(); ++i) zj.push_back(Jet::constant(z[i], 0, 1));
  std::vector<Jet> f = F(theta, Jet::constant(r, 0, 1), zj);
  Eigen::VectorXd out(z.size());
  for (int i = 0; i < z.size(); ++i) out[i] = f[i].value();
  return out;
}

Eigen::MatrixXd PolarReducedSystem::dFdz(double theta, double r, const Eigen::VectorXd& z) const {
  const int n = static_cast<int>(z.size());
  Eigen::MatrixXd J(n, n);
  for (int col = 0; col < n; ++col) {
    std::vector<Jet> zj;
    zj.reserve(n);
    for (int i = 0; i < n; ++i)
      zj.push_back(i == col ? Jet::variable(0, z[i], 1, 1) : Jet::constant(z[i], 1, 1));
    std::vector<Jet> f = F(theta, Jet::constant(r, 1, 1), zj);
    for (int i = 0; i < n; ++i) J(i, col) = f[i][1];
  }
  return J;
}

std::vector<Jet> lie_derivatives(const std::array<Expr, 2>& s, const Expr& p,
                                 const std::map<std::string, double>& params, const Jet& w1,
                                 const Jet& w2, int kmax) {
  if (!w1.same_shape(w2)) throw ValidationError("lie_derivatives: jet shape mismatch");
  const int q = w1.order();
  const int lifted_order = q + kmax;
  Jet W1 = lift_append_var(w1, lifted_order);
  Jet W2 = lift_append_var(w2, lifted_order);

  EvalContext ctx = EvalContext::for_shape(lifted_order, w1.nvars() + 1, &params);
  Jet cur1 = W1, cur2 = W2;
  for (int iter = 0; iter < kmax; ++iter) {  // Picard: each pass fixes one more t-order
    ctx.bind("w1", cur1);
    ctx.bind("w2", cur2);
    Jet f1 = eval_jet(s[0], ctx);
    Jet f2 = eval_jet(s[1], ctx);
    cur1 = W1 + integrate_last_var(f1);
    cur2 = W2 + integrate_last_var(f2);
  }
  ctx.bind("w1", cur1);
  ctx.bind("w2", cur2);
  Jet along_flow = eval_jet(p, ctx);

  std::vector<Jet> out;
  out.reserve(kmax + 1);
  double factorial = 1.0;
  for (int k = 0; k <= kmax; ++k) {
    if (k > 0) factorial *= k;
    out.push_back(factorial * extract_last_var_coeff(along_flow, k, q));
  }
  return out;
}

LieDerivativeChain::LieDerivativeChain(std::array<Expr, 2> s, Expr p,
                                       std::map<std::string, double> params, int k)
    : s_(std::move(s)), p_(std::move(p)), params_(std::move(params)), k_(k) {
  if (k < 0) throw ValidationError("Lie derivative order must be nonnegative");
}

double LieDerivativeChain::operator()(const Eigen::Vector2d& w) const {
  return eval(Jet::constant(w[0], 0, 1), Jet::constant(w[1], 0, 1)).value();
}

Jet LieDerivativeChain::eval(const Jet& w1, const Jet& w2) const {
  return lie_derivatives(s_, p_, params_, w1, w2, k_).back();
}

namespace {

std::vector<Jet> plant_args(std::span<const Jet> z, std::span<const Jet> xi) {
  std::vector<Jet> out;
  out.reserve(z.size() + xi.size());
  out.insert(out.end(), z.begin(), z.end());
  out.insert(out.end(), xi.begin(), xi.end());
  return out;
}

EvalContext plant_ctx(std::span<const Jet> z, std::span<const Jet> xi,
                      const std::map<std::string, double>& params) {
  const Jet& probe = z.empty() ? xi[0] : z[0];
  EvalContext ctx = EvalContext::for_shape(probe.order(), probe.nvars(), &params);
  for (std::size_t i = 0; i < z.size(); ++i) ctx.bind("z" + std::to_string(i + 1), z[i]);
  for (std::size_t i = 0; i < xi.size(); ++i) ctx.bind("xi" + std::to_string(i + 1), xi[i]);
  return ctx;
}

std::vector<Jet> const_jets(const Eigen::VectorXd& v) {
  std::vector<Jet> out;
  out.reserve(v.size());
  for (int i = 0; i < v.size(); ++i) out.push_back(Jet::constant(v[i], 0, 1));
  return out;
}

}  // namespace

PlantNormalForm::PlantNormalForm(int relative_degree, int zdim, std::vector<Expr> f0,
                                 Expr input_gain, Expr drift, std::array<Expr, 2> s, Expr p,
                                 std::map<std::string, double> params)
    : r_(relative_degree),
      m_(zdim),
      f0_(std::move(f0)),
      a_(std::move(input_gain)),
      b_(std::move(drift)),
      s_(std::move(s)),
      p_expr_(std::move(p)),
      params_(std::move(params)) {
  if (r_ < 1) throw ValidationError("relative degree must be positive");
  if (static_cast<int>(f0_.size()) != m_)
    throw ValidationError("f0 component count does not match the z dimension");

  // a(0,0) != 0: the relative degree is well defined at the origin
  if (std::abs(input_gain_at(Eigen::VectorXd::Zero(m_), Eigen::VectorXd::Zero(r_))) < 1e-12)
    throw ValidationError("input coefficient a(0,0) vanishes");

  // s(0) = 0, p(0) = 0
  std::map<std::string, double> origin{{"w1", 0.0}, {"w2", 0.0}};
  for (const auto& e : {s_[0], s_[1], p_expr_})
    if (std::abs(patchcm::eval_scalar(e, origin, &params_)) > 1e-12)
      throw ValidationError("exosystem/offset maps must vanish at w = 0");

  // exosystem linear part must be a unit rotation (up to sign)
  Jet w1 = Jet::variable(0, 0.0, 1, 2), w2 = Jet::variable(1, 0.0, 1, 2);
  EvalContext ctx = EvalContext::for_shape(1, 2, &params_);
  ctx.bind("w1", w1);
  ctx.bind("w2", w2);
  Eigen::Matrix2d S;
  S << eval_jet(s_[0], ctx)[1], eval_jet(s_[0], ctx)[2], eval_jet(s_[1], ctx)[1],
      eval_jet(s_[1], ctx)[2];
  Eigen::Matrix2d ccw;
  ccw << 0, -1, 1, 0;
  if ((S - ccw).cwiseAbs().maxCoeff() < 1e-9)
    rotation_ = 1;
  else if ((S + ccw).cwiseAbs().maxCoeff() < 1e-9)
    rotation_ = -1;
  else
    throw ValidationError(
        "exosystem linear part must be [[0,-1],[1,0]] or [[0,1],[-1,0]]; rescale time to "
        "normalize general purely-imaginary pairs");
}

Jet PlantNormalForm::f0(int component, std::span<const Jet> z, std::span<const Jet> xi) const {
  return eval_jet(f0_[component], plant_ctx(z, xi, params_));
}

Jet PlantNormalForm::input_gain(std::span<const Jet> z, std::span<const Jet> xi) const {
  return eval_jet(a_, plant_ctx(z, xi, params_));
}

Jet PlantNormalForm::drift(std::span<const Jet> z, std::span<const Jet> xi) const {
  return eval_jet(b_, plant_ctx(z, xi, params_));
}

Jet PlantNormalForm::s(int component, const Jet& w1, const Jet& w2) const {
  EvalContext ctx = EvalContext::for_shape(w1.order(), w1.nvars(), &params_);
  ctx.bind("w1", w1);
  ctx.bind("w2", w2);
  return eval_jet(s_[component], ctx);
}

Jet PlantNormalForm::p(const Jet& w1, const Jet& w2) const {
  EvalContext ctx = EvalContext::for_shape(w1.order(), w1.nvars(), &params_);
  ctx.bind("w1", w1);
  ctx.bind("w2", w2);
  return eval_jet(p_expr_, ctx);
}

double PlantNormalForm::input_gain_at(const Eigen::VectorXd& z, const Eigen::VectorXd& xi) const {
  auto zj = const_jets(z), xj = const_jets(xi);
  return input_gain(zj, xj).value();
}

double PlantNormalForm::drift_at(const Eigen::VectorXd& z, const Eigen::VectorXd& xi) const {
  auto zj = const_jets(z), xj = const_jets(xi);
  return drift(zj, xj).value();
}

Eigen::Vector2d PlantNormalForm::s_at(const Eigen::Vector2d& w) const {
  Jet w1 = Jet::constant(w[0], 0, 1), w2 = Jet::constant(w[1], 0, 1);
  return {s(0, w1, w2).value(), s(1, w1, w2).value()};
}

double PlantNormalForm::p_at(const Eigen::Vector2d& w) const {
  return p(Jet::constant(w[0], 0, 1), Jet::constant(w[1], 0, 1)).value();
}

std::vector<Jet> PlantNormalForm::lie_derivatives_p(const Jet& w1, const Jet& w2,
                                                    int kmax) const {
  return lie_derivatives(s_, p_expr_, params_, w1, w2, kmax);
}

Eigen::VectorXd PlantNormalForm::varphi(const Eigen::Vector2d& w) const {
  auto jets = varphi_jets(Jet::constant(w[0], 0, 1), Jet::constant(w[1], 0, 1));
  Eigen::VectorXd out(r_);
  for (int i = 0; i < r_; ++i) out[i] = jets[i].value();
  return out;
}

std::vector<Jet> PlantNormalForm::varphi_jets(const Jet& w1, const Jet& w2) const {
  std::vector<Jet> lie = lie_derivatives_p(w1, w2, r_ - 1);
  std::vector<Jet> out;
  out.reserve(r_);
  for (int i = 0; i < r_; ++i) out.push_back(-lie[i]);
  return out;
}

std::shared_ptr<const CartesianCenterSystem> PlantNormalForm::zero_exosystem(
    double hyperbolicity_tol) const {
  // B = df0/dz(0, 0)
  Eigen::MatrixXd B(m_, m_);
  for (int col = 0; col < m_; ++col) {
    std::vector<Jet> zj, xj;
    for (int i = 0; i < m_; ++i)
      zj.push_back(i == col ? Jet::variable(0, 0.0, 1, 1) : Jet::constant(0.0, 1, 1));
    for (int i = 0; i < r_; ++i) xj.push_back(Jet::constant(0.0, 1, 1));
    for (int i = 0; i < m_; ++i) B(i, col) = f0(i, zj, xj)[1];
  }

  // dz/dt = f0(z, varphi(w)) = B z + Zbar(w, z)
  auto self = *this;  // value copy keeps the closures self-contained
  std::vector<ScalarField> zbar;
  Eigen::MatrixXd Bcopy = B;
  for (int i = 0; i < m_; ++i) {
    zbar.push_back([self, Bcopy, i](std::span<const Jet> args) {
      std::vector<Jet> xi = self.varphi_jets(args[0], args[1]);
      std::span<const Jet> z = args.subspan(2);
      Jet v = self.f0(i, z, xi);
      for (int l = 0; l < self.zdim(); ++l)
        if (Bcopy(i, l) != 0.0) v -= Bcopy(i, l) * z[l];
      return v;
    });
  }
  ScalarField P = [self](std::span<const Jet> args) {
    Jet s1 = self.s(0, args[0], args[1]);
    return self.exosystem_rotation() > 0 ? s1 + args[1] : s1 - args[1];
  };
  ScalarField Q = [self](std::span<const Jet> args) {
    Jet s2 = self.s(1, args[0], args[1]);
    return self.exosystem_rotation() > 0 ? s2 - args[0] : s2 + args[0];
  };
  return std::make_shared<CartesianCenterSystem>(B, std::move(zbar), std::move(P),
                                                 std::move(Q), rotation_, hyperbolicity_tol);
}

double feedforward_ue(const PlantNormalForm& plant, const Eigen::VectorXd& z,
                      const Eigen::VectorXd& xi, const Eigen::Vector2d& w) {
  const double a = plant.input_gain_at(z, xi);
  if (std::abs(a) < 1e-12)
    throw DomainError("feedforward: input coefficient a(z, xi) vanishes at the evaluation point");
  const double b = plant.drift_at(z, xi);
  Jet w1 = Jet::constant(w[0], 0, 1), w2 = Jet::constant(w[1], 0, 1);
  const double lrp = plant.lie_derivatives_p(w1, w2, plant.relative_degree()).back().value();
  return -(b + lrp) / a;
}

}  // namespace patchcm
