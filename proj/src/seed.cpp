#include "patchcm/seed.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace patchcm {

SeedPolynomial::SeedPolynomial(int n, std::vector<Eigen::MatrixXd> blocks)
    : n_(n), blocks_(std::move(blocks)) {
  for (std::size_t d = 1; d <= blocks_.size(); ++d) {
    if (blocks_[d - 1].rows() != n_ || blocks_[d - 1].cols() != static_cast<int>(d + 1))
      throw ValidationError("seed block " + std::to_string(d) + " has wrong shape");
  }
}

Eigen::VectorXd SeedPolynomial::eval(const Eigen::Vector2d& w) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  for (int d = 1; d <= degree(); ++d) {
    const Eigen::MatrixXd& blk = blocks_[d - 1];
    for (int j = 0; j <= d; ++j)
      out += blk.col(j) * (std::pow(w[0], d - j) * std::pow(w[1], j));
  }
  return out;
}

std::vector<Jet> SeedPolynomial::eval_jets(const Jet& w1, const Jet& w2) const {
  std::vector<Jet> out(n_, Jet(w1.order(), w1.nvars()));
  // Horner in w2 within each degree, powers of w1 shared across degrees
  std::vector<Jet> w1_pows{Jet::constant(1.0, w1.order(), w1.nvars())};
  for (int d = 1; d <= degree(); ++d) w1_pows.push_back(w1_pows.back() * w1);
  for (int d = 1; d <= degree(); ++d) {
    const Eigen::MatrixXd& blk = blocks_[d - 1];
    for (int i = 0; i < n_; ++i) {
      Jet acc = Jet::constant(blk(i, d), w1.order(), w1.nvars());
      for (int j = d - 1; j >= 0; --j) {
        acc = acc * w2;
        acc += blk(i, j) * w1_pows[d - j];
      }
      out[i] += acc;
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> SeedPolynomial::eval_polar(double theta, double r,
                                                        int kmax) const {
  if (kmax > degree())
    throw ValidationError("eval_polar: kmax exceeds the seed degree");
  const double c = std::cos(theta), s = std::sin(theta);
  std::vector<Eigen::VectorXd> out(kmax + 1, Eigen::VectorXd::Zero(n_));
  for (int d = 1; d <= degree(); ++d) {
    const Eigen::MatrixXd& blk = blocks_[d - 1];
    Eigen::VectorXd e_d = Eigen::VectorXd::Zero(n_);
    for (int j = 0; j <= d; ++j)
      e_d += blk.col(j) * (std::pow(c, d - j) * std::pow(s, j));
    double fall = 1.0;  // d! / (d-k)!
    for (int k = 0; k <= std::min(kmax, d); ++k) {
      if (k > 0) fall *= (d - k + 1);
      out[k] += e_d * (fall * std::pow(r, d - k));
    }
  }
  return out;
}

SeedPolynomial compute_seed(const CartesianCenterSystem& sys, int degree) {
  if (degree < 1) throw ValidationError("seed degree must be at least 1");
  const int n = sys.n();
  const Eigen::MatrixXd& B = sys.B();

  std::vector<Eigen::MatrixXd> blocks;

  // PDE residual E(phi) = dphi/dw (S w + (P,Q)) - B phi - Zbar(w, phi) on
  // 2-variable jets of the given order, with phi the blocks so far.
  auto residual_jets = [&](int order) {
    const Jet w1 = Jet::variable(0, 0.0, order, 2);
    const Jet w2 = Jet::variable(1, 0.0, order, 2);
    const JetBasis& basis = w1.basis();

    std::vector<Jet> phi(n, Jet(order, 2)), dphi1(n, Jet(order, 2)), dphi2(n, Jet(order, 2));
    for (std::size_t db = 1; db <= blocks.size(); ++db) {
      const Eigen::MatrixXd& blk = blocks[db - 1];
      for (int j = 0; j <= static_cast<int>(db); ++j) {
        const int a = static_cast<int>(db) - j, b = j;
        const int exps[2] = {a, b};
        const int idx = basis.index_of(exps);
        if (idx >= 0)
          for (int i = 0; i < n; ++i) phi[i].raw(idx) += blk(i, j);
        if (a >= 1) {
          const int e1[2] = {a - 1, b};
          const int i1 = basis.index_of(e1);
          if (i1 >= 0)
            for (int i = 0; i < n; ++i) dphi1[i].raw(i1) += a * blk(i, j);
        }
        if (b >= 1) {
          const int e2[2] = {a, b - 1};
          const int i2 = basis.index_of(e2);
          if (i2 >= 0)
            for (int i = 0; i < n; ++i) dphi2[i].raw(i2) += b * blk(i, j);
        }
      }
    }

    const Jet sw1 = -w2 + sys.P(w1, w2);
    const Jet sw2 = w1 + sys.Q(w1, w2);

    std::vector<Jet> E;
    E.reserve(n);
    for (int i = 0; i < n; ++i) {
      Jet e = dphi1[i] * sw1 + dphi2[i] * sw2 - sys.Zbar(i, w1, w2, phi);
      for (int l = 0; l < n; ++l)
        if (B(i, l) != 0.0) e -= B(i, l) * phi[l];
      E.push_back(std::move(e));
    }
    return E;
  };

  for (int d = 1; d <= degree; ++d) {
    std::vector<Jet> E = residual_jets(d);
    const JetBasis& basis = E[0].basis();

    // unknown block Phi (n x (d+1)) solves (T_d kron I - I kron B) vec = -E_d
    Eigen::VectorXd rhs(n * (d + 1));
    for (int j = 0; j <= d; ++j) {
      const int exps[2] = {d - j, j};
      const int idx = basis.index_of(exps);
      for (int i = 0; i < n; ++i) rhs[j * n + i] = -E[i][idx];
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(d + 1, d + 1);
    for (int j = 0; j <= d; ++j) {
      if (j + 1 <= d) T(j + 1, j) = -(d - j);  // -a * w1^(a-1) w2^(b+1)
      if (j - 1 >= 0) T(j - 1, j) = j;         //  b * w1^(a+1) w2^(b-1)
    }
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n * (d + 1), n * (d + 1));
    for (int jp = 0; jp <= d; ++jp)
      for (int j = 0; j <= d; ++j) {
        if (T(jp, j) != 0.0)
          L.block(jp * n, j * n, n, n) +=
              T(jp, j) * Eigen::MatrixXd::Identity(n, n);
        if (jp == j) L.block(jp * n, j * n, n, n) -= B;
      }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
    if (!lu.isInvertible())
      throw SolverError("compute_seed: singular degree-" + std::to_string(d) +
                        " operator (resonance; violated hyperbolicity assumption)");
    Eigen::VectorXd x = lu.solve(rhs);

    Eigen::MatrixXd blk(n, d + 1);
    for (int j = 0; j <= d; ++j) blk.col(j) = x.segment(j * n, n);
    blocks.push_back(std::move(blk));
  }

  // truncated PDE residual must vanish coefficient-wise
  double scale = 1.0 + B.cwiseAbs().maxCoeff();
  for (const auto& blk : blocks) scale = std::max(scale, blk.cwiseAbs().maxCoeff());
  std::vector<Jet> E = residual_jets(degree);
  for (int i = 0; i < n; ++i) {
    const double worst = E[i].coeffs().cwiseAbs().maxCoeff();
    if (worst > 1e-10 * scale)
      throw SolverError("compute_seed: PDE residual " + std::to_string(worst) +
                        " exceeds tolerance");
  }

  return SeedPolynomial(n, std::move(blocks));
}

}  // namespace patchcm
