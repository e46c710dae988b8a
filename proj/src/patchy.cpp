#include "patchcm/patchy.hpp"

#include <algorithm>
#include <cmath>

namespace patchcm {

namespace {

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  return t < 0 ? t + kTwoPi : t;
}

PeriodicSpline sample_to_spline(const PeriodicCurve& curve, int mesh) {
  Eigen::MatrixXd samples(mesh, curve.dim());
  for (int i = 0; i < mesh; ++i)
    samples.row(i) = curve.eval(kTwoPi * i / mesh).transpose();
  return PeriodicSpline(std::move(samples));
}

}  // namespace

PatchySolution::PatchySolution(SeedPolynomial seed, std::vector<RadialCurve> curves,
                               std::vector<AnnulusPatch> patches, int order, int theta_mesh,
                               int orientation, std::vector<double> schedule, BvpOptions bvp)
    : seed_(std::move(seed)),
      curves_(std::move(curves)),
      patches_(std::move(patches)),
      order_(order),
      theta_mesh_(theta_mesh),
      orientation_(orientation),
      schedule_(std::move(schedule)),
      bvp_(bvp) {
  if (patches_.size() + (curves_.empty() ? 0 : 1) != curves_.size() && !curves_.empty())
    throw ValidationError("patch count must be one less than the curve count");
}

double PatchySolution::outer_radius(double theta) const {
  if (curves_.empty()) return std::numeric_limits<double>::infinity();
  double outer = curves_.back().eval(theta);
  if (!patches_.empty()) {
    const std::size_t k = curves_.size() - 1;
    outer += schedule_[k] - schedule_[k - 1];  // outermost patch extends by its increment
  }
  return outer;
}

int PatchySolution::region_of(double theta, double r) const {
  if (r < 0) throw DomainError("negative radius");
  if (curves_.empty()) return -1;  // seed-only solution covers everything
  const double t = wrap_angle(theta);
  if (r < curves_.front().eval(t)) return -1;
  if (r > outer_radius(t))
    throw DomainError("radius " + std::to_string(r) +
                      " beyond the outermost annulus at theta=" + std::to_string(t));
  // nested curves: find the last curve with r_j(theta) <= r
  int lo = 0, hi = static_cast<int>(curves_.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi + 1) / 2;
    if (curves_[mid].eval(t) <= r)
      lo = mid;
    else
      hi = mid - 1;
  }
  return std::min(lo, static_cast<int>(patches_.size()) - 1);
}

Eigen::VectorXd PatchySolution::evaluate(double theta, double r) const {
  const double t = wrap_angle(theta);
  const int region = region_of(t, r);
  if (region < 0) return seed_.eval_polar(t, r, 0)[0];
  const AnnulusPatch& patch = patches_[region];
  const double sigma = r - curves_[region].eval(t);
  Eigen::VectorXd acc = patch.coeff(patch.order(), t);
  for (int i = patch.order() - 1; i >= 0; --i) acc = acc * sigma + patch.coeff(i, t);
  return acc;
}

Eigen::VectorXd PatchySolution::evaluate_cartesian(double w1, double w2) const {
  const double v2 = orientation_ < 0 ? -w2 : w2;
  return evaluate(wrap_angle(std::atan2(v2, w1)), std::hypot(w1, v2));
}

PeriodicCurve compute_radial_curve(const PolarReducedSystem& sys, double r_init,
                                   const BvpOptions& opts) {
  if (!(r_init > 0)) throw ValidationError("radial curve launch radius must be positive");
  ThetaRhs rhs = [&sys](double theta, const Eigen::VectorXd& r, Eigen::VectorXd& dr) {
    dr.resize(1);
    dr[0] = r[0] * sys.R(theta, r[0]);
  };
  Eigen::VectorXd pin(1);
  pin << r_init;
  return solve_periodic_nonlinear(rhs, nullptr, nullptr, pin, opts);
}

std::vector<PeriodicCurve> compute_patch(const PolarReducedSystem& sys,
                                         const PeriodicCurve& inner, int order,
                                         const CurveFn& guess, const BvpOptions& opts) {
  const int n = sys.n();

  ThetaRhs rhs = [&](double theta, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
    dz = sys.F(theta, inner.eval(theta)[0], z);
  };
  ThetaJac jac = [&](double theta, const Eigen::VectorXd& z) {
    return sys.dFdz(theta, inner.eval(theta)[0], z);
  };

  std::vector<PeriodicCurve> coeffs;
  coeffs.reserve(order + 1);  // lambdas below hold references into the vector
  coeffs.push_back(solve_periodic_nonlinear(rhs, jac, guess, std::nullopt, opts));
  const PeriodicCurve& c0 = coeffs.front();

  // c0 must actually solve the z-equation along the inner curve
  {
    const double h = 1e-4;
    const int mesh = 128;
    for (int i = 0; i < mesh; ++i) {
      const double theta = kTwoPi * (i + 0.5) / mesh;
      Eigen::VectorXd d = (c0.eval(theta + h) - c0.eval(theta - h)) / (2 * h);
      Eigen::VectorXd f(n);
      rhs(theta, c0.eval(theta), f);
      if ((d - f).norm() > 1e-6)
        throw SolverError("patch base curve residual " + std::to_string((d - f).norm()) +
                          " at theta=" + std::to_string(theta));
    }
  }

  for (int i = 1; i <= order; ++i) {
    // sigma-jets around the inner curve; the unknown c_i enters only through
    // A(theta) and the transport shift -i g'(theta)
    MatrixFn Ai = [&sys, &inner, &c0, i](double theta) {
      const double rb = inner.eval(theta)[0];
      Eigen::MatrixXd A = sys.dFdz(theta, rb, c0.eval(theta));
      const Jet speed = sys.radial_speed(theta, Jet::variable(0, rb, 1, 1));
      A.diagonal().array() -= i * speed[1];
      return A;
    };
    VectorFn Gi = [&sys, &inner, &coeffs, i, n](double theta) {
      const double rb = inner.eval(theta)[0];
      const Jet rj = Jet::variable(0, rb, i, 1);
      std::vector<Jet> zj(n, Jet(i, 1));
      for (int l = 0; l < n; ++l) {
        for (int k = 0; k < i; ++k) zj[l].raw(k) = coeffs[k].eval(theta)[l];
      }
      std::vector<Jet> f = sys.F(theta, rj, zj);
      Eigen::VectorXd g(n);
      for (int l = 0; l < n; ++l) g[l] = f[l][i];
      // transport corrections from the curvature of the radial family:
      // [sigma^i](dPsi/dsigma * (g(r+sigma) - g(r))) beyond the part already
      // moved into the matrix
      const Jet speed = sys.radial_speed(theta, Jet::variable(0, rb, i, 1));
      for (int m = 2; m <= i; ++m) {
        const double cm = speed[m] * (i + 1 - m);
        if (cm != 0.0) g -= cm * coeffs[i + 1 - m].eval(theta);
      }
      return g;
    };
    coeffs.push_back(solve_periodic_linear(Ai, Gi, n, opts));
  }
  return coeffs;
}

PatchySolution build_patchy(const PolarReducedSystem& sys, const SeedPolynomial& seed,
                            int order, const std::vector<double>& schedule,
                            const PatchyOptions& opts) {
  if (seed.n() != sys.n()) throw ValidationError("seed dimension does not match the system");
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    if (!(schedule[j] > 0) || (j > 0 && !(schedule[j] > schedule[j - 1])))
      throw ValidationError("schedule must be strictly increasing and positive");
  }
  if (order < 1 && !schedule.empty())
    throw ValidationError("patch order must be at least 1");

  BvpOptions bvp = opts.bvp;
  if (bvp.segments <= 0) {
    // bound the per-segment growth of the hyperbolic z-modes
    double rate = 0;
    for (const auto& lambda : eigenvalues(sys.base().B()))
      rate = std::max(rate, std::abs(lambda.real()));
    bvp.segments = std::clamp(static_cast<int>(std::ceil(rate * kTwoPi / 1.5)), 8, 64);
  }
  auto log = [&](const std::string& msg) {
    if (opts.log) opts.log(msg);
  };

  std::vector<PeriodicCurve> curves;
  std::vector<std::vector<PeriodicCurve>> patch_coeffs;

  auto assemble = [&]() {
    std::vector<RadialCurve> rcs;
    for (std::size_t j = 0; j < curves.size(); ++j)
      rcs.push_back(RadialCurve{static_cast<int>(j), schedule[j],
                                sample_to_spline(curves[j], opts.theta_mesh)});
    std::vector<AnnulusPatch> patches;
    for (std::size_t t = 0; t < patch_coeffs.size(); ++t) {
      AnnulusPatch patch;
      patch.index = static_cast<int>(t) + 1;
      for (const auto& c : patch_coeffs[t])
        patch.coeffs.push_back(sample_to_spline(c, opts.theta_mesh));
      patches.push_back(std::move(patch));
    }
    std::vector<double> done_schedule(schedule.begin(), schedule.begin() + curves.size());
    return PatchySolution(seed, std::move(rcs), std::move(patches), order, opts.theta_mesh,
                          sys.orientation(), std::move(done_schedule), bvp);
  };

  for (std::size_t j = 0; j < schedule.size(); ++j) {
    try {
      PeriodicCurve rc = compute_radial_curve(sys, schedule[j], bvp);
      if (!curves.empty()) {
        // nestedness on the shared mesh
        for (int i = 0; i < opts.theta_mesh; ++i) {
          const double theta = kTwoPi * i / opts.theta_mesh;
          if (!(rc.eval(theta)[0] > curves.back().eval(theta)[0]))
            throw SolverError("radial curves are not nested at theta=" +
                              std::to_string(theta));
        }
      }
      curves.push_back(std::move(rc));
      log("radial curve " + std::to_string(j) + ": r(0)=" + std::to_string(schedule[j]));
    } catch (const Error& err) {
      throw BuildAborted(static_cast<int>(j), std::string("radial curve: ") + err.what(),
                         std::make_shared<PatchySolution>(assemble()));
    }

    if (j == 0) continue;
    const PeriodicCurve& inner = curves[j - 1];
    CurveFn guess;
    if (j == 1) {
      guess = [&seed, &inner](double theta) {
        return seed.eval_polar(theta, inner.eval(theta)[0], 0)[0];
      };
    } else {
      const std::vector<PeriodicCurve>& prev = patch_coeffs.back();
      const PeriodicCurve& prev_inner = curves[j - 2];
      guess = [&prev, &prev_inner, &inner](double theta) {
        const double sigma = inner.eval(theta)[0] - prev_inner.eval(theta)[0];
        Eigen::VectorXd acc = prev.back().eval(theta);
        for (int i = static_cast<int>(prev.size()) - 2; i >= 0; --i)
          acc = acc * sigma + prev[i].eval(theta);
        return acc;
      };
    }
    try {
      patch_coeffs.push_back(compute_patch(sys, inner, order, guess, bvp));
      log("annulus " + std::to_string(j) + ": base curve and " + std::to_string(order) +
          " coefficient orders solved");
    } catch (const Error& err) {
      curves.pop_back();  // keep the prefix domain consistent with its patches
      throw BuildAborted(static_cast<int>(j), err.what(),
                         std::make_shared<PatchySolution>(assemble()));
    }
  }

  return assemble();
}

double pde_residual(const PolarReducedSystem& sys, const PatchySolution& sol, double theta,
                    double r, double fd_step) {
  const double h = fd_step;
  const int region = sol.region_of(theta, r);
  auto same_region = [&](double t, double rr) {
    try {
      return sol.region_of(t, rr) == region;
    } catch (const DomainError&) {
      return false;
    }
  };
  if (!same_region(theta + h, r) || !same_region(theta - h, r) ||
      !same_region(theta, r + h) || (r >= h && !same_region(theta, r - h)))
    throw DomainError("pde_residual: stencil touches a patch seam at theta=" +
                      std::to_string(theta) + ", r=" + std::to_string(r));

  Eigen::VectorXd dth = (sol.evaluate(theta + h, r) - sol.evaluate(theta - h, r)) / (2 * h);
  Eigen::VectorXd dr;
  if (r >= h)
    dr = (sol.evaluate(theta, r + h) - sol.evaluate(theta, r - h)) / (2 * h);
  else
    dr = (sol.evaluate(theta, r + h) - sol.evaluate(theta, r)) / h;

  Eigen::VectorXd psi = sol.evaluate(theta, r);
  Eigen::VectorXd residual = dth + dr * (r * sys.R(theta, r)) - sys.F(theta, r, psi);
  return residual.norm();
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  return m;
}

}  // namespace

nlohmann::json serialize(const PatchySolution& sol) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "patchy-solution";
  doc["n"] = sol.n();
  doc["order"] = sol.order();
  doc["theta_mesh"] = sol.theta_mesh();
  doc["orientation"] = sol.orientation();
  doc["schedule"] = sol.schedule();
  doc["bvp"] = {{"tol", sol.bvp_options().tol},
                {"periodicity_tol", sol.bvp_options().periodicity_tol},
                {"segments", sol.bvp_options().segments},
                {"ode_tol", sol.bvp_options().ode_tol}};

  nlohmann::json seed;
  seed["degree"] = sol.seed().degree();
  nlohmann::json blocks = nlohmann::json::array();
  for (int d = 1; d <= sol.seed().degree(); ++d) blocks.push_back(matrix_to_json(sol.seed().block(d)));
  seed["blocks"] = std::move(blocks);
  doc["seed"] = std::move(seed);

  if (!sol.curves().empty()) {
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& c : sol.curves()) curves.push_back(matrix_to_json(c.curve.samples()));
    doc["curves"] = std::move(curves);
  }
  if (!sol.patches().empty()) {
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& p : sol.patches()) {
      nlohmann::json coeffs = nlohmann::json::array();
      for (const auto& c : p.coeffs) coeffs.push_back(matrix_to_json(c.samples()));
      patches.push_back(nlohmann::json{{"coeffs", std::move(coeffs)}});
    }
    doc["patches"] = std::move(patches);
  }
  if (!sol.definition.is_null()) doc["definition"] = sol.definition;
  return doc;
}

PatchySolution deserialize(const nlohmann::json& doc) {
  if (!doc.contains("schema_version") || doc.at("schema_version").get<int>() != 1)
    throw ValidationError("solution document: unsupported schema version");
  if (doc.value("kind", "") != std::string("patchy-solution"))
    throw ValidationError("solution document: wrong kind");

  try {
    const int n = doc.at("n").get<int>();
    const int order = doc.at("order").get<int>();
    const int mesh = doc.at("theta_mesh").get<int>();
    const int orientation = doc.at("orientation").get<int>();
    std::vector<double> schedule = doc.at("schedule").get<std::vector<double>>();

    std::vector<Eigen::MatrixXd> blocks;
    for (const auto& b : doc.at("seed").at("blocks")) blocks.push_back(matrix_from_json(b));
    SeedPolynomial seed(n, std::move(blocks));

    std::vector<RadialCurve> curves;
    if (doc.contains("curves")) {
      int j = 0;
      for (const auto& c : doc.at("curves")) {
        curves.push_back(RadialCurve{j, schedule.at(j), PeriodicSpline(matrix_from_json(c))});
        ++j;
      }
    }
    std::vector<AnnulusPatch> patches;
    if (doc.contains("patches")) {
      int t = 1;
      for (const auto& p : doc.at("patches")) {
        AnnulusPatch patch;
        patch.index = t++;
        for (const auto& c : p.at("coeffs")) patch.coeffs.push_back(PeriodicSpline(matrix_from_json(c)));
        patches.push_back(std::move(patch));
      }
    }

    BvpOptions bvp;
    if (doc.contains("bvp")) {
      bvp.tol = doc.at("bvp").value("tol", bvp.tol);
      bvp.periodicity_tol = doc.at("bvp").value("periodicity_tol", bvp.periodicity_tol);
      bvp.segments = doc.at("bvp").value("segments", bvp.segments);
      bvp.ode_tol = doc.at("bvp").value("ode_tol", bvp.ode_tol);
    }

    PatchySolution sol(std::move(seed), std::move(curves), std::move(patches), order, mesh,
                       orientation, std::move(schedule), bvp);
    if (doc.contains("definition")) sol.definition = doc.at("definition");
    return sol;
  } catch (const nlohmann::json::exception& err) {
    throw ValidationError(std::string("corrupted solution document: ") + err.what());
  }
}

}  // namespace patchcm
