#pragma once

#include <Eigen/Core>
#include <functional>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "patchcm/bvp.hpp"
#include "patchcm/seed.hpp"
#include "patchcm/spline.hpp"
#include "patchcm/systems.hpp"

namespace patchcm {

struct PatchyOptions {
  int theta_mesh = 256;  // uniform sampling mesh for splines/serialization
  BvpOptions bvp;        // segments <= 0 selects them from the stiffness of B
  std::function<void(const std::string&)> log;  // optional progress sink

  PatchyOptions() { bvp.segments = 0; }
};

/// 2pi-periodic boundary curve theta -> r_j(theta) of one annulus.
struct RadialCurve {
  int index = 0;       // j
  double launch = 0;   // r_j(0)
  PeriodicSpline curve;  // scalar samples on the uniform mesh

  double eval(double theta) const { return curve.eval_scalar(theta); }
};

/// Radial Taylor data of one annulus: c_i(theta) = (1/i!) d^i Psi/dsigma^i
/// along the inner curve r_{j-1}, for i = 0..N.
struct AnnulusPatch {
  int index = 0;  // j >= 1; inner curve is r_{j-1}
  std::vector<PeriodicSpline> coeffs;

  int order() const { return static_cast<int>(coeffs.size()) - 1; }
  Eigen::VectorXd coeff(int i, double theta) const { return coeffs[i].eval(theta); }
};

/// The assembled piecewise approximation: seed polynomial inside the first
/// radial curve, one radial Taylor expansion per annulus, with patch j
/// owning r_{j-1}(theta) <= r < r_j(theta) and the outermost patch extended
/// by its launch increment. Evaluation interpolates all curves with
/// periodic cubic splines on the uniform theta mesh, so a serialized and
/// reloaded solution evaluates bit-identically.
class PatchySolution {
 public:
  PatchySolution() = default;
  PatchySolution(SeedPolynomial seed, std::vector<RadialCurve> curves,
                 std::vector<AnnulusPatch> patches, int order, int theta_mesh,
                 int orientation, std::vector<double> schedule, BvpOptions bvp);

  int n() const { return seed_.n(); }
  int order() const { return order_; }
  int orientation() const { return orientation_; }
  int theta_mesh() const { return theta_mesh_; }
  const SeedPolynomial& seed() const { return seed_; }
  const std::vector<RadialCurve>& curves() const { return curves_; }
  const std::vector<AnnulusPatch>& patches() const { return patches_; }
  const std::vector<double>& schedule() const { return schedule_; }
  const BvpOptions& bvp_options() const { return bvp_; }

  /// Owning region at (theta, r): -1 for the seed disk, patch position
  /// p >= 0 for curves_[p] <= r < curves_[p+1]; throws DomainError beyond
  /// the outer boundary.
  int region_of(double theta, double r) const;

  /// Outermost admissible radius at this angle (r_k(theta) plus the final
  /// increment when patches exist).
  double outer_radius(double theta) const;

  Eigen::VectorXd evaluate(double theta, double r) const;
  Eigen::VectorXd evaluate_cartesian(double w1, double w2) const;

  /// Attached source definition (round-tripped through serialization).
  nlohmann::json definition;

 private:
  SeedPolynomial seed_;
  std::vector<RadialCurve> curves_;
  std::vector<AnnulusPatch> patches_;
  int order_ = 0;
  int theta_mesh_ = 0;
  int orientation_ = 1;
  std::vector<double> schedule_;
  BvpOptions bvp_;
};

/// Pinned periodic solve of dr/dtheta = r R(theta, r) through r(0) = r_init.
PeriodicCurve compute_radial_curve(const PolarReducedSystem& sys, double r_init,
                                   const BvpOptions& opts);

/// One annulus: c_0 by periodic shooting of dz/dtheta = F(theta, r(theta), z)
/// warm-started from `guess`, then the linear periodic coefficient solves
/// order by order. The i-th coefficient equation couples through
/// A(theta) - i g'(theta) I, where g = r R is the radial transport speed of
/// the reduced equation and A = dF/dz along the base curve; inhomogeneities
/// are extracted as sigma-jet coefficients with the unknown zeroed.
std::vector<PeriodicCurve> compute_patch(const PolarReducedSystem& sys,
                                         const PeriodicCurve& inner, int order,
                                         const CurveFn& guess, const BvpOptions& opts);

/// Aborted pipeline: carries the index of the failing annulus and the
/// completed prefix so callers can persist partial progress.
struct BuildAborted : SolverError {
  BuildAborted(int annulus, std::string cause, std::shared_ptr<PatchySolution> prefix)
      : SolverError("annulus " + std::to_string(annulus) + ": " + cause),
        annulus(annulus),
        cause(std::move(cause)),
        prefix(std::move(prefix)) {}
  int annulus;
  std::string cause;
  std::shared_ptr<PatchySolution> prefix;
};

/// Full pipeline over a strictly increasing schedule of launch radii
/// r_0(0) < ... < r_k(0): one radial curve per entry, one patch per
/// annulus, each warm-started from its predecessor (the first from the
/// seed). Throws BuildAborted with the completed prefix on failure.
PatchySolution build_patchy(const PolarReducedSystem& sys, const SeedPolynomial& seed,
                            int order, const std::vector<double>& schedule,
                            const PatchyOptions& opts = {});

/// Pointwise violation of the reduced center-manifold identity
///   dpsi/dtheta + dpsi/dr * r R(theta, r) - F(theta, r, psi) = 0
/// with both derivatives by central differences (step fd_step); requires
/// the stencil to stay inside one region.
double pde_residual(const PolarReducedSystem& sys, const PatchySolution& sol, double theta,
                    double r, double fd_step = 1e-4);

/// Version-tagged lossless JSON round trip.
nlohmann::json serialize(const PatchySolution& sol);
PatchySolution deserialize(const nlohmann::json& doc);

}  // namespace patchcm
