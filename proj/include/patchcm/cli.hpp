#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "patchcm/regulator.hpp"
#include "patchcm/sysdef.hpp"

namespace patchcm {

/// Default theta mesh, overridable with the PATCHCM_THETA_MESH environment
/// variable (flags still win).
int default_theta_mesh();

struct SeedArgs {
  std::string definition;
  int order = 0;
  std::string out;
  double hyperbolicity_tol = 1e-6;
};
void cmd_seed(const SeedArgs& args, std::ostream& log);

struct SolveArgs {
  std::string definition;
  int order = 2;
  int seed_order = 0;  // 0: same as order
  int annuli = 0;
  double thickness = 0;
  double launch = 0;  // r_0(0); 0: same as thickness
  std::vector<double> schedule;
  int theta_mesh = 0;  // 0: default/env
  double tol = 1e-9;
  double hyperbolicity_tol = 1e-6;
  double theta_rate_floor = 0.1;
  std::string out;
};
void cmd_solve(const SolveArgs& args, std::ostream& log);

struct GridArgs {
  std::string solution;
  std::optional<std::pair<double, double>> w1_range, w2_range;
  int samples = 0;  // 0: definition default
  bool reference = false;
  std::string out;
};
struct GridSummary {
  long total = 0;
  long outside = 0;
  double max_error = 0;  // only meaningful with reference columns
};
GridSummary cmd_grid(const GridArgs& args, std::ostream& log);

struct ComparePolyArgs {
  std::string definition;
  std::string solution;
  std::vector<int> degrees;
  std::string out;
  double hyperbolicity_tol = 1e-6;
};
struct CompareRow {
  std::string label;
  double sup_error = 0;
};
std::vector<CompareRow> cmd_compare_poly(const ComparePolyArgs& args, std::ostream& log);

struct SimulateArgs {
  std::string plant;
  std::string solution;
  std::vector<double> x0;
  std::vector<double> w0;
  double horizon = 30.0;
  std::vector<double> lqr_q;  // diagonal; empty: identity
  double lqr_r = 1.0;
  double band = 1e-2;
  double tol = 1e-9;
  bool start_on_manifold = false;
  std::string out;
};
ClosedLoopResult cmd_simulate(const SimulateArgs& args, std::ostream& log);

}  // namespace patchcm
