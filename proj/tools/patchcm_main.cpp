#include <CLI11.hpp>
#include <iostream>

#include "patchcm/cli.hpp"
#include "patchcm/patchy.hpp"

using namespace patchcm;

namespace {

// exit codes: 0 ok, 2 usage, 3 parse/validation, 4 solver, 5 domain
int run(int argc, char** argv) {
  CLI::App app{"patchy center-manifold solver for output regulation"};
  app.require_subcommand(1);

  SeedArgs seed;
  CLI::App* seed_cmd = app.add_subcommand("seed", "Taylor seed of the center manifold");
  seed_cmd->add_option("definition", seed.definition, "system definition JSON")->required();
  seed_cmd->add_option("--order", seed.order, "truncation degree (>= 1)")->required()->check(CLI::PositiveNumber);
  seed_cmd->add_option("--out", seed.out, "output seed JSON")->required();
  seed_cmd->add_option("--hyperbolicity-tol", seed.hyperbolicity_tol,
                       "minimum |Re lambda(B)|");

  SolveArgs solve;
  CLI::App* solve_cmd = app.add_subcommand("solve", "build the patchy solution");
  solve_cmd->add_option("definition", solve.definition, "system definition JSON")->required();
  solve_cmd->add_option("--order", solve.order, "radial Taylor order N")->required()->check(CLI::PositiveNumber);
  solve_cmd->add_option("--seed-order", solve.seed_order, "seed degree (default: N)");
  solve_cmd->add_option("--annuli", solve.annuli, "number of annular regions k");
  solve_cmd->add_option("--thickness", solve.thickness, "annulus thickness at theta=0");
  solve_cmd->add_option("--r0", solve.launch, "first launch radius (default: thickness)");
  solve_cmd->add_option("--schedule", solve.schedule,
                        "explicit launch radii r_0(0) < ... < r_k(0)")
      ->delimiter(',');
  solve_cmd->add_option("--theta-mesh", solve.theta_mesh, "uniform theta nodes per period");
  solve_cmd->add_option("--tol", solve.tol, "periodic BVP tolerance");
  solve_cmd->add_option("--hyperbolicity-tol", solve.hyperbolicity_tol,
                        "minimum |Re lambda(B)|");
  solve_cmd->add_option("--theta-rate-floor", solve.theta_rate_floor,
                        "lower bound on |1 + Theta_hat|");
  solve_cmd->add_option("--out", solve.out, "output solution JSON")->required();

  GridArgs grid;
  std::vector<double> w1r, w2r;
  CLI::App* grid_cmd = app.add_subcommand("grid", "sample a solution on a Cartesian grid");
  grid_cmd->add_option("solution", grid.solution, "solution JSON")->required();
  grid_cmd->add_option("--w1", w1r, "w1 range lo,hi")->delimiter(',')->expected(2);
  grid_cmd->add_option("--w2", w2r, "w2 range lo,hi")->delimiter(',')->expected(2);
  grid_cmd->add_option("--samples", grid.samples, "samples per axis");
  grid_cmd->add_flag("--reference", grid.reference, "emit true-solution and error columns");
  grid_cmd->add_option("--out", grid.out, "output CSV")->required();

  ComparePolyArgs compare;
  CLI::App* compare_cmd =
      app.add_subcommand("compare-poly", "sup errors of Taylor seeds vs the patchy solution");
  compare_cmd->add_option("definition", compare.definition, "system definition JSON")
      ->required();
  compare_cmd->add_option("--solution", compare.solution, "solution JSON")->required();
  compare_cmd->add_option("--degrees", compare.degrees, "Taylor degrees to compare")
      ->delimiter(',')
      ->required();
  compare_cmd->add_option("--out", compare.out, "output CSV");

  SimulateArgs sim;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "closed-loop tracking simulation");
  sim_cmd->add_option("plant", sim.plant, "plant definition JSON (normal form)")->required();
  sim_cmd->add_option("--solution", sim.solution, "solution JSON")->required();
  sim_cmd->add_option("--x0", sim.x0, "initial state (xi..., z...)")->delimiter(',');
  sim_cmd->add_option("--w0", sim.w0, "initial exosystem state")->delimiter(',')->expected(2)->required();
  sim_cmd->add_option("--T", sim.horizon, "simulation horizon");
  sim_cmd->add_option("--lqr-q", sim.lqr_q, "diagonal LQR state weights")->delimiter(',');
  sim_cmd->add_option("--lqr-r", sim.lqr_r, "LQR input weight");
  sim_cmd->add_option("--band", sim.band, "settling band on |e|");
  sim_cmd->add_option("--tol", sim.tol, "integrator tolerance");
  sim_cmd->add_flag("--start-on-manifold", sim.start_on_manifold,
                    "initialize at x0 = pi(w0)");
  sim_cmd->add_option("--out", sim.out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (seed_cmd->parsed()) cmd_seed(seed, std::cerr);
    if (solve_cmd->parsed()) cmd_solve(solve, std::cerr);
    if (grid_cmd->parsed()) {
      if (w1r.size() == 2) grid.w1_range = {w1r[0], w1r[1]};
      if (w2r.size() == 2) grid.w2_range = {w2r[0], w2r[1]};
      cmd_grid(grid, std::cerr);
    }
    if (compare_cmd->parsed()) cmd_compare_poly(compare, std::cerr);
    if (sim_cmd->parsed()) cmd_simulate(sim, std::cerr);
  } catch (const ParseError& err) {
    std::cerr << "error (parse): " << err.what() << "\n";
    return 3;
  } catch (const ValidationError& err) {
    std::cerr << "error (validation): " << err.what() << "\n";
    return 3;
  } catch (const DomainError& err) {
    std::cerr << "error (domain): " << err.what() << "\n";
    return 5;
  } catch (const SolverError& err) {
    std::cerr << "error (solver): " << err.what() << "\n";
    return 4;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
