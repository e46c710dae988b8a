#include "patchcm/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "patchcm/patchy.hpp"

namespace patchcm {

namespace {

std::string fmt(double v) {
  char buf[32];
  int len = snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, len);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(err.byte, "'" + path + "': " + err.what());
  }
}

PatchySolution load_solution(const std::string& path) { return deserialize(load_json(path)); }

GridSpec resolve_grid(const SystemDefinition& def, std::optional<std::pair<double, double>> w1,
                      std::optional<std::pair<double, double>> w2, int samples) {
  GridSpec g = def.grid;
  if (w1) {
    g.w1_lo = w1->first;
    g.w1_hi = w1->second;
    g.specified = true;
  }
  if (w2) {
    g.w2_lo = w2->first;
    g.w2_hi = w2->second;
    g.specified = true;
  }
  if (samples > 0) g.samples = samples;
  if (!g.specified)
    throw ValidationError("no grid ranges: pass --w1/--w2 or add a grid block to the definition");
  if (g.samples < 1 || g.w1_hi < g.w1_lo || g.w2_hi < g.w2_lo)
    throw ValidationError("malformed grid specification");
  return g;
}

double grid_point(double lo, double hi, int i, int samples) {
  return samples == 1 ? lo : lo + (hi - lo) * i / (samples - 1);
}

// map by orientation into the normalized frame where seeds live
Eigen::Vector2d normalized_point(int orientation, double w1, double w2) {
  return {w1, orientation < 0 ? -w2 : w2};
}

}  // namespace

int default_theta_mesh() {
  if (const char* env = std::getenv("PATCHCM_THETA_MESH")) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
    if (ec == std::errc() && value >= 8) return value;
  }
  return 256;
}

void cmd_seed(const SeedArgs& args, std::ostream& log) {
  if (args.order < 1) throw ValidationError("--order must be at least 1");
  SystemDefinition def = load_system_definition(args.definition);
  auto sys = def.center_system(args.hyperbolicity_tol);
  SeedPolynomial seed = compute_seed(*sys, args.order);

  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "seed";
  doc["name"] = def.name;
  doc["n"] = seed.n();
  doc["degree"] = seed.degree();
  doc["orientation"] = sys->orientation();
  nlohmann::json terms = nlohmann::json::array();
  for (int d = 1; d <= seed.degree(); ++d) {
    const Eigen::MatrixXd& blk = seed.block(d);
    for (int j = 0; j <= d; ++j) {
      // user-frame coefficients: odd w2-powers flip with the orientation
      const double sign = (sys->orientation() < 0 && j % 2 == 1) ? -1.0 : 1.0;
      nlohmann::json coeff = nlohmann::json::array();
      for (int i = 0; i < seed.n(); ++i) coeff.push_back(sign * blk(i, j));
      terms.push_back(nlohmann::json{{"w1", d - j}, {"w2", j}, {"coeff", std::move(coeff)}});
    }
  }
  doc["terms"] = std::move(terms);
  write_text(args.out, doc.dump(2) + "\n");
  log << "seed: degree " << seed.degree() << ", " << seed.n() << " components -> " << args.out
      << "\n";
}

void cmd_solve(const SolveArgs& args, std::ostream& log) {
  if (args.order < 1) throw ValidationError("--order must be at least 1");
  SystemDefinition def = load_system_definition(args.definition);
  auto sys = def.center_system(args.hyperbolicity_tol);
  PolarReducedSystem polar = polar_reduce(sys, args.theta_rate_floor);

  std::vector<double> schedule = args.schedule;
  if (schedule.empty()) {
    if (args.annuli < 1 || !(args.thickness > 0))
      throw ValidationError("pass --schedule or both --annuli and --thickness");
    const double launch = args.launch > 0 ? args.launch : args.thickness;
    for (int j = 0; j <= args.annuli; ++j) schedule.push_back(launch + j * args.thickness);
  }

  const int seed_order = args.seed_order > 0 ? args.seed_order : args.order;
  SeedPolynomial seed = compute_seed(*sys, seed_order);

  PatchyOptions opts;
  opts.theta_mesh = args.theta_mesh > 0 ? args.theta_mesh : default_theta_mesh();
  opts.bvp.tol = args.tol;
  opts.log = [&log](const std::string& msg) { log << msg << "\n"; };

  auto persist = [&](const PatchySolution& sol) {
    nlohmann::json doc = serialize(sol);
    write_text(args.out, doc.dump() + "\n");
  };

  try {
    PatchySolution sol = build_patchy(polar, seed, args.order, schedule, opts);
    sol.definition = def.raw;
    persist(sol);
    log << "solution: " << sol.patches().size() << " annuli, order " << sol.order() << " -> "
        << args.out << "\n";
  } catch (BuildAborted& aborted) {
    aborted.prefix->definition = def.raw;
    persist(*aborted.prefix);
    log << "failed at annulus " << aborted.annulus << ": " << aborted.cause << "\n";
    log << "completed prefix (" << aborted.prefix->patches().size() << " annuli) -> "
        << args.out << "\n";
    throw;
  }
}

GridSummary cmd_grid(const GridArgs& args, std::ostream& log) {
  PatchySolution sol = load_solution(args.solution);
  if (sol.definition.is_null())
    throw ValidationError("solution document carries no system definition");
  SystemDefinition def = parse_system_definition(sol.definition);
  if (args.reference && !def.has_reference())
    throw ValidationError("--reference requested but the definition has no reference solution");
  GridSpec grid = resolve_grid(def, args.w1_range, args.w2_range, args.samples);

  const int n = sol.n();
  std::string header = "w1,w2";
  for (int i = 0; i < n; ++i) header += ",z" + std::to_string(i + 1);
  if (args.reference)
    for (int i = 0; i < n; ++i) header += ",ref" + std::to_string(i + 1);
  if (args.reference)
    for (int i = 0; i < n; ++i) header += ",err" + std::to_string(i + 1);

  const long total = static_cast<long>(grid.samples) * grid.samples;
  std::vector<std::string> rows(total);
  std::vector<char> inside(total, 0);
  std::vector<double> errs(total, 0.0);

  auto work = [&](long begin, long end) {
    for (long idx = begin; idx < end; ++idx) {
      const int i = static_cast<int>(idx / grid.samples);
      const int j = static_cast<int>(idx % grid.samples);
      const double w1 = grid_point(grid.w1_lo, grid.w1_hi, i, grid.samples);
      const double w2 = grid_point(grid.w2_lo, grid.w2_hi, j, grid.samples);
      std::string row = fmt(w1) + "," + fmt(w2);
      Eigen::VectorXd ref;
      if (args.reference) ref = def.reference_at(w1, w2);
      try {
        Eigen::VectorXd z = sol.evaluate_cartesian(w1, w2);
        for (int c = 0; c < n; ++c) row += "," + fmt(z[c]);
        if (args.reference) {
          double worst = 0;
          for (int c = 0; c < n; ++c) row += "," + fmt(ref[c]);
          for (int c = 0; c < n; ++c) {
            row += "," + fmt(ref[c] - z[c]);
            worst = std::max(worst, std::abs(ref[c] - z[c]));
          }
          errs[idx] = worst;
        }
        inside[idx] = 1;
      } catch (const DomainError&) {
        for (int c = 0; c < n; ++c) row += ",";
        if (args.reference) {
          for (int c = 0; c < n; ++c) row += "," + fmt(ref[c]);
          for (int c = 0; c < n; ++c) row += ",";
        }
      }
      rows[idx] = std::move(row);
    }
  };

  const int hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<long>(hw, std::max<long>(1, total / 1024)));
  if (workers <= 1) {
    work(0, total);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (total + workers - 1) / workers;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back(work, t * chunk, std::min<long>(total, (t + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  GridSummary summary;
  summary.total = total;
  for (long idx = 0; idx < total; ++idx) {
    if (!inside[idx]) ++summary.outside;
    summary.max_error = std::max(summary.max_error, errs[idx]);
  }

  std::string text = header + "\n";
  for (const auto& row : rows) text += row + "\n";
  text += "# summary total=" + std::to_string(summary.total) +
          " inside=" + std::to_string(summary.total - summary.outside) +
          " outside=" + std::to_string(summary.outside);
  if (args.reference) text += " max_abs_error=" + fmt(summary.max_error);
  text += "\n";
  write_text(args.out, text);

  if (summary.outside == summary.total)
    log << "warning: every grid point lies outside the solved domain\n";
  log << "grid: " << summary.total << " points, " << summary.outside << " outside -> "
      << args.out << "\n";
  return summary;
}

std::vector<CompareRow> cmd_compare_poly(const ComparePolyArgs& args, std::ostream& log) {
  SystemDefinition def = load_system_definition(args.definition);
  if (!def.has_reference())
    throw ValidationError("compare-poly needs a definition with reference expressions");
  for (int d : args.degrees)
    if (d < 1 || d > 30)
      throw ValidationError("polynomial degrees must lie in [1, 30]");
  PatchySolution sol = load_solution(args.solution);
  auto sys = def.center_system(args.hyperbolicity_tol);
  GridSpec grid = resolve_grid(def, std::nullopt, std::nullopt, 0);

  // shared grid: the fixture grid clipped to the solved patchy domain
  std::vector<Eigen::Vector2d> points;
  std::vector<Eigen::VectorXd> refs, patchy_vals;
  for (int i = 0; i < grid.samples; ++i)
    for (int j = 0; j < grid.samples; ++j) {
      const double w1 = grid_point(grid.w1_lo, grid.w1_hi, i, grid.samples);
      const double w2 = grid_point(grid.w2_lo, grid.w2_hi, j, grid.samples);
      try {
        Eigen::VectorXd z = sol.evaluate_cartesian(w1, w2);
        points.emplace_back(w1, w2);
        patchy_vals.push_back(std::move(z));
        refs.push_back(def.reference_at(w1, w2));
      } catch (const DomainError&) {
      }
    }
  if (points.empty()) throw ValidationError("the fixture grid misses the solved domain");
  log << "compare-poly: " << points.size() << " shared grid points\n";

  std::vector<CompareRow> rows;
  for (int d : args.degrees) {
    SeedPolynomial poly = compute_seed(*sys, d);
    double sup = 0;
    for (std::size_t idx = 0; idx < points.size(); ++idx) {
      Eigen::Vector2d v =
          normalized_point(sys->orientation(), points[idx][0], points[idx][1]);
      sup = std::max(sup, (poly.eval(v) - refs[idx]).cwiseAbs().maxCoeff());
    }
    rows.push_back(CompareRow{"taylor-" + std::to_string(d), sup});
    log << "  taylor degree " << d << ": sup error " << sup << "\n";
  }
  double sup = 0;
  for (std::size_t idx = 0; idx < points.size(); ++idx)
    sup = std::max(sup, (patchy_vals[idx] - refs[idx]).cwiseAbs().maxCoeff());
  rows.push_back(CompareRow{"patchy", sup});
  log << "  patchy: sup error " << sup << "\n";

  if (!args.out.empty()) {
    std::string text = "approximation,sup_error,points\n";
    for (const auto& row : rows)
      text += row.label + "," + fmt(row.sup_error) + "," + std::to_string(points.size()) + "\n";
    write_text(args.out, text);
  }
  return rows;
}

ClosedLoopResult cmd_simulate(const SimulateArgs& args, std::ostream& log) {
  SystemDefinition def = load_system_definition(args.plant);
  PlantNormalForm plant = def.plant();
  auto sol = std::make_shared<PatchySolution>(load_solution(args.solution));

  if (args.w0.size() != 2) throw ValidationError("--w0 must have two components");
  const Eigen::Vector2d w0(args.w0[0], args.w0[1]);

  Eigen::MatrixXd A, Bin;
  plant_linearization(plant, A, Bin);
  const int nx = plant.state_dim();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(nx, nx);
  if (!args.lqr_q.empty()) {
    if (static_cast<int>(args.lqr_q.size()) != nx)
      throw ValidationError("--lqr-q must list one diagonal weight per state");
    Q = Eigen::Map<const Eigen::VectorXd>(args.lqr_q.data(), nx).asDiagonal();
  }
  Eigen::MatrixXd R = Eigen::MatrixXd::Constant(1, 1, args.lqr_r);
  Eigen::MatrixXd K = lqr_gain(A, Bin, Q, R);
  Regulator reg = build_regulator(plant, sol, K);

  Eigen::VectorXd x0(nx);
  if (args.start_on_manifold) {
    x0 = reg.pi(w0);
  } else {
    if (static_cast<int>(args.x0.size()) != nx)
      throw ValidationError("--x0 must list " + std::to_string(nx) +
                            " components (xi..., z...)");
    x0 = Eigen::Map<const Eigen::VectorXd>(args.x0.data(), nx);
  }

  SimulateOptions opts;
  opts.tol = args.tol;
  opts.band = args.band;
  ClosedLoopResult result = simulate_closed_loop(reg, x0, w0, args.horizon, opts);

  if (!args.out.empty()) {
    std::string header = "t";
    for (int i = 0; i < plant.relative_degree(); ++i) header += ",xi" + std::to_string(i + 1);
    for (int i = 0; i < plant.zdim(); ++i) header += ",z" + std::to_string(i + 1);
    header += ",w1,w2,u,y,y_ref,e";
    std::string text = header + "\n";
    for (int i = 0; i < result.t.size(); ++i) {
      std::string row = fmt(result.t[i]);
      for (int c = 0; c < nx; ++c) row += "," + fmt(result.x(i, c));
      row += "," + fmt(result.w(i, 0)) + "," + fmt(result.w(i, 1));
      row += "," + fmt(result.u[i]) + "," + fmt(result.y[i]) + "," + fmt(result.y_ref[i]) +
             "," + fmt(result.e[i]);
      text += row + "\n";
    }
    write_text(args.out, text);
  }

  log << "simulate: sup |e| over the final third = " << result.sup_error_tail << "\n";
  if (result.settling_time >= 0)
    log << "  settles into the +-" << args.band << " band at t = " << result.settling_time
        << "\n";
  else
    log << "  never settles into the +-" << args.band << " band\n";
  return result;
}

}  // namespace patchcm
