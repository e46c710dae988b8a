#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "patchcm/cli.hpp"
#include "patchcm/patchy.hpp"

using namespace patchcm;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const char* name) { return fs::path(PATCHCM_FIXTURE_DIR) / name; }

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "patchcm_cli_tests";
  fs::create_directories(dir);
  return dir;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

// small egg-carton solution shared across CLI tests
const fs::path& eggcarton_solution() {
  static fs::path path = [] {
    fs::path out = scratch_dir() / "eggcarton-small.json";
    SolveArgs args;
    args.definition = fixture("eggcarton.json").string();
    args.order = 2;
    args.annuli = 4;
    args.thickness = 0.5;
    args.out = out.string();
    std::ostringstream log;
    cmd_solve(args, log);
    return out;
  }();
  return path;
}

}  // namespace

TEST_CASE("cmd_seed writes the exact linear manifold") {
  fs::path out = scratch_dir() / "seed-linear.json";
  SeedArgs args;
  args.definition = fixture("linear-example1.json").string();
  args.order = 3;
  args.out = out.string();
  std::ostringstream log;
  cmd_seed(args, log);

  nlohmann::json doc = read_json(out);
  CHECK(doc.at("schema_version") == 1);
  CHECK(doc.at("degree") == 3);
  double worst_high = 0;
  for (const auto& term : doc.at("terms")) {
    const int a = term.at("w1").get<int>(), b = term.at("w2").get<int>();
    const auto coeff = term.at("coeff");
    if (a + b == 1) {
      Eigen::Vector3d expect = a == 1 ? Eigen::Vector3d(-1.0 / 3, -0.5, -0.5)
                                      : Eigen::Vector3d(0, -1.0 / 6, -1.0 / 6);
      for (int i = 0; i < 3; ++i)
        CHECK(std::abs(coeff.at(i).get<double>() - expect[i]) <= 1e-12);
    } else {
      for (int i = 0; i < 3; ++i)
        worst_high = std::max(worst_high, std::abs(coeff.at(i).get<double>()));
    }
  }
  CHECK(worst_high <= 1e-12);
}

TEST_CASE("cmd_seed rejects bad input") {
  SeedArgs args;
  args.definition = fixture("linear-example1.json").string();
  args.order = 0;
  args.out = (scratch_dir() / "never.json").string();
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_seed(args, log), ValidationError);

  // malformed expression in the definition file carries context
  fs::path bad = scratch_dir() / "bad-def.json";
  std::ofstream(bad) << R"({"schema_version":1,"name":"bad","kind":"center-system",
    "B":[[-1.0]],"Zbar":["sin("],"P":"0","Q":"0"})";
  args.definition = bad.string();
  args.order = 1;
  try {
    cmd_seed(args, log);
    FAIL("expected ValidationError");
  } catch (const ValidationError& err) {
    CHECK(std::string(err.what()).find("Zbar[0]") != std::string::npos);
  }
}

TEST_CASE("cmd_solve produces a loadable solution and logs progress") {
  std::ostringstream log;
  SolveArgs args;
  args.definition = fixture("eggcarton.json").string();
  args.order = 2;
  args.annuli = 2;
  args.thickness = 0.5;
  args.theta_mesh = 128;
  fs::path out = scratch_dir() / "egg-tiny.json";
  args.out = out.string();
  cmd_solve(args, log);
  CHECK(log.str().find("annulus 1") != std::string::npos);

  nlohmann::json doc = read_json(out);
  PatchySolution sol = deserialize(doc);
  CHECK(sol.patches().size() == 2);
  CHECK(sol.theta_mesh() == 128);
  CHECK(sol.definition.at("name") == "eggcarton");
}

TEST_CASE("cmd_grid") {
  GridArgs args;
  args.solution = eggcarton_solution().string();
  args.reference = true;
  fs::path out = scratch_dir() / "egg-grid.csv";
  args.out = out.string();
  args.w1_range = {-3.5, 3.5};
  args.w2_range = {-3.5, 3.5};
  args.samples = 41;
  std::ostringstream log;
  GridSummary summary = cmd_grid(args, log);
  CHECK(summary.total == 41 * 41);
  CHECK(summary.outside > 0);                  // corners reach past the outer annulus
  CHECK(summary.outside < summary.total / 2);  // but the bulk is covered
  CHECK(summary.max_error < 1.0);  // the slack rim extrapolates a full increment

  // header + full-precision round trip on a sample line
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("w1,w2,z1,z2,z3,ref1,ref2,ref3,err1,err2,err3", 0) == 0);
  std::string line;
  std::getline(in, line);
  const double w1 = std::strtod(line.c_str(), nullptr);
  CHECK(w1 == -3.5);

  SUBCASE("grid fully outside the domain") {
    args.w1_range = {40.0, 41.0};
    args.w2_range = {40.0, 41.0};
    args.samples = 3;
    args.reference = false;
    std::ostringstream warnlog;
    GridSummary s2 = cmd_grid(args, warnlog);
    CHECK(s2.outside == s2.total);
    CHECK(warnlog.str().find("warning") != std::string::npos);
  }

  SUBCASE("single point at the origin") {
    args.w1_range = {0.0, 0.0};
    args.w2_range = {0.0, 0.0};
    args.samples = 1;
    args.reference = false;
    fs::path single = scratch_dir() / "origin.csv";
    args.out = single.string();
    std::ostringstream slog;
    GridSummary s3 = cmd_grid(args, slog);
    CHECK(s3.total == 1);
    CHECK(s3.outside == 0);
    std::ifstream sin(single);
    std::string h, row;
    std::getline(sin, h);
    std::getline(sin, row);
    CHECK(row == "0,0,0,0,0");
  }
}

TEST_CASE("cmd_compare_poly on the linear system") {
  // degree-1 Taylor and the patchy solution are both exact here
  std::ostringstream log;
  SolveArgs solve;
  solve.definition = fixture("linear-example1.json").string();
  solve.order = 1;
  solve.annuli = 2;
  solve.thickness = 0.6;
  fs::path sol_path = scratch_dir() / "linear-sol.json";
  solve.out = sol_path.string();
  cmd_solve(solve, log);

  ComparePolyArgs args;
  args.definition = fixture("linear-example1.json").string();
  args.solution = sol_path.string();
  args.degrees = {1};
  fs::path out = scratch_dir() / "linear-compare.csv";
  args.out = out.string();
  auto rows = cmd_compare_poly(args, log);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label == "taylor-1");
  CHECK(rows[0].sup_error <= 1e-10);
  CHECK(rows[1].label == "patchy");
  CHECK(rows[1].sup_error <= 1e-7);

  args.degrees = {31};
  CHECK_THROWS_AS(cmd_compare_poly(args, log), ValidationError);
}

TEST_CASE("csv numbers round trip at full precision") {
  GridArgs args;
  args.solution = eggcarton_solution().string();
  args.w1_range = {0.3333333333333333, 0.3333333333333333};
  args.w2_range = {0.7, 0.7};
  args.samples = 1;
  fs::path out = scratch_dir() / "precision.csv";
  args.out = out.string();
  std::ostringstream log;
  cmd_grid(args, log);

  PatchySolution sol = deserialize(read_json(eggcarton_solution()));
  Eigen::VectorXd expect = sol.evaluate_cartesian(0.3333333333333333, 0.7);

  std::ifstream in(out);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::strtod(cell.c_str(), nullptr));
  REQUIRE(values.size() == 5);
  CHECK(values[0] == 0.3333333333333333);
  CHECK(values[1] == 0.7);
  for (int i = 0; i < 3; ++i) CHECK(values[2 + i] == expect[i]);
}

TEST_CASE("cli binary exit codes") {
#ifdef PATCHCM_CLI_PATH
  const std::string cli = PATCHCM_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("definitely-not-a-command") == 2);
  CHECK(run("seed") == 2);  // missing required flags
  CHECK(run("seed /nonexistent.json --order 2 --out /tmp/patchcm-x.json") == 3);
  CHECK(run("seed " + fixture("linear-example1.json").string() +
            " --order 0 --out /tmp/patchcm-x.json") == 2);  // flag validation
  CHECK(run("seed " + fixture("linear-example1.json").string() +
            " --order 2 --out /tmp/patchcm-seed-ok.json") == 0);
#endif
}
