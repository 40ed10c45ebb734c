#include "doctest.h"

#include "fracthm/app.hpp"
#include "fracthm/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fracthm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int call_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "fracthm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = app::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

// A two-phase run small enough for a unit test.
const char* kTiny = R"(
name: tiny
geometry:
  domain: {min: [0, 0], max: [1, 1]}
  resolution: 6
  fractures:
    - [[0.25, 0.25], [0.75, 0.75]]
materials:
  permeability: 1e-13
  friction_coefficient: 0.6
phases:
  - name: load
    start: 0
    end: 2
    dt: 1
    mechanics:
      bottom: {kind: dirichlet, value: [0, 0]}
      top: {kind: dirichlet, value: [0.0005, -0.002]}
  - name: inject
    end: 2.2
    dt: 0.1
    flow:
      left: {kind: dirichlet, value: 3e7}
output:
  vtk_every: 2
)";

}  // namespace

TEST_CASE("bundled demo has four phases and seven fractures") {
  const Scenario sc = parse_scenario(app::demo_scenario_text());
  REQUIRE(sc.phases.size() == 4);
  const double bounds[] = {-10000, 0, 0.02, 2.5, 5};
  for (int k = 0; k < 4; ++k) {
    CHECK(sc.phases[k].start == doctest::Approx(bounds[k]));
    CHECK(sc.phases[k].end == doctest::Approx(bounds[k + 1]));
  }
  CHECK(sc.geometry.fractures.size() == 7);
  const MixedDimGrid g = build_grid(sc);
  CHECK(g.num_fractures() == 7);
}

TEST_CASE("embedded demo text matches the shipped scenario file") {
  CHECK(slurp(fs::path(FRACTHM_SCENARIO_DIR) / "demo.yaml") == app::demo_scenario_text());
}

TEST_CASE("apply_options") {
  Scenario sc = parse_scenario(kTiny);
  sc.geometry.nx = 12;
  sc.geometry.ny = 6;
  app::RunOptions opt;
  opt.resolution = 10;
  opt.dt_scale = 0.5;
  opt.max_newton = 7;
  opt.out_dir = "elsewhere";
  const Scenario s2 = app::apply_options(sc, opt);
  CHECK(s2.geometry.ny == 10);
  CHECK(s2.geometry.nx == 20);
  CHECK(s2.phases[0].dt == doctest::Approx(0.5));
  CHECK(s2.phases[1].dt == doctest::Approx(0.05));
  CHECK(s2.solver.max_newton == 7);
  CHECK(s2.output.directory == "elsewhere");

  SUBCASE("rejects non-positive values") {
    app::RunOptions bad;
    bad.dt_scale = 0.0;
    CHECK_THROWS_AS(app::apply_options(sc, bad), Error);
    bad = {};
    bad.resolution = 0;
    CHECK_THROWS_AS(app::apply_options(sc, bad), Error);
    bad = {};
    bad.max_newton = 0;
    CHECK_THROWS_AS(app::apply_options(sc, bad), Error);
  }
}

TEST_CASE("cli exit codes") {
  CHECK(call_cli({}) == 64);
  CHECK(call_cli({"bogus"}) == 64);
  CHECK(call_cli({"run"}) == 64);
  CHECK(call_cli({"demo", "--resolution", "-3"}) == 64);
  std::string out;
  CHECK(call_cli({"--help"}, &out) == 0);
  CHECK(out.find("demo") != std::string::npos);

  std::string err;
  CHECK(call_cli({"run", "/nonexistent/scenario.yaml"}, nullptr, &err) == 2);
  CHECK(!err.empty());

  const fs::path dir = fs::temp_directory_path() / "fracthm_test_app_cli";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.yaml") << "geometry: [unclosed\n";
  }
  CHECK(call_cli({"run", (dir / "bad.yaml").string()}) == 2);
  {
    std::ofstream(dir / "invalid.yaml") << "phases:\n  - {start: 0, end: 1, dt: -1}\n";
  }
  CHECK(call_cli({"run", (dir / "invalid.yaml").string()}) == 2);
}

TEST_CASE("run_scenario writes every output and is reproducible") {
  const Scenario sc = parse_scenario(kTiny);
  const fs::path root = fs::temp_directory_path() / "fracthm_test_app_run";
  fs::remove_all(root);
  const auto a = app::run_scenario(sc, {}, root / "a");
  const auto b = app::run_scenario(sc, {}, root / "b");

  REQUIRE(a.diagnostics.size() == 4);
  REQUIRE(a.phase_ends.size() == 2);
  CHECK(a.phase_ends[0].time == doctest::Approx(2.0));
  CHECK(a.phase_ends[1].time == doctest::Approx(2.2));
  for (const char* f : {"scenario.yaml", "diagnostics.jsonl", "fracture_timeseries.csv", "phase_states.csv"}) {
    CHECK(fs::exists(root / "a" / f));
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }
  // vtk_every 2 with 4 steps: steps 2 and 4 are written, plus phase ends (step 2 and 4).
  int vtk = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) vtk += e.path().extension() == ".vtk";
  CHECK(vtk == 2 * static_cast<int>(a.grid.subdomains.size()));

  const std::string states = slurp(root / "a" / "phase_states.csv");
  CHECK(states.rfind(app::kPhaseStatesHeader, 0) == 0);

  // The normalized copy parses back to the same scenario.
  CHECK(parse_scenario(slurp(root / "a" / "scenario.yaml")) == sc);

  const auto assessment = app::assess_demo(a);
  CHECK(assessment.num_phases == 2);
  CHECK(assessment.num_fractures == 1);
  CHECK(assessment.total_opening.size() == 2);
  CHECK(assessment.onset_iterations.size() == 2);
  std::string why;
  CHECK_FALSE(assessment.passed(&why));
  CHECK(why.find("four phases") != std::string::npos);
}
