// Acceptance run: one PASS/FAIL line per criterion.
//
// usage: acceptance <scenario-dir> <work-dir> [<cli-executable>]
//
// Every *.yaml file in <scenario-dir> is run for the conservation audit; the
// run of demo.yaml is also assessed for the qualitative phase behaviour. With
// a CLI path the determinism check runs `demo` twice as separate processes,
// otherwise twice in this process.

#include "fracthm/app.hpp"
#include "fracthm/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace fs = std::filesystem;
using namespace fracthm;
using verify::CheckResult;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CheckResult determinism(const fs::path& work, const std::string& cli) {
  CheckResult r;
  r.id = 11;
  r.name = "determinism";
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path a = work / "determinism_a", b = work / "determinism_b";
  try {
    if (!cli.empty()) {
      for (const auto& dir : {a, b}) {
        fs::remove_all(dir);
        const std::string cmd = "\"" + cli + "\" demo --quiet --out-dir \"" + dir.string() + "\" > \"" +
                                (work / "determinism.log").string() + "\" 2>&1";
        if (std::system(cmd.c_str()) != 0) throw std::runtime_error("demo process failed: " + cmd);
      }
    } else {
      const Scenario sc = parse_scenario(app::demo_scenario_text());
      for (const auto& dir : {a, b}) {
        fs::remove_all(dir);
        app::run_scenario(sc, {}, dir);
      }
    }
    const std::string csv_a = slurp(a / "fracture_timeseries.csv"), csv_b = slurp(b / "fracture_timeseries.csv");
    const bool csv = !csv_a.empty() && csv_a == csv_b;
    const bool json = slurp(a / "diagnostics.jsonl") == slurp(b / "diagnostics.jsonl");
    const auto rows = std::count(csv_a.begin(), csv_a.end(), '\n');
    r.passed = csv && json;
    r.detail = std::string(cli.empty() ? "two in-process" : "two separate") + " demo runs: fracture CSV (" +
               std::to_string(rows) + " lines) " + (csv ? "identical" : "DIFFERENT") + ", diagnostics " +
               (json ? "identical" : "DIFFERENT");
  } catch (const std::exception& e) {
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = since(t0);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <scenario-dir> <work-dir> [<cli-executable>]\n";
    return 64;
  }
  const fs::path scenario_dir = argv[1], work = argv[2];
  const std::string cli = argc > 3 ? argv[3] : "";
  fs::create_directories(work);

  std::vector<CheckResult> results = verify::run_oracle_suites();

  // Shipped scenarios, in name order.
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scenario_dir))
    if (e.path().extension() == ".yaml") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<std::pair<std::string, std::vector<StepDiagnostics>>> runs;
  CheckResult demo{10, "four-phase demo", false, "demo.yaml not found", 0.0};
  std::string run_errors;
  const auto t_runs = std::chrono::steady_clock::now();
  for (const auto& f : files) {
    try {
      const Scenario sc = load_scenario(f);
      const auto run = app::run_scenario(sc, f.parent_path(), work / f.stem());
      runs.emplace_back(f.filename().string(), run.diagnostics);
      if (f.filename() == "demo.yaml") {
        const auto a = app::assess_demo(run);
        std::string why;
        demo.passed = a.passed(&why);
        demo.detail = a.summary() + (demo.passed ? "" : "; " + why);
        demo.seconds = run.seconds;
      }
    } catch (const std::exception& e) {
      run_errors += f.filename().string() + ": " + e.what() + "; ";
      if (f.filename() == "demo.yaml") demo.detail = std::string("error: ") + e.what();
    }
  }
  CheckResult audit = verify::conservation_audit(runs);
  audit.seconds = since(t_runs);
  if (!run_errors.empty()) {
    audit.passed = false;
    audit.detail += "; failed runs: " + run_errors;
  }
  results.push_back(audit);
  results.push_back(demo);
  results.push_back(determinism(work, cli));

  std::sort(results.begin(), results.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  int failed = 0;
  for (const auto& r : results) {
    std::cout << verify::format_result(r) << "\n";
    failed += !r.passed;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria FAILED" : "all 11 criteria passed") << std::endl;
  return failed ? 1 : 0;
}
