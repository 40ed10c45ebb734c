#pragma once

// Command-line front end: scenario runs, the bundled four-phase
// demonstration and the verification suites.

#include "fracthm/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fracthm::app {

/// Text of the bundled demonstration scenario.
const char* demo_scenario_text();

/// Overrides taken from the command line.
struct RunOptions {
  /// Cells along y; cells along x scale with the original aspect.
  std::optional<int> resolution;
  std::optional<std::filesystem::path> out_dir;
  double dt_scale = 1.0;
  std::optional<int> max_newton;
};

/// Applies the overrides; ValidationError for non-positive values.
Scenario apply_options(Scenario scenario, const RunOptions& options);

/// Contact state of every fracture cell at the end of one phase.
struct PhaseEndState {
  int phase = 0;
  std::string name;
  double time = 0.0;
  RegimeMap regimes;
  std::vector<Vec> jump_n, jump_t;  // per subdomain, empty for non-fractures
};

struct RunResult {
  MixedDimGrid grid;
  std::vector<Phase> phases;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<PhaseEndState> phase_ends;
  std::vector<std::filesystem::path> files;
  double seconds = 0.0;
};

/// Runs a scenario and writes into `out_dir`:
///   scenario.yaml           normalized input
///   fracture_timeseries.csv one row per step and fracture
///   diagnostics.jsonl       one JSON object per step
///   phase_states.csv        contact state of every fracture cell at each phase end
///   *.vtk                   snapshots (see OutputSpec)
/// Progress lines go to `log` when given.
RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& base_dir,
                       const std::filesystem::path& out_dir, std::ostream* log = nullptr);

/// Header of phase_states.csv.
inline constexpr const char* kPhaseStatesHeader = "phase,name,time,fracture,subdomain,cell,x,y,jump_n,jump_t,regime";

/// Qualitative behaviour of a four-phase run.
struct DemoAssessment {
  int num_phases = 0;
  int num_fractures = 0;
  /// Fractures whose cell regimes at the end of phase k differ from those at
  /// the end of phase k - 1 (entry 0 is unused).
  std::vector<int> fractures_changed;
  /// Fractures with no sliding cell at the end of the first phase and a
  /// sliding cell at some step of the second.
  int sliding_onsets = 0;
  /// Sum over fractures of ||[[u]]_n|| at the end of every phase.
  std::vector<double> total_opening;
  int max_newton = 0;
  /// Newton iterations of the first step of each phase and the median over
  /// the phase.
  std::vector<int> onset_iterations;
  std::vector<double> median_iterations;
  double seconds = 0.0;

  bool passed(std::string* why = nullptr) const;
  std::string summary() const;
};

DemoAssessment assess_demo(const RunResult& run);

/// Entry point of the executable. Exit codes: 0 success, 1 failed check,
/// 2 invalid input or I/O failure, 3 nonconvergence, 64 usage error.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fracthm::app
