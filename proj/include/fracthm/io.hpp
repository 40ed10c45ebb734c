#pragma once

// Scenario documents, field snapshots and time-series output.

#include "fracthm/solver.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fracthm {

/// Order in which per-side data is stored.
inline constexpr std::array<BoundarySide, 4> kBoundarySides = {BoundarySide::Left, BoundarySide::Right,
                                                               BoundarySide::Bottom, BoundarySide::Top};

/// Mechanics data on one side of the box. Dirichlet values are displacements
/// (m); Neumann values are tractions per unit face area (Pa).
struct MechanicsSideBc {
  std::array<BcKind, 2> kind{BcKind::Neumann, BcKind::Neumann};
  Point value = Point::Zero();
  bool operator==(const MechanicsSideBc& o) const { return kind == o.kind && value == o.value; }
};

/// Flow or heat data on one side. Dirichlet values are pressures (Pa) or
/// temperatures (K); Neumann values are outward fluxes per unit area.
struct ScalarSideBc {
  BcKind kind = BcKind::Neumann;
  double value = 0.0;
  bool operator==(const ScalarSideBc&) const = default;
};

struct PhaseSpec {
  std::string name;
  double start = 0.0;
  double end = 0.0;
  double dt = 0.0;
  /// Indexed like kBoundarySides.
  std::array<MechanicsSideBc, 4> mechanics{};
  std::array<ScalarSideBc, 4> flow{};
  std::array<ScalarSideBc, 4> heat{};
  bool operator==(const PhaseSpec&) const = default;
};

struct GeometrySpec {
  Box domain;
  int nx = 10, ny = 10;
  /// Inline fractures; ignored when a mesh file is given.
  std::vector<Segment> fractures;
  /// Optional MSH 2.2 file, relative paths resolved against the scenario file.
  std::string mesh_file;
  std::vector<int> fracture_tags;
  bool operator==(const GeometrySpec&) const = default;
};

struct OutputSpec {
  std::string directory = "output";
  /// Write VTK snapshots every n-th accepted step (0 disables them). The last
  /// step of every phase is always written when enabled.
  int vtk_every = 1;
  bool operator==(const OutputSpec&) const = default;
};

struct Scenario {
  std::string name = "scenario";
  GeometrySpec geometry;
  MaterialParams materials;
  SolverControls solver;
  /// Numerical contact parameter, 0 for the default.
  double contact_c = 0.0;
  std::vector<PhaseSpec> phases;
  OutputSpec output;
  bool operator==(const Scenario&) const = default;
};

/// Parses and validates a YAML scenario document. Throws ParseError (with the
/// line or key) for malformed input and ValidationError for values that are
/// out of range or inconsistent.
Scenario parse_scenario(const std::string& text);

/// Reads a scenario file; IoError if it cannot be read.
Scenario load_scenario(const std::filesystem::path& path);

/// Normalized document with every default spelled out. Parsing it yields the
/// same Scenario.
std::string dump_scenario(const Scenario& scenario);

/// Builds the grid of a scenario; `base_dir` resolves a relative mesh path.
MixedDimGrid build_grid(const Scenario& scenario, const std::filesystem::path& base_dir = {});

/// Boundary conditions of one phase on the external faces of `matrix`.
BoundaryConditionSet boundary_conditions(const PhaseSpec& phase, const SubdomainGrid& matrix);

std::vector<Phase> build_phases(const Scenario& scenario, const MixedDimGrid& grid);

/// File name of one snapshot: {name}_{dim}_{index}_{step:05}.vtk.
std::string vtk_file_name(const std::string& name, int dim, int index, int step);

/// Legacy ASCII VTK files for the matrix and every fracture subdomain. Matrix
/// cell data: p, T, |u|, u. Fracture cell data: p, T, aperture, regime
/// (0 open, 1 stick, 2 slide) and |[[u]]_t|. Returns the written paths.
std::vector<std::filesystem::path> write_vtk_snapshot(const Model& model, const State& state,
                                                      const RegimeMap& regimes,
                                                      const std::filesystem::path& directory,
                                                      const std::string& name, int step);

/// Header of the fracture time series.
inline constexpr const char* kTimeseriesHeader =
    "step,phase,time,dt,fracture,norm_jump_n,norm_jump_t,n_open,n_stick,n_slide,newton_iterations";

/// One row per step and fracture.
void write_fracture_timeseries(const std::vector<StepDiagnostics>& diagnostics,
                               const std::filesystem::path& path);

/// One JSON object (single line) describing a step.
std::string diagnostics_json(const StepDiagnostics& d);

/// Appends one JSON line per step to a file.
class DiagnosticsLog {
 public:
  explicit DiagnosticsLog(const std::filesystem::path& path);
  void write(const StepDiagnostics& d);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Formats a double so that reading it back gives the same value.
std::string format_double(double v);

}  // namespace fracthm
