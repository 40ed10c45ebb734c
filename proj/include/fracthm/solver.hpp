#pragma once

// Semismooth Newton for one implicit Euler step and the phase-driven time loop.

#include "fracthm/physics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fracthm {

struct SolverControls {
  double tolerance = 1e-9;
  int max_newton = 50;
  /// Number of times a failed step may be halved before giving up.
  int max_dt_cuts = 4;
  /// Characteristic magnitudes of the unknowns used to scale norms.
  double length_scale = 1.0;  // displacements scale as 1e-6 of this
  double pressure_scale = 1e6;
  double temperature_scale = 1.0;

  /// Throws ValidationError for non-positive tolerances or scales.
  void validate() const;

  bool operator==(const SolverControls&) const = default;
};

/// Scaled norms of one unknown block and its equations.
struct BlockNorm {
  std::string block;
  double residual = 0.0;
  double increment = 0.0;
};

struct ConvergenceReport {
  bool converged = false;
  /// Name of the block with the largest scaled residual or increment.
  std::string worst_block;
  double worst_value = 0.0;
  double max_residual = 0.0;
  double max_increment = 0.0;
};

/// Converged iff every block's residual and increment are <= tolerance.
ConvergenceReport check_convergence(const std::vector<BlockNorm>& norms, double tolerance);

/// Jacobian and residual in the DofManager layout.
struct BlockSystem {
  SpMat jacobian;
  Vec residual;
};

BlockSystem assemble_system(const Model& model, const Vec& x, const State& prev, double dt,
                            const FrozenData& frozen);

/// Characteristic magnitude of every unknown.
Vec unknown_scales(const Model& model, const SolverControls& controls);

/// Solves J dx = -r after row and column equilibration.
Vec solve_linear(const BlockSystem& system, const Vec& column_scale);

/// Per-block scaled norms of a residual and an increment. Interface flux
/// blocks contribute their residual only.
std::vector<BlockNorm> block_norms(const Model& model, const BlockSystem& system, const Vec& increment,
                                   const Vec& column_scale);

using RegimeMap = std::vector<std::vector<Regime>>;  // per subdomain

struct StepResult {
  State state;
  /// Newton updates applied before convergence was detected.
  int iterations = 0;
  ConvergenceReport convergence;
  /// Regimes used at every iteration, the last one being the converged set.
  std::vector<RegimeMap> regime_history;
  BalanceReport balance;
};

/// One implicit Euler step from `prev`. Throws NonConvergenceError tagged
/// with `step` when the iteration limit is hit or the iterate degenerates.
StepResult newton_solve_timestep(const Model& model, const State& prev, double dt,
                                 const SolverControls& controls, int step = 0);

/// A stretch of time with fixed boundary data.
struct Phase {
  std::string name;
  double start = 0.0;
  double end = 0.0;
  double dt = 0.0;
  BoundaryConditionSet bc;
};

struct FractureDiagnostics {
  int fracture_id = 0;
  double norm_jump_n = 0.0;
  double norm_jump_t = 0.0;
  int n_open = 0, n_stick = 0, n_slide = 0;
};

struct StepDiagnostics {
  int step = 0;
  int phase = 0;
  double time = 0.0;
  double dt = 0.0;
  int newton_iterations = 0;
  int dt_cuts = 0;
  std::vector<FractureDiagnostics> fractures;  // ordered by fracture id
  BalanceReport balance;
  ConvergenceReport convergence;
  RegimeMap regimes;
};

/// Per-fracture norms and regime counts. Branches of one fracture are
/// combined; norms are Euclidean over the fracture cells.
std::vector<FractureDiagnostics> fracture_diagnostics(const Model& model, const State& state,
                                                      const RegimeMap& regimes);

/// Called after every accepted step with the model of the current phase.
using StepObserver = std::function<void(const Model&, const State&, const StepDiagnostics&)>;

/// Runs the phases in order, rebuilding the model at each phase start. A
/// failed step is retried as two half steps, recursively up to
/// `controls.max_dt_cuts` levels.
std::vector<StepDiagnostics> run_simulation(const MixedDimGrid& grid, const MaterialParams& params,
                                            const std::vector<Phase>& phases, const SolverControls& controls,
                                            const ModelOptions& options = {}, const StepObserver& observer = {},
                                            State* final_state = nullptr);

}  // namespace fracthm
