#pragma once

// Verification suites: analytic oracles and property checks of the
// discretisation and the contact solver. Each suite returns one CheckResult
// with the measured quantity in `detail`.

#include "fracthm/solver.hpp"

#include <string>
#include <vector>

namespace fracthm::verify {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// n x n lattice of the unit square with interior nodes moved randomly by up
/// to `amplitude` cell sizes. Nodes on x = 1/2 only move vertically so that a
/// material interface there stays straight.
MixedDimGrid perturbed_grid(int n, unsigned seed, double amplitude = 0.25);

/// Triangles with equal sides on a parallelogram of n x n rhombi.
MixedDimGrid equilateral_grid(int n);

CheckResult mpfa_patch_test();
CheckResult mpsa_patch_test();
CheckResult two_point_equivalence();

struct TerzaghiSample {
  double dimensionless_time = 0.0;
  double relative_l2 = 0.0;
};

/// Excess pressure of a drained-top, impermeable-bottom column of height
/// `height` under a sudden load, at distance `depth` below the drained top.
double terzaghi_pressure(double depth, double height, double consolidation_coefficient, double time,
                         double initial_pressure, int terms = 400);

std::vector<TerzaghiSample> run_terzaghi(int cells_along_column = 50);
CheckResult terzaghi_consolidation();

struct ConductionSample {
  double time = 0.0;
  double front = 0.0;  // 2 sqrt(a t)
  double relative_l2 = 0.0;
};

std::vector<ConductionSample> run_conduction(int cells_along_strip = 100);
CheckResult transient_conduction();

/// Conservation audit of finished runs: every step's mass and energy
/// imbalance, relative to the larger of the step's own term magnitudes and
/// the largest of its phase, must not exceed `tolerance`.
CheckResult conservation_audit(const std::vector<std::pair<std::string, std::vector<StepDiagnostics>>>& runs,
                               double tolerance = 1e-8);

/// Converged single-fracture state under top displacement (shear, -compression).
struct ShearPoint {
  double shear = 0.0;
  int iterations = 0;
  KktReport kkt;
  int n_open = 0, n_stick = 0, n_slide = 0;
  /// Every Newton iteration assigned each fracture cell exactly one regime.
  bool partitioned = true;
  /// Largest |lambda_t| / (-F lambda_n) over closed cells.
  double max_friction_ratio = 0.0;
  std::vector<ContactCellState> cells;
  std::vector<Regime> regimes;
  Vec x;
};

struct ShearSweep {
  std::vector<ShearPoint> points;
  /// Index of the first load with a sliding cell, -1 if none.
  int first_slide = -1;
  /// Shear at which the bound is first reached, extrapolated from the last
  /// two all-stick loads (NaN if unavailable).
  double predicted_onset = 0.0;
};

ShearSweep run_shear_sweep(const std::vector<double>& shears, double compression = 1e-3, int resolution = 20,
                           double contact_c = 0.0, double tolerance = 1e-10);
CheckResult contact_kkt_sweep();

CheckResult slide_fixed_point(unsigned seed = 2024, int samples = 100);
CheckResult partition_and_c_invariance();

/// The oracle suites that do not need a scenario run (criteria 1-5 and 7-9).
std::vector<CheckResult> run_oracle_suites();

/// "PASS [id] name: detail (s)" or "FAIL ...".
std::string format_result(const CheckResult& r);

}  // namespace fracthm::verify
