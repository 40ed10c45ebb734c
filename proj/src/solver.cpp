#include "fracthm/solver.hpp"

#include "fracthm/errors.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace fracthm {

void SolverControls::validate() const {
  auto require = [](bool ok, const char* field) {
    if (!ok) throw Error(ErrorKind::ValidationError, std::string("solver.") + field + " must be positive");
  };
  require(tolerance > 0, "tolerance");
  require(max_newton >= 1, "max_newton");
  require(max_dt_cuts >= 0, "max_dt_cuts");
  require(length_scale > 0, "length_scale");
  require(pressure_scale > 0, "pressure_scale");
  require(temperature_scale > 0, "temperature_scale");
}

ConvergenceReport check_convergence(const std::vector<BlockNorm>& norms, double tolerance) {
  ConvergenceReport r;
  r.converged = true;
  for (const auto& n : norms) {
    r.max_residual = std::max(r.max_residual, n.residual);
    r.max_increment = std::max(r.max_increment, n.increment);
    // A NaN norm counts as the worst possible value.
    double v = std::max(n.residual, n.increment);
    if (std::isnan(n.residual) || std::isnan(n.increment)) v = std::numeric_limits<double>::infinity();
    if (r.worst_block.empty() || v > r.worst_value) {
      r.worst_block = n.block;
      r.worst_value = v;
    }
    if (!(n.residual <= tolerance && n.increment <= tolerance)) r.converged = false;
  }
  return r;
}

BlockSystem assemble_system(const Model& model, const Vec& x, const State& prev, double dt,
                            const FrozenData& frozen) {
  const ad::AdArray sys = Evaluation(model, x, prev, dt, frozen).system();
  return {sys.jac(), sys.val()};
}

Vec unknown_scales(const Model& model, const SolverControls& c) {
  const auto& prm = model.params();
  // Interface fluxes are scaled like matrix fluxes driven by the
  // characteristic pressure and temperature differences.
  const double v_scale = prm.permeability / prm.viscosity * c.pressure_scale;
  const double w_scale = prm.thermal_conductivity * c.temperature_scale;
  const double s_scale = prm.fluid_density * prm.fluid_heat_capacity * v_scale * c.temperature_scale;
  Vec s(model.dofs().num_dofs());
  for (const auto& b : model.dofs().blocks()) {
    double v = 1.0;
    switch (b.var) {
      case Var::Displacement:
      case Var::InterfaceDisplacement: v = 1e-6 * c.length_scale; break;
      case Var::Pressure:
      case Var::ContactTraction: v = c.pressure_scale; break;
      case Var::Temperature: v = c.temperature_scale; break;
      case Var::InterfaceFlux: v = v_scale; break;
      case Var::InterfaceConduction: v = w_scale; break;
      case Var::InterfaceAdvection: v = s_scale; break;
    }
    s.segment(b.offset, b.size).setConstant(v > 0 ? v : 1.0);
  }
  return s;
}

namespace {

Vec row_scales(const SpMat& jac, const Vec& column_scale) {
  const SpMat a = jac.cwiseAbs();
  return a * column_scale;
}

}  // namespace

Vec solve_linear(const BlockSystem& system, const Vec& column_scale) {
  const Vec rs = row_scales(system.jacobian, column_scale);
  Vec dr(rs.size());
  for (Index i = 0; i < rs.size(); ++i) {
    if (!(rs[i] > 0) || !std::isfinite(rs[i])) {
      std::ostringstream msg;
      msg << "equation " << i << " has an empty or non-finite row";
      throw Error(ErrorKind::LinearSolveFailure, msg.str());
    }
    dr[i] = 1.0 / rs[i];
  }
  // The factorisation works on column-major storage.
  using ColMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  ColMat a = dr.asDiagonal() * system.jacobian * column_scale.asDiagonal();
  a.prune(0.0);
  a.makeCompressed();
  Eigen::SparseLU<ColMat, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, "sparse LU factorisation failed");
  const Vec y = lu.solve(Vec(-dr.cwiseProduct(system.residual)));
  if (lu.info() != Eigen::Success || !y.allFinite())
    throw Error(ErrorKind::LinearSolveFailure, "sparse LU solve produced non-finite values");
  return column_scale.cwiseProduct(y);
}

std::vector<BlockNorm> block_norms(const Model& model, const BlockSystem& system, const Vec& increment,
                                   const Vec& column_scale) {
  const Vec rs = row_scales(system.jacobian, column_scale);
  std::vector<BlockNorm> out;
  for (const auto& b : model.dofs().blocks()) {
    BlockNorm n;
    n.block = b.name();
    for (Index i = b.offset; i < b.offset + b.size; ++i) {
      const double r = std::abs(system.residual[i]);
      const double scaled = rs[i] > 0 ? r / rs[i] : (r > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      n.residual = std::max(n.residual, scaled);
    }
    const bool algebraic = b.var == Var::InterfaceFlux || b.var == Var::InterfaceConduction ||
                           b.var == Var::InterfaceAdvection;
    if (!algebraic)
      for (Index i = b.offset; i < b.offset + b.size; ++i)
        n.increment = std::max(n.increment, std::abs(increment[i]) / column_scale[i]);
    out.push_back(std::move(n));
  }
  return out;
}

StepResult newton_solve_timestep(const Model& model, const State& prev, double dt, const SolverControls& controls,
                                 int step) {
  controls.validate();
  const Vec scales = unknown_scales(model, controls);
  StepResult res;
  Vec x = prev.x;
  // Iteration k assembles at x_k and solves for the correction; convergence is
  // declared on the residual at x_k, the correction from x_k and an active set
  // equal to the previous iteration's. k - 1 updates have been applied then.
  for (int k = 1; k <= controls.max_newton + 1; ++k) {
    try {
      FrozenData fz = model.freeze(x, prev);
      res.regime_history.push_back(fz.regimes);
      const BlockSystem sys = assemble_system(model, x, prev, dt, fz);
      const Vec dx = solve_linear(sys, scales);
      res.convergence = check_convergence(block_norms(model, sys, dx, scales), controls.tolerance);
      const bool stable = k == 1 || res.regime_history[k - 1] == res.regime_history[k - 2];
      if (res.convergence.converged && stable) {
        // The final correction is below tolerance and is not counted; applying
        // it still removes the remaining linear part of the residual, so the
        // balances close to round-off instead of to the scaled tolerance.
        x += dx;
        res.iterations = k - 1;
        res.state.x = x;
        res.state.div_u = model.matrix_div_u(x);
        res.state.time = prev.time + dt;
        res.balance = Evaluation(model, x, prev, dt, fz).balance();
        return res;
      }
      x += dx;
    } catch (const NonConvergenceError&) {
      throw;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::LinearSolveFailure || e.kind() == ErrorKind::NonFiniteResidual ||
          e.kind() == ErrorKind::DegenerateBound) {
        std::ostringstream msg;
        msg << "step " << step << ", Newton iteration " << k << ": " << e.what();
        throw NonConvergenceError(step, msg.str());
      }
      throw;
    }
  }
  std::ostringstream msg;
  msg << "step " << step << ": no convergence in " << controls.max_newton << " Newton iterations (worst block "
      << res.convergence.worst_block << ", scaled value " << res.convergence.worst_value << ")";
  throw NonConvergenceError(step, msg.str());
}

std::vector<FractureDiagnostics> fracture_diagnostics(const Model& model, const State& state,
                                                      const RegimeMap& regimes) {
  const auto& grid = model.grid();
  std::map<int, FractureDiagnostics> by_id;
  for (int sd : grid.fracture_subdomains()) {
    const int id = grid.subdomains[sd].fracture_id;
    auto& d = by_id[id];
    d.fracture_id = id;
    const Vec j = model.jump_local(sd, state.x);
    for (Index i = 0; i < j.size() / 2; ++i) {
      d.norm_jump_n += j[2 * i] * j[2 * i];
      d.norm_jump_t += j[2 * i + 1] * j[2 * i + 1];
    }
    if (sd < static_cast<int>(regimes.size()))
      for (Regime r : regimes[sd]) {
        if (r == Regime::Open) ++d.n_open;
        else if (r == Regime::Stick) ++d.n_stick;
        else ++d.n_slide;
      }
  }
  std::vector<FractureDiagnostics> out;
  for (auto& [id, d] : by_id) {
    d.norm_jump_n = std::sqrt(d.norm_jump_n);
    d.norm_jump_t = std::sqrt(d.norm_jump_t);
    out.push_back(d);
  }
  return out;
}

namespace {

struct TimeLoop {
  const Model& model;
  const SolverControls& controls;
  const StepObserver& observer;
  std::vector<StepDiagnostics>& diags;
  int phase = 0;
  int step = 0;

  void advance(State& state, double dt, int depth) {
    StepResult res;
    try {
      res = newton_solve_timestep(model, state, dt, controls, step + 1);
    } catch (const NonConvergenceError& e) {
      if (depth >= controls.max_dt_cuts) {
        std::ostringstream msg;
        msg << e.what() << " (after " << depth << " time step cuts)";
        throw NonConvergenceError(step + 1, msg.str());
      }
      advance(state, 0.5 * dt, depth + 1);
      advance(state, 0.5 * dt, depth + 1);
      return;
    }
    state = std::move(res.state);
    StepDiagnostics d;
    d.step = ++step;
    d.phase = phase;
    d.time = state.time;
    d.dt = dt;
    d.newton_iterations = res.iterations;
    d.dt_cuts = depth;
    d.regimes = res.regime_history.back();
    d.fractures = fracture_diagnostics(model, state, d.regimes);
    d.balance = res.balance;
    d.convergence = res.convergence;
    diags.push_back(d);
    if (observer) observer(model, state, diags.back());
  }
};

}  // namespace

std::vector<StepDiagnostics> run_simulation(const MixedDimGrid& grid, const MaterialParams& params,
                                            const std::vector<Phase>& phases, const SolverControls& controls,
                                            const ModelOptions& options, const StepObserver& observer,
                                            State* final_state) {
  controls.validate();
  if (phases.empty()) throw Error(ErrorKind::ValidationError, "no phases to run");
  std::vector<StepDiagnostics> diags;
  State state;
  int step = 0;
  for (std::size_t ip = 0; ip < phases.size(); ++ip) {
    const Phase& ph = phases[ip];
    if (!(ph.dt > 0) || !(ph.end > ph.start))
      throw Error(ErrorKind::ValidationError, "phase '" + ph.name + "' needs end > start and dt > 0");
    const Model model(grid, params, ph.bc, options);
    if (ip == 0) {
      state = model.initial_state();
      state.time = ph.start;
    }
    TimeLoop loop{model, controls, observer, diags, static_cast<int>(ip), step};
    const double span = ph.end - ph.start;
    double t = ph.start;
    while (ph.end - t > 1e-12 * span) {
      double dt = std::min(ph.dt, ph.end - t);
      // Absorb a sliver left by round-off into the current step.
      if (ph.end - (t + dt) < 1e-9 * ph.dt) dt = ph.end - t;
      loop.advance(state, dt, 0);
      t = state.time;
    }
    state.time = ph.end;
    step = loop.step;
  }
  if (final_state) *final_state = state;
  return diags;
}

}  // namespace fracthm
