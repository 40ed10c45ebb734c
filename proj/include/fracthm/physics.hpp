#pragma once

// Governing equations of the coupled problem on the mixed-dimensional grid.
//
// Unknowns per subdomain: displacement, pressure and temperature on the
// matrix; pressure, temperature and contact traction (local frame) on
// fractures; pressure and temperature on intersection points. Per interface:
// interface displacement (matrix-fracture only), fluid flux v, conductive
// flux w and advective flux s, all positive from the higher- to the
// lower-dimensional side and integrated over the interface cell.

#include "fracthm/ad.hpp"
#include "fracthm/contact.hpp"
#include "fracthm/fvm.hpp"
#include "fracthm/mdgrid.hpp"
#include "fracthm/params.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fracthm {

enum class Var {
  Displacement,
  Pressure,
  Temperature,
  ContactTraction,
  InterfaceDisplacement,
  InterfaceFlux,
  InterfaceConduction,
  InterfaceAdvection,
};

const char* to_string(Var v);

struct DofBlock {
  bool on_interface = false;
  int entity = 0;  // subdomain or interface index
  Var var = Var::Pressure;
  Index offset = 0;
  Index size = 0;

  std::string name() const;
};

/// Global ordering of unknowns: subdomains in grid order, then interfaces.
/// Equations use the same block layout as the unknowns.
class DofManager {
 public:
  DofManager() = default;
  explicit DofManager(const MixedDimGrid& grid);

  Index num_dofs() const { return num_dofs_; }
  const std::vector<DofBlock>& blocks() const { return blocks_; }
  const DofBlock& subdomain(int sd, Var v) const;
  const DofBlock& interface(int intf, Var v) const;

 private:
  const DofBlock& find(bool on_interface, int entity, Var v) const;
  std::vector<DofBlock> blocks_;
  Index num_dofs_ = 0;
};

struct ModelOptions {
  /// Numerical contact parameter; 0 selects 100 G / h.
  double contact_c = 0.0;
  MpfaOptions mpfa;
};

/// One time level.
struct State {
  Vec x;
  /// Integrated volumetric strain of the matrix cells as seen by the mass and
  /// energy balances (including the stabilisation part).
  Vec div_u;
  double time = 0.0;
};

/// Apertures and specific volumes per subdomain (empty on the matrix).
struct FractureGeometry {
  std::vector<Vec> aperture;
  std::vector<Vec> specific_volume;
};

/// Data held fixed during one Newton iteration.
struct FrozenData {
  std::vector<std::vector<Regime>> regimes;  // per subdomain, fractures only
  /// Contact data at the iterate the constraint coefficients are taken from.
  std::vector<std::vector<ContactCellState>> contact_iterate;
  UpwindDiscretization matrix_upwind;
  std::vector<UpwindDiscretization> fracture_upwind;  // per subdomain, fractures only
  std::vector<std::vector<bool>> upstream_high;       // per interface cell: v >= 0
};

/// Per-equation conservation audit of one converged step.
struct BalanceReport {
  double mass_imbalance = 0.0;    // |sum of accumulation + boundary outflow dt|
  double mass_scale = 0.0;        // sum of absolute values of all terms
  double energy_imbalance = 0.0;
  double energy_scale = 0.0;
  double interface_mismatch = 0.0;  // matrix-side minus fracture-side interface flux, relative

  double mass_relative() const { return mass_scale > 0 ? mass_imbalance / mass_scale : 0.0; }
  double energy_relative() const { return energy_scale > 0 ? energy_imbalance / energy_scale : 0.0; }
};

struct FractureOperators;
struct FlowOperators1d;
struct ModelKernels;

/// Discretised model for one set of external boundary conditions. External
/// boundary values are face-integrated (tractions and fluxes) or point values
/// (displacement, pressure, temperature).
class Model {
 public:
  Model(const MixedDimGrid& grid, const MaterialParams& params, const BoundaryConditionSet& external_bc,
        const ModelOptions& options = {});
  ~Model();
  Model(Model&&) noexcept;

  const MixedDimGrid& grid() const { return *grid_; }
  const MaterialParams& params() const { return params_; }
  const DofManager& dofs() const { return dofs_; }
  const BoundaryConditionSet& boundary() const { return bc_; }
  double contact_c() const { return contact_c_; }
  double traction_scale() const { return params_.shear_modulus; }

  const FluxDiscretization& flow_discretization() const { return flow_; }
  const FluxDiscretization& heat_discretization() const { return heat_; }
  const StressDiscretization& stress_discretization() const { return stress_; }

  /// Zero displacement, pressure and fluxes; reference temperature.
  State initial_state() const;

  /// Regimes, upwind directions and interface upstream sides at `x`.
  FrozenData freeze(const Vec& x, const State& prev) const;

  /// Local contact data of the cells of fracture subdomain `sd`.
  std::vector<ContactCellState> contact_states(int sd, const Vec& x, const State& prev) const;

  /// Aperture a = max(a_res, a0 - [[u]]_n) and specific volumes.
  FractureGeometry update_geometry(const Vec& x) const;

  /// Displacement jump per fracture cell in the local frame (normal, tangential).
  Vec jump_local(int sd, const Vec& x) const;

  /// Volumetric strain entering the balances, for storing at the end of a step.
  Vec matrix_div_u(const Vec& x) const;

  /// Face fluxes of the matrix (Darcy) at `x`.
  Vec matrix_darcy_flux(const Vec& x) const;

 private:
  friend class Evaluation;
  friend struct ModelKernels;
  const MixedDimGrid* grid_;
  MaterialParams params_;
  BoundaryConditionSet bc_;
  ModelOptions options_;
  DofManager dofs_;
  double contact_c_ = 0.0;
  FluxDiscretization flow_, heat_;
  StressDiscretization stress_;
  Vec mech_bc_const_, flow_bc_const_, heat_bc_const_, heat_dirichlet_;
  std::vector<SpMat> face_vec_prolong_;   // per matrix-fracture interface: 2 nf x 2 n
  std::vector<SpMat> face_vec_restrict_;  // transpose of the above
  std::vector<std::unique_ptr<FractureOperators>> frac_ops_;  // per subdomain
  std::vector<std::unique_ptr<FlowOperators1d>> flow1d_;      // per subdomain
};

/// All equations evaluated at one iterate with automatic differentiation.
class Evaluation {
 public:
  Evaluation(const Model& model, const Vec& x, const State& prev, double dt, const FrozenData& frozen);
  ~Evaluation();

  /// Momentum, mass and energy balances of the matrix.
  ad::AdArray assemble_subdomain_h() const;
  /// Mass and energy balances of a fracture or intersection subdomain.
  ad::AdArray assemble_subdomain_l(int sd) const;
  /// Flux laws of an interface (v, w, s rows).
  ad::AdArray assemble_interface_laws(int intf) const;
  /// Traction balance rows of a matrix-fracture interface.
  ad::AdArray traction_balance(int intf) const;
  /// Contact constraint rows of a fracture subdomain.
  ad::AdArray contact_equations(int sd) const;

  /// Every equation, in the block layout of the DofManager.
  ad::AdArray system() const;

  BalanceReport balance() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fracthm
