#pragma once

// Cell-centred finite-volume operators. All face quantities are integrated
// over the face and oriented along the stored face normal.

#include "fracthm/ad.hpp"
#include "fracthm/mdgrid.hpp"

#include <array>
#include <vector>

namespace fracthm {

enum class BcKind { Dirichlet, Neumann };

/// Boundary condition of a scalar field. Only faces with a single cell are
/// read. Neumann values are face-integrated outward fluxes; Dirichlet values
/// are face values of the field.
struct ScalarBc {
  std::vector<BcKind> kind;
  Vec value;

  static ScalarBc all(const SubdomainGrid& g, BcKind k, double v = 0.0);
};

/// Boundary condition of the displacement, one kind per Cartesian component.
/// Neumann values are face-integrated total tractions; values are stored as
/// [f0x, f0y, f1x, ...].
struct VectorBc {
  std::vector<std::array<BcKind, 2>> kind;
  Vec value;

  static VectorBc all(const SubdomainGrid& g, BcKind k);
};

struct BoundaryConditionSet {
  VectorBc mechanics;
  ScalarBc flow;
  ScalarBc heat;
};

/// Scalar diffusion: q = flux * p + bound_flux * bc.
struct FluxDiscretization {
  SpMat flux;                 // faces x cells
  SpMat bound_flux;           // faces x faces
  SpMat bound_pressure_cell;  // faces x cells, face value on boundary faces
  SpMat bound_pressure_face;  // faces x faces
};

/// Biot-type momentum discretisation. With s = alpha p + beta_s K (T - T0)
/// the isotropic scalar stress, the face traction force is
///   stress * u + bound_stress * u_b + scalar_stress * s
/// and the integrated volumetric strain of a cell is
///   div_u * u + bound_div_u * u_b + stabilization * s.
struct StressDiscretization {
  SpMat stress;         // 2 faces x 2 cells
  SpMat bound_stress;   // 2 faces x 2 faces
  SpMat scalar_stress;  // 2 faces x cells
  SpMat div_u;          // cells x 2 cells
  SpMat bound_div_u;    // cells x 2 faces
  SpMat stabilization;  // cells x cells
};

struct UpwindDiscretization {
  SpMat cell;   // faces x cells: upstream cell value
  SpMat bound;  // faces x faces: Dirichlet value on inflow boundary faces
};

struct MpfaOptions {
  double eta = 1.0 / 3.0;  // continuity point: 0 at the face centre, 1 at the node
};

/// MPFA-O on a 2D simplicial grid; two-point differences on a 1D grid.
/// `conductivity` holds one symmetric tensor per cell (in 1D only (0,0) is read).
FluxDiscretization mpfa_discretize(const SubdomainGrid& grid,
                                   const std::vector<Eigen::Matrix2d>& conductivity,
                                   const ScalarBc& bc, const MpfaOptions& options = {});

/// Two-point flux on a 2D grid, used as an independent reference.
FluxDiscretization tpfa_discretize(const SubdomainGrid& grid, const std::vector<double>& conductivity,
                                   const ScalarBc& bc);

/// MPSA with Biot coupling for an isotropic medium.
StressDiscretization mpsa_biot_discretize(const SubdomainGrid& grid, double lame_lambda,
                                          double shear_modulus, const VectorBc& bc,
                                          const MpfaOptions& options = {});

/// First-order upwinding of the advected quantity given face fluxes. Faces
/// tagged Fracture or Intersection get empty rows (their advective flux is
/// an interface unknown).
UpwindDiscretization upwind_discretize(const SubdomainGrid& grid, const Vec& face_fluxes,
                                       const ScalarBc& bc);

struct FaceQuantities {
  Vec fluxes;     // per face
  Vec tractions;  // 2 per face
};

/// Face fluxes and face traction forces from the cached operators.
/// `flow_bc` and `mech_bc` are full boundary value vectors, i.e. already
/// containing the interface contributions on fracture faces.
FaceQuantities reconstruct_face_quantities(const FluxDiscretization& flow,
                                           const StressDiscretization& mech,
                                           const SubdomainGrid& grid, const Vec& u, const Vec& p,
                                           const Vec& scalar_stress, const Vec& flow_bc,
                                           const Vec& mech_bc);

/// Column indices touched by a sparse row.
std::vector<int> row_pattern(const SpMat& m, int row);

}  // namespace fracthm
