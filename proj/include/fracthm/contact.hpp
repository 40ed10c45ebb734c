#pragma once

// Frictional contact on fracture cells. Quantities are expressed in the local
// frame of each 1D cell: normal component first, tangential second. The
// displacement jump is admissible for [[u]]_n <= 0 and the contact traction
// for lambda_n <= 0.

#include "fracthm/ad.hpp"
#include "fracthm/mdgrid.hpp"

#include <array>
#include <vector>

namespace fracthm {

enum class Regime { Open = 0, Stick = 1, Slide = 2 };

const char* to_string(Regime r);

/// Local contact data of one fracture cell at a Newton iterate.
struct ContactCellState {
  double lambda_n = 0.0;
  double lambda_t = 0.0;
  double jump_n = 0.0;
  double jump_t = 0.0;
  /// Tangential jump increment over the current time step.
  double delta_jump_t = 0.0;
};

/// b = F (-lambda_n + c jump_n).
double friction_bound(double lambda_n, double jump_n, double friction, double c);

Regime classify(const ContactCellState& s, double friction, double c);
std::vector<Regime> classify_states(const std::vector<ContactCellState>& cells, double friction,
                                    double c);

/// Regime used to linearise a cell at the iterate `s`. Starts from
/// classify() and then
///  - turns Stick into Open when b <= 1e-12 * traction_scale, and
///  - turns Slide into Stick when the slip increment points against
///    -lambda_t, so a reversal of the slip direction is taken as stick.
/// Neither rule applies at a state that satisfies the Coulomb law, so a
/// converged active set is still the classify() partition.
Regime linearization_regime(const ContactCellState& s, double friction, double c, double traction_scale);

/// One linearised constraint row: coefficients of
/// (jump_n, delta_jump_t, lambda_n, lambda_t) at the next iterate, and the
/// right-hand side.
struct ContactRow {
  std::array<double, 4> coeff{};
  double rhs = 0.0;

  double residual(const ContactCellState& s) const {
    return coeff[0] * s.jump_n + coeff[1] * s.delta_jump_t + coeff[2] * s.lambda_n +
           coeff[3] * s.lambda_t - rhs;
  }
};

struct ContactRows {
  ContactRow normal;
  ContactRow tangential;
};

/// Constraint rows of one cell for a fixed regime, with coefficients taken
/// from the iterate `s`. `traction_scale` sets the threshold below which a
/// positive friction bound counts as degenerate.
ContactRows contact_rows(Regime regime, const ContactCellState& s, double friction, double c,
                         double traction_scale);

/// Residual of the constraint rows of all cells of one fracture, two rows per
/// cell (normal, tangential). Inputs are AD arrays of the next iterate; the
/// coefficients come from `iterate`.
ad::AdArray assemble_contact_equations(const std::vector<Regime>& regimes,
                                       const std::vector<ContactCellState>& iterate,
                                       const ad::AdArray& jump_n, const ad::AdArray& delta_jump_t,
                                       const ad::AdArray& lambda_n, const ad::AdArray& lambda_t,
                                       double friction, double c, double traction_scale);

/// Traction balance on the interface cells of one fracture. For interface
/// cell i on side +/- with fracture normal n_i and measure |f_i|:
///   T_i -/+ |f_i| (lambda_i - p_l n_i) = 0,
/// where T_i is the matrix face traction force (2 per cell), lambda_i the
/// contact traction in Cartesian components and p_l the fracture pressure,
/// all restricted to interface cells.
ad::AdArray traction_balance_rows(const ad::AdArray& face_traction, const ad::AdArray& lambda_global,
                                  const ad::AdArray& fracture_pressure, const std::vector<Point>& normals,
                                  const std::vector<double>& measures, const std::vector<Side>& sides);

/// Checks of the complementarity and friction conditions on a converged
/// state. All values are dimensionless: jumps are divided by `jump_scale`,
/// tractions by `traction_scale`.
struct KktReport {
  double max_penetration = 0.0;       // max(jump_n, 0)
  double max_tension = 0.0;           // max(lambda_n, 0)
  double max_complementarity = 0.0;   // |lambda_n jump_n|
  double max_friction_excess = 0.0;   // max(|lambda_t| + F lambda_n, 0)
  double max_stick_slip = 0.0;        // |delta_jump_t| on stick cells
  double max_slide_misalignment = 0.0;  // |lambda_t + F lambda_n sign(delta_jump_t)| on slide cells

  double worst() const;
};

KktReport check_kkt(const std::vector<ContactCellState>& cells, const std::vector<Regime>& regimes,
                    double friction, double jump_scale, double traction_scale);

}  // namespace fracthm
