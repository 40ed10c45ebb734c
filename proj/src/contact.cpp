#include "fracthm/contact.hpp"

#include "fracthm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fracthm {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Open: return "open";
    case Regime::Stick: return "stick";
    case Regime::Slide: return "slide";
  }
  return "unknown";
}

double friction_bound(double lambda_n, double jump_n, double friction, double c) {
  return friction * (-lambda_n + c * jump_n);
}

Regime classify(const ContactCellState& s, double friction, double c) {
  const double b = friction_bound(s.lambda_n, s.jump_n, friction, c);
  if (b <= 0.0) return Regime::Open;
  const double w = -s.lambda_t + c * s.delta_jump_t;
  return std::abs(w) < b ? Regime::Stick : Regime::Slide;
}

std::vector<Regime> classify_states(const std::vector<ContactCellState>& cells, double friction,
                                    double c) {
  std::vector<Regime> out;
  out.reserve(cells.size());
  for (const auto& s : cells) out.push_back(classify(s, friction, c));
  return out;
}

Regime linearization_regime(const ContactCellState& s, double friction, double c, double traction_scale) {
  Regime r = classify(s, friction, c);
  if (r == Regime::Slide && s.delta_jump_t * s.lambda_t > 0.0) r = Regime::Stick;
  if (r == Regime::Stick && friction_bound(s.lambda_n, s.jump_n, friction, c) <= 1e-12 * traction_scale)
    r = Regime::Open;
  return r;
}

ContactRows contact_rows(Regime regime, const ContactCellState& s, double friction, double c,
                         double traction_scale) {
  ContactRows rows;
  if (regime == Regime::Open) {
    rows.normal.coeff = {0, 0, 1, 0};
    rows.tangential.coeff = {0, 0, 0, 1};
    return rows;
  }
  // Closed cells: no normal jump.
  rows.normal.coeff = {1, 0, 0, 0};
  const double b = friction_bound(s.lambda_n, s.jump_n, friction, c);
  if (regime == Regime::Stick) {
    if (!(b > 1e-12 * traction_scale)) {
      std::ostringstream msg;
      msg << "stick constraint requested with friction bound " << b;
      throw Error(ErrorKind::DegenerateBound, msg.str());
    }
    // b * delta_jump_t = 0 with b > 0 frozen at the iterate.
    rows.tangential.coeff = {0, 1, 0, 0};
    return rows;
  }
  // Slide: lambda_t = v b with b = F (-lambda_n + c jump_n) taken at the new
  // iterate and the direction v opposing w = -lambda_t + c delta_jump_t frozen.
  const double w = -s.lambda_t + c * s.delta_jump_t;
  const double v = w >= 0.0 ? -1.0 : 1.0;
  rows.tangential.coeff = {-friction * c * v, 0, friction * v, 1};
  return rows;
}

ad::AdArray assemble_contact_equations(const std::vector<Regime>& regimes,
                                       const std::vector<ContactCellState>& iterate,
                                       const ad::AdArray& jump_n, const ad::AdArray& delta_jump_t,
                                       const ad::AdArray& lambda_n, const ad::AdArray& lambda_t,
                                       double friction, double c, double traction_scale) {
  const Index nc = static_cast<Index>(regimes.size());
  if (static_cast<Index>(iterate.size()) != nc || jump_n.size() != nc || delta_jump_t.size() != nc ||
      lambda_n.size() != nc || lambda_t.size() != nc)
    throw Error(ErrorKind::ShapeMismatch, "contact arrays disagree in length");
  // Row 2i holds the normal constraint of cell i, row 2i+1 the tangential one.
  std::array<std::vector<Triplet>, 4> trip;
  Vec rhs(2 * nc);
  for (Index i = 0; i < nc; ++i) {
    const ContactRows rows = contact_rows(regimes[i], iterate[i], friction, c, traction_scale);
    for (int k = 0; k < 4; ++k) {
      if (rows.normal.coeff[k] != 0.0) trip[k].emplace_back(2 * i, i, rows.normal.coeff[k]);
      if (rows.tangential.coeff[k] != 0.0) trip[k].emplace_back(2 * i + 1, i, rows.tangential.coeff[k]);
    }
    rhs[2 * i] = rows.normal.rhs;
    rhs[2 * i + 1] = rows.tangential.rhs;
  }
  std::array<SpMat, 4> m;
  for (int k = 0; k < 4; ++k) {
    m[k].resize(2 * nc, nc);
    m[k].setFromTriplets(trip[k].begin(), trip[k].end());
  }
  return m[0] * jump_n + m[1] * delta_jump_t + m[2] * lambda_n + m[3] * lambda_t - rhs;
}

ad::AdArray traction_balance_rows(const ad::AdArray& face_traction, const ad::AdArray& lambda_global,
                                  const ad::AdArray& fracture_pressure, const std::vector<Point>& normals,
                                  const std::vector<double>& measures, const std::vector<Side>& sides) {
  const Index n = static_cast<Index>(sides.size());
  if (face_traction.size() != 2 * n || lambda_global.size() != 2 * n || fracture_pressure.size() != n ||
      static_cast<Index>(normals.size()) != n || static_cast<Index>(measures.size()) != n)
    throw Error(ErrorKind::ShapeMismatch, "traction balance inputs disagree in length");
  // T_f -/+ |f| (lambda - p_l n) = 0 on the +/- side.
  std::vector<Triplet> tl, tp;
  for (Index i = 0; i < n; ++i) {
    const double sgn = sides[i] == Side::Plus ? -1.0 : 1.0;
    for (int d = 0; d < 2; ++d) {
      tl.emplace_back(2 * i + d, 2 * i + d, sgn * measures[i]);
      tp.emplace_back(2 * i + d, i, -sgn * measures[i] * normals[i][d]);
    }
  }
  SpMat ml(2 * n, 2 * n), mp(2 * n, n);
  ml.setFromTriplets(tl.begin(), tl.end());
  mp.setFromTriplets(tp.begin(), tp.end());
  return face_traction + ml * lambda_global + mp * fracture_pressure;
}

double KktReport::worst() const {
  return std::max({max_penetration, max_tension, max_complementarity, max_friction_excess,
                   max_stick_slip, max_slide_misalignment});
}

KktReport check_kkt(const std::vector<ContactCellState>& cells, const std::vector<Regime>& regimes,
                    double friction, double jump_scale, double traction_scale) {
  KktReport r;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& s = cells[i];
    const double jn = s.jump_n / jump_scale;
    const double ln = s.lambda_n / traction_scale;
    const double lt = s.lambda_t / traction_scale;
    const double du = s.delta_jump_t / jump_scale;
    r.max_penetration = std::max(r.max_penetration, jn);
    r.max_tension = std::max(r.max_tension, ln);
    r.max_complementarity = std::max(r.max_complementarity, std::abs(ln * jn));
    r.max_friction_excess = std::max(r.max_friction_excess, std::abs(lt) + friction * ln);
    if (regimes[i] == Regime::Stick) r.max_stick_slip = std::max(r.max_stick_slip, std::abs(du));
    if (regimes[i] == Regime::Slide && du != 0.0) {
      const double sgn = du > 0 ? 1.0 : -1.0;
      r.max_slide_misalignment = std::max(r.max_slide_misalignment, std::abs(lt - friction * ln * sgn));
    }
  }
  return r;
}

}  // namespace fracthm
