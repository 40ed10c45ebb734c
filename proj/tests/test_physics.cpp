#include "doctest.h"

#include "fracthm/errors.hpp"
#include "fracthm/physics.hpp"

#include <cmath>
#include <random>

using namespace fracthm;

namespace {

BoundaryConditionSet clamped(const SubdomainGrid& g, const MaterialParams& prm, double p = 0.0) {
  return {VectorBc::all(g, BcKind::Dirichlet), ScalarBc::all(g, BcKind::Dirichlet, p),
          ScalarBc::all(g, BcKind::Dirichlet, prm.reference_temperature)};
}

MixedDimGrid crossing_grid() {
  FractureNetwork net;
  net.domain = Box{};
  net.segments = {{Point(0.25, 0.5), Point(0.75, 0.5)}, {Point(0.5, 0.25), Point(0.5, 0.75)}};
  return build_structured(net.domain, 8, 8, net);
}

MixedDimGrid horizontal_grid(int nx, int ny) {
  FractureNetwork net;
  net.domain = Box{};
  net.segments = {{Point(0.0, 0.5), Point(1.0, 0.5)}};
  return build_structured(net.domain, nx, ny, net);
}

void set_block(Vec& x, const DofBlock& b, const Vec& v) { x.segment(b.offset, b.size) = v; }

Vec residual(const Model& m, const Vec& x, const State& prev, double dt) {
  const FrozenData fz = m.freeze(x, prev);
  return Evaluation(m, x, prev, dt, fz).system().val();
}

// A state whose entries have the magnitudes of the respective unknowns.
Vec random_state(const Model& m, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto& prm = m.params();
  Vec x(m.dofs().num_dofs());
  for (const auto& b : m.dofs().blocks()) {
    double scale = 1.0, shift = 0.0;
    switch (b.var) {
      case Var::Displacement:
      case Var::InterfaceDisplacement: scale = 2e-5; break;
      case Var::Pressure: scale = 1e5; break;
      case Var::Temperature: scale = 10.0; shift = prm.reference_temperature; break;
      case Var::ContactTraction: scale = 1e5; break;
      case Var::InterfaceFlux: scale = 1e-9; break;
      case Var::InterfaceConduction: scale = 1e-2; break;
      case Var::InterfaceAdvection: scale = 1e-2; break;
    }
    for (Index i = 0; i < b.size; ++i) x[b.offset + i] = shift + scale * u(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("unknown layout") {
  const MixedDimGrid g = crossing_grid();
  const MaterialParams prm;
  const Model m(g, prm, clamped(g.matrix(), prm));
  const auto& d = m.dofs();
  Index expected = 0;
  for (const auto& sd : g.subdomains) expected += (sd.dim == 2 ? 4 : sd.dim == 1 ? 4 : 2) * sd.num_cells();
  for (const auto& i : g.interfaces) expected += (i.high_dim == 2 ? 5 : 3) * i.num_cells();
  CHECK(d.num_dofs() == expected);
  Index next = 0;
  for (const auto& b : d.blocks()) {
    CHECK(b.offset == next);
    next += b.size;
  }
  CHECK(d.blocks().front().var == Var::Displacement);
  CHECK(d.subdomain(1, Var::ContactTraction).size == 2 * g.subdomains[1].num_cells());
  CHECK_THROWS_AS(d.subdomain(0, Var::ContactTraction), Error);
  // The residual uses the same layout.
  const State s = m.initial_state();
  CHECK(residual(m, s.x, s, 1.0).size() == expected);
}

TEST_CASE("zero state gives zero residual") {
  const MixedDimGrid g = crossing_grid();
  const MaterialParams prm;
  const Model m(g, prm, clamped(g.matrix(), prm));
  const State s = m.initial_state();
  const Vec r = residual(m, s.x, s, 100.0);
  // Conduction of the uniform reference temperature cancels up to round-off.
  CHECK(r.cwiseAbs().maxCoeff() <= 1e-12 * prm.thermal_conductivity * prm.reference_temperature * 100.0);
  const auto fz = m.freeze(s.x, s);
  for (int sd : g.fracture_subdomains())
    for (Regime reg : fz.regimes[sd]) CHECK(reg == Regime::Open);
}

TEST_CASE("uniform pressure with matching fracture pressure") {
  // Total stress -p I in the matrix (alpha = 1) balanced by the fluid in the
  // fracture: zero contact traction, zero momentum residual, no flow.
  const MixedDimGrid g = horizontal_grid(6, 6);
  MaterialParams prm;
  prm.biot_alpha = 1.0;
  const double P = 2e6;
  const Model m(g, prm, clamped(g.matrix(), prm, P));
  State s = m.initial_state();
  for (const auto& b : m.dofs().blocks())
    if (b.var == Var::Pressure) s.x.segment(b.offset, b.size).setConstant(P);
  const Vec r = residual(m, s.x, s, 1.0);
  CHECK(r.cwiseAbs().maxCoeff() <= 1e-9 * P);
}

TEST_CASE("Jacobian matches finite differences") {
  const MixedDimGrid g = crossing_grid();
  MaterialParams prm;
  prm.interface_permeability = 1e-10;
  BoundaryConditionSet bc = clamped(g.matrix(), prm);
  // Mixed boundary data: traction and flux on the top, values elsewhere.
  const auto& mg = g.matrix();
  for (int f = 0; f < mg.num_faces(); ++f) {
    if (mg.face_sides[f] == BoundarySide::Top) {
      bc.mechanics.kind[f] = {BcKind::Neumann, BcKind::Neumann};
      bc.mechanics.value.segment<2>(2 * f) = Eigen::Vector2d(1e5, -3e5) * mg.face_areas[f];
      bc.flow.kind[f] = BcKind::Neumann;
      bc.flow.value[f] = 1e-8 * mg.face_areas[f];
    }
    if (mg.face_sides[f] == BoundarySide::Left) bc.heat.value[f] = prm.reference_temperature + 20;
  }
  const Model m(g, prm, bc);
  std::mt19937 rng(3);
  State prev = m.initial_state();
  prev.x = random_state(m, rng);
  prev.div_u = m.matrix_div_u(prev.x);
  const Vec x = random_state(m, rng);
  const double dt = 50.0;
  const FrozenData fz = m.freeze(x, prev);
  const ad::AdArray sys = Evaluation(m, x, prev, dt, fz).system();

  // Direction with per-variable magnitudes.
  const Vec dir = random_state(m, rng) - m.initial_state().x;
  const double h = 1e-4;
  const Vec rp = Evaluation(m, x + h * dir, prev, dt, fz).system().val();
  const Vec rm = Evaluation(m, x - h * dir, prev, dt, fz).system().val();
  const Vec fd = (rp - rm) / (2 * h);
  const Vec jd = sys.jac() * dir;
  const SpMat absj = sys.jac().cwiseAbs();
  const Vec row_scale = absj * dir.cwiseAbs();
  int bad = 0;
  for (Index i = 0; i < fd.size(); ++i) {
    const double tol = 1e-6 * row_scale[i] + 1e-300;
    if (std::abs(fd[i] - jd[i]) > tol) ++bad;
  }
  CHECK(bad == 0);
  CHECK(row_scale.minCoeff() > 0.0);
}

TEST_CASE("interface flux law example") {
  // kappa_j = 2, fracture pressure 1, matrix trace 3, unit interface measure:
  // the law demands v = 4 from the matrix into the fracture.
  const MixedDimGrid g = horizontal_grid(1, 2);
  MaterialParams prm;
  prm.interface_permeability = 2.0;
  const Model m(g, prm, clamped(g.matrix(), prm, 3.0));
  State s = m.initial_state();
  set_block(s.x, m.dofs().subdomain(0, Var::Pressure), Vec::Constant(g.matrix().num_cells(), 3.0));
  set_block(s.x, m.dofs().subdomain(1, Var::Pressure), Vec::Constant(1, 1.0));
  const int intf = g.interface_of_fracture(1);
  REQUIRE(g.interfaces[intf].measures[0] == doctest::Approx(1.0));
  const DofBlock& vb = m.dofs().interface(intf, Var::InterfaceFlux);
  const FrozenData fz = m.freeze(s.x, s);
  const ad::AdArray law = Evaluation(m, s.x, s, 1.0, fz).assemble_interface_laws(intf);
  const Index n = g.interfaces[intf].num_cells();
  for (Index k = 0; k < n; ++k) {
    CHECK(law.val()[k] == doctest::Approx(-4.0));
    // d(row)/dv = 1 at fixed traces; the trace also reacts to v through the
    // Neumann condition on the fracture face.
    CHECK(law.jac().coeff(k, vb.offset + k) > 1.0);
  }
  // v = 0 gives s = 0 whatever the temperatures.
  for (Index k = 0; k < n; ++k) CHECK(law.val()[2 * n + k] == 0.0);
  // Matched pressures give no driving force.
  set_block(s.x, m.dofs().subdomain(1, Var::Pressure), Vec::Constant(1, 3.0));
  const ad::AdArray law2 = Evaluation(m, s.x, s, 1.0, m.freeze(s.x, s)).assemble_interface_laws(intf);
  CHECK(law2.val().head(n).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("geometry") {
  const MaterialParams prm;
  SUBCASE("aperture of a fracture") {
    const MixedDimGrid g = horizontal_grid(2, 2);
    const Model m(g, prm, clamped(g.matrix(), prm));
    State s = m.initial_state();
    CHECK(m.update_geometry(s.x).aperture[1].minCoeff() == doctest::Approx(prm.initial_aperture));
    // Displace the + side (below the fracture, normal pointing up) downwards:
    // the surfaces separate by 1e-3.
    const int intf = g.interface_of_fracture(1);
    const auto& I = g.interfaces[intf];
    const DofBlock& ub = m.dofs().interface(intf, Var::InterfaceDisplacement);
    for (int k = 0; k < I.num_cells(); ++k) {
      const Point n = g.subdomains[1].cell_normals[I.low_cells[k]];
      const Point d = (I.sides[k] == Side::Plus ? -1e-3 : 0.0) * n;
      s.x.segment<2>(ub.offset + 2 * k) = d;
    }
    const auto geo = m.update_geometry(s.x);
    CHECK(geo.aperture[1].minCoeff() == doctest::Approx(1.1e-3));
    CHECK(geo.aperture[1].maxCoeff() == doctest::Approx(1.1e-3));
    CHECK(geo.specific_volume[1].maxCoeff() == doctest::Approx(1.1e-3));
    const Vec j = m.jump_local(1, s.x);
    CHECK(j[0] == doctest::Approx(-1e-3));
    // Closing beyond contact is floored at the residual aperture.
    s.x.segment(ub.offset, ub.size) *= -1.0;
    CHECK(m.update_geometry(s.x).aperture[1].minCoeff() == doctest::Approx(prm.residual_aperture));
  }
  SUBCASE("intersection: mean and product") {
    const MixedDimGrid g = crossing_grid();
    const Model m(g, prm, clamped(g.matrix(), prm));
    State s = m.initial_state();
    // Fracture 0 opens to 2e-3 and fracture 1 to 4e-3.
    for (int sd : g.fracture_subdomains()) {
      const double target = g.subdomains[sd].fracture_id == 0 ? 2e-3 : 4e-3;
      const int intf = g.interface_of_fracture(sd);
      const auto& I = g.interfaces[intf];
      const DofBlock& ub = m.dofs().interface(intf, Var::InterfaceDisplacement);
      for (int k = 0; k < I.num_cells(); ++k) {
        const Point n = g.subdomains[sd].cell_normals[I.low_cells[k]];
        if (I.sides[k] == Side::Plus)
          s.x.segment<2>(ub.offset + 2 * k) = -(target - prm.initial_aperture) * n;
      }
    }
    const auto geo = m.update_geometry(s.x);
    const auto pts = g.intersection_subdomains();
    REQUIRE(pts.size() == 1);
    CHECK(geo.aperture[pts[0]][0] == doctest::Approx(3e-3));
    CHECK(geo.specific_volume[pts[0]][0] == doctest::Approx(8e-6));
  }
}

TEST_CASE("opening fracture at fixed pressure and temperature") {
  // Two-cell fracture; the mass residual of each cell is |c| (V - V_prev).
  const MixedDimGrid g = horizontal_grid(2, 2);
  const MaterialParams prm;
  const Model m(g, prm, clamped(g.matrix(), prm));
  const State prev = m.initial_state();
  State s = prev;
  const int intf = g.interface_of_fracture(1);
  const auto& I = g.interfaces[intf];
  const DofBlock& ub = m.dofs().interface(intf, Var::InterfaceDisplacement);
  const double open[2] = {2e-4, 5e-4};
  for (int k = 0; k < I.num_cells(); ++k) {
    const int c = I.low_cells[k];
    if (I.sides[k] == Side::Plus) s.x.segment<2>(ub.offset + 2 * k) = -open[c] * g.subdomains[1].cell_normals[c];
  }
  const FrozenData fz = m.freeze(s.x, prev);
  const Vec r = Evaluation(m, s.x, prev, 10.0, fz).assemble_subdomain_l(1).val();
  const auto& fg = g.subdomains[1];
  REQUIRE(fg.num_cells() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(r[c] == doctest::Approx(fg.cell_volumes[c] * open[c]));
    CHECK(r[2 + c] == doctest::Approx(0.0));
  }
}

TEST_CASE("conservation audit equals the sum of balance rows") {
  const MixedDimGrid g = crossing_grid();
  const MaterialParams prm;
  BoundaryConditionSet bc = clamped(g.matrix(), prm);
  const auto& mg = g.matrix();
  for (int f = 0; f < mg.num_faces(); ++f)
    if (mg.face_sides[f] == BoundarySide::Right) {
      bc.flow.value[f] = 1e5;
      bc.heat.value[f] = prm.reference_temperature - 30;
    }
  const Model m(g, prm, bc);
  std::mt19937 rng(11);
  State prev = m.initial_state();
  prev.x = random_state(m, rng);
  prev.div_u = m.matrix_div_u(prev.x);
  const Vec x = random_state(m, rng);
  const FrozenData fz = m.freeze(x, prev);
  const Evaluation ev(m, x, prev, 20.0, fz);
  const BalanceReport rep = ev.balance();

  double mass = 0.0, energy = 0.0;
  const Vec h = ev.assemble_subdomain_h().val();
  const Index nc = mg.num_cells();
  mass += h.segment(2 * nc, nc).sum();
  energy += h.segment(3 * nc, nc).sum();
  for (int sd = 1; sd < static_cast<int>(g.subdomains.size()); ++sd) {
    const Vec l = ev.assemble_subdomain_l(sd).val();
    const Index n = g.subdomains[sd].num_cells();
    mass += l.head(n).sum();
    energy += l.tail(n).sum();
  }
  CHECK(rep.mass_scale > 0);
  CHECK(rep.energy_scale > 0);
  CHECK(std::abs(rep.mass_imbalance - std::abs(mass)) <= 1e-12 * rep.mass_scale);
  CHECK(std::abs(rep.energy_imbalance - std::abs(energy)) <= 1e-12 * rep.energy_scale);
  CHECK(rep.interface_mismatch <= 1e-14);
}

TEST_CASE("errors") {
  const MixedDimGrid g = horizontal_grid(2, 2);
  const MaterialParams prm;
  const Model m(g, prm, clamped(g.matrix(), prm));
  const State s = m.initial_state();
  const FrozenData fz = m.freeze(s.x, s);
  CHECK_THROWS_AS(Evaluation(m, Vec::Zero(3), s, 1.0, fz), Error);
  try {
    Evaluation(m, s.x, s, 0.0, fz);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ValidationError);
  }
  Vec bad = s.x;
  bad[m.dofs().subdomain(0, Var::Pressure).offset] = std::nan("");
  try {
    Evaluation(m, bad, s, 1.0, fz).system();
    FAIL("expected a non-finite residual");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteResidual);
  }
  BoundaryConditionSet wrong = clamped(g.matrix(), prm);
  wrong.flow.value.resize(1);
  CHECK_THROWS_AS(Model(g, prm, wrong), Error);
}
