#include "fracthm/physics.hpp"

#include "fracthm/errors.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace fracthm {

using ad::AdArray;

const char* to_string(Var v) {
  switch (v) {
    case Var::Displacement: return "u";
    case Var::Pressure: return "p";
    case Var::Temperature: return "T";
    case Var::ContactTraction: return "lambda";
    case Var::InterfaceDisplacement: return "u_j";
    case Var::InterfaceFlux: return "v";
    case Var::InterfaceConduction: return "w";
    case Var::InterfaceAdvection: return "s";
  }
  return "?";
}

std::string DofBlock::name() const {
  std::ostringstream s;
  s << (on_interface ? "interface " : "subdomain ") << entity << " " << to_string(var);
  return s.str();
}

DofManager::DofManager(const MixedDimGrid& grid) {
  auto add = [this](bool intf, int entity, Var v, Index n) {
    blocks_.push_back({intf, entity, v, num_dofs_, n});
    num_dofs_ += n;
  };
  for (int sd = 0; sd < static_cast<int>(grid.subdomains.size()); ++sd) {
    const auto& g = grid.subdomains[sd];
    const Index nc = g.num_cells();
    if (g.dim == 2) add(false, sd, Var::Displacement, 2 * nc);
    add(false, sd, Var::Pressure, nc);
    add(false, sd, Var::Temperature, nc);
    if (g.dim == 1) add(false, sd, Var::ContactTraction, 2 * nc);
  }
  for (int i = 0; i < static_cast<int>(grid.interfaces.size()); ++i) {
    const auto& intf = grid.interfaces[i];
    const Index n = intf.num_cells();
    if (intf.high_dim == 2) add(true, i, Var::InterfaceDisplacement, 2 * n);
    add(true, i, Var::InterfaceFlux, n);
    add(true, i, Var::InterfaceConduction, n);
    add(true, i, Var::InterfaceAdvection, n);
  }
}

const DofBlock& DofManager::find(bool on_interface, int entity, Var v) const {
  for (const auto& b : blocks_)
    if (b.on_interface == on_interface && b.entity == entity && b.var == v) return b;
  std::ostringstream msg;
  msg << "no unknown " << to_string(v) << " on " << (on_interface ? "interface " : "subdomain ") << entity;
  throw Error(ErrorKind::ShapeMismatch, msg.str());
}

const DofBlock& DofManager::subdomain(int sd, Var v) const { return find(false, sd, v); }
const DofBlock& DofManager::interface(int intf, Var v) const { return find(true, intf, v); }

// Operators tying a fracture subdomain to its matrix interface.
struct FractureOperators {
  int interface = -1;
  SpMat jump;          // 2nc x 2n: interface displacement -> Cartesian jump
  SpMat normal;        // nc x 2nc
  SpMat tangent;       // nc x 2nc
  SpMat to_global;     // 2nc x 2nc: (lambda_n, lambda_t) -> Cartesian
  SpMat restrict_vec;  // 2n x 2nc
  SpMat even, odd;     // nc x 2nc
  std::vector<Point> interface_normals;
};

// Two-point flux operators of a fracture subdomain.
struct FlowOperators1d {
  Index num_interior = 0;
  SpMat sel0, sel1;  // interior faces x cells
  Vec h0, h1;
  SpMat scatter;  // faces x interior faces
  SpMat div;      // cells x faces
  std::vector<std::pair<int, SpMat>> point_faces;  // (interface, faces x 1)
};

namespace {

struct Vars {
  std::vector<AdArray> u, p, T, lam, uj, v, w, s;
};

struct Geometry {
  std::vector<AdArray> aperture, volume;
};

struct MatrixFields {
  AdArray mech_bc, scalar_stress, traction, div_u;
  AdArray flow_bc, darcy, trace_p;
  AdArray heat_bc, conduction, trace_T, interface_advection;
};

SpMat selection(Index rows, Index cols, const std::vector<std::pair<Index, Index>>& entries) {
  std::vector<Triplet> t;
  for (auto [r, c] : entries) t.emplace_back(r, c, 1.0);
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

}  // namespace

struct ModelKernels {
  static Vars variables(const Model& m, const Vec& x) {
    const auto& grid = m.grid();
    if (x.size() != m.dofs().num_dofs()) throw Error(ErrorKind::ShapeMismatch, "state vector has the wrong length");
    Vars out;
    const std::size_t ns = grid.subdomains.size(), ni = grid.interfaces.size();
    out.u.resize(ns);
    out.p.resize(ns);
    out.T.resize(ns);
    out.lam.resize(ns);
    out.uj.resize(ni);
    out.v.resize(ni);
    out.w.resize(ni);
    out.s.resize(ni);
    for (const auto& b : m.dofs().blocks()) {
      AdArray a = AdArray::variable(x, b.offset, b.size);
      switch (b.var) {
        case Var::Displacement: out.u[b.entity] = std::move(a); break;
        case Var::Pressure: out.p[b.entity] = std::move(a); break;
        case Var::Temperature: out.T[b.entity] = std::move(a); break;
        case Var::ContactTraction: out.lam[b.entity] = std::move(a); break;
        case Var::InterfaceDisplacement: out.uj[b.entity] = std::move(a); break;
        case Var::InterfaceFlux: out.v[b.entity] = std::move(a); break;
        case Var::InterfaceConduction: out.w[b.entity] = std::move(a); break;
        case Var::InterfaceAdvection: out.s[b.entity] = std::move(a); break;
      }
    }
    return out;
  }

  static AdArray jump(const Model& m, const Vars& vars, int sd) {
    const auto& ops = *m.frac_ops_[sd];
    return ops.jump * vars.uj[ops.interface];
  }

  static Geometry geometry(const Model& m, const Vars& vars) {
    const auto& grid = m.grid();
    const auto& prm = m.params();
    const Index n_dofs = m.dofs().num_dofs();
    Geometry geo;
    geo.aperture.resize(grid.subdomains.size());
    geo.volume.resize(grid.subdomains.size());
    for (int sd : grid.fracture_subdomains()) {
      const auto& ops = *m.frac_ops_[sd];
      const Index nc = grid.subdomains[sd].num_cells();
      const AdArray jn = ops.normal * jump(m, vars, sd);
      geo.aperture[sd] = ad::max(-jn + Vec::Constant(nc, prm.initial_aperture), prm.residual_aperture);
      geo.volume[sd] = geo.aperture[sd];
    }
    for (int sd : grid.intersection_subdomains()) {
      // Mean aperture over all adjacent fracture cells; specific volume as the
      // product of the per-fracture mean apertures.
      std::map<int, std::vector<AdArray>> by_fracture;
      std::vector<AdArray> all;
      for (const auto& intf : grid.interfaces) {
        if (intf.high_dim != 1 || intf.low != sd) continue;
        const auto& hg = grid.subdomains[intf.high];
        const int cell = hg.face_cells[intf.high_faces[0]][0];
        AdArray a = selection(1, hg.num_cells(), {{0, cell}}) * geo.aperture[intf.high];
        by_fracture[hg.fracture_id].push_back(a);
        all.push_back(a);
      }
      auto mean = [n_dofs](const std::vector<AdArray>& parts) {
        AdArray sum = AdArray::constant(1, 0.0, n_dofs);
        for (const auto& a : parts) sum += a;
        return (1.0 / static_cast<double>(parts.size())) * sum;
      };
      geo.aperture[sd] = mean(all);
      std::vector<AdArray> means;
      for (const auto& [id, parts] : by_fracture) means.push_back(mean(parts));
      geo.volume[sd] = means.size() >= 2 ? ad::times(means[0], means[1]) : ad::times(means[0], means[0]);
    }
    return geo;
  }

  static MatrixFields matrix_fields(const Model& m, const Vars& vars) {
    const auto& grid = m.grid();
    const auto& prm = m.params();
    const Index n_dofs = m.dofs().num_dofs();
    const Index nc = grid.matrix().num_cells(), nf = grid.matrix().num_faces();
    MatrixFields f;
    f.mech_bc = AdArray::constant(m.mech_bc_const_, n_dofs);
    f.flow_bc = AdArray::constant(m.flow_bc_const_, n_dofs);
    f.heat_bc = AdArray::constant(m.heat_bc_const_, n_dofs);
    f.interface_advection = AdArray::constant(nf, 0.0, n_dofs);
    for (int i = 0; i < static_cast<int>(grid.interfaces.size()); ++i) {
      const auto& intf = grid.interfaces[i];
      if (intf.high_dim != 2) continue;
      f.mech_bc += m.face_vec_prolong_[i] * vars.uj[i];
      f.flow_bc += intf.pi_high * vars.v[i];
      f.heat_bc += intf.pi_high * vars.w[i];
      f.interface_advection += intf.pi_high * vars.s[i];
    }
    const double beta_k = prm.solid_thermal_expansion * prm.bulk_modulus;
    f.scalar_stress = prm.biot_alpha * vars.p[0] +
                      beta_k * (vars.T[0] - Vec::Constant(nc, prm.reference_temperature));
    const auto& st = m.stress_;
    f.traction = st.stress * vars.u[0] + st.bound_stress * f.mech_bc + st.scalar_stress * f.scalar_stress;
    f.div_u = st.div_u * vars.u[0] + st.bound_div_u * f.mech_bc + st.stabilization * f.scalar_stress;
    f.darcy = m.flow_.flux * vars.p[0] + m.flow_.bound_flux * f.flow_bc;
    f.trace_p = m.flow_.bound_pressure_cell * vars.p[0] + m.flow_.bound_pressure_face * f.flow_bc;
    const Vec t0 = Vec::Constant(nc, prm.reference_temperature);
    const AdArray rel_T = vars.T[0] - t0;
    f.conduction = m.heat_.flux * rel_T + m.heat_.bound_flux * f.heat_bc;
    f.trace_T = m.heat_.bound_pressure_cell * rel_T + m.heat_.bound_pressure_face * f.heat_bc +
                Vec::Constant(nf, prm.reference_temperature);
    return f;
  }

  // Two-point fluxes on a fracture for the cellwise conductivity k; faces at
  // intersections carry the interface unknowns `end_values`.
  static AdArray fracture_flux(const Model& m, int sd, const AdArray& k, const AdArray& potential,
                               const std::vector<AdArray>& end_values) {
    const auto& ops = *m.flow1d_[sd];
    const auto& g = m.grid().subdomains[sd];
    const Index n_dofs = m.dofs().num_dofs();
    AdArray q = AdArray::constant(g.num_faces(), 0.0, n_dofs);
    if (ops.num_interior > 0) {
      const AdArray inv_k = ad::divide(AdArray::constant(g.num_cells(), 1.0, n_dofs), k);
      const AdArray resistance = ad::times(ops.h0, ops.sel0 * inv_k) + ad::times(ops.h1, ops.sel1 * inv_k);
      const AdArray trans = ad::divide(AdArray::constant(ops.num_interior, 1.0, n_dofs), resistance);
      q += ops.scatter * ad::times(trans, ops.sel0 * potential - ops.sel1 * potential);
    }
    for (const auto& [intf, e] : ops.point_faces) q += e * end_values[intf];
    return q;
  }

  static AdArray fracture_permeability(const Model& m, const AdArray& aperture) {
    return (1.0 / (12.0 * m.params().viscosity)) * ad::pow(aperture, 3.0);
  }

  static Vec fracture_darcy(const Model& m, const Vars& vars, const Geometry& geo, int sd) {
    return fracture_flux(m, sd, fracture_permeability(m, geo.aperture[sd]), vars.p[sd], vars.v).val();
  }

  static std::vector<ContactCellState> contact_states(const Model& m, const Vars& vars, const Vars& prev,
                                                       int sd) {
    const auto& ops = *m.frac_ops_[sd];
    const Vec jn = ops.normal * jump(m, vars, sd).val();
    const Vec jt = ops.tangent * jump(m, vars, sd).val();
    const Vec jt_prev = ops.tangent * jump(m, prev, sd).val();
    const Vec ln = ops.even * vars.lam[sd].val();
    const Vec lt = ops.odd * vars.lam[sd].val();
    std::vector<ContactCellState> out(static_cast<std::size_t>(jn.size()));
    for (Index i = 0; i < jn.size(); ++i) out[i] = {ln[i], lt[i], jn[i], jt[i], jt[i] - jt_prev[i]};
    return out;
  }
};

Model::Model(const MixedDimGrid& grid, const MaterialParams& params, const BoundaryConditionSet& external_bc,
             const ModelOptions& options)
    : grid_(&grid), params_(params), bc_(external_bc), options_(options), dofs_(grid) {
  const auto& g = grid.matrix();
  const int nf = g.num_faces(), nc = g.num_cells();
  if (static_cast<int>(bc_.flow.kind.size()) != nf || bc_.flow.value.size() != nf ||
      static_cast<int>(bc_.heat.kind.size()) != nf || bc_.heat.value.size() != nf ||
      static_cast<int>(bc_.mechanics.kind.size()) != nf || bc_.mechanics.value.size() != 2 * nf)
    throw Error(ErrorKind::ShapeMismatch, "boundary conditions do not match the matrix grid");
  contact_c_ = options.contact_c > 0 ? options.contact_c
                                     : 100.0 * params.shear_modulus / grid.characteristic_cell_size();

  // Fracture faces: displacement given by the interface, fluxes by the
  // interface flux unknowns.
  for (int f = 0; f < nf; ++f) {
    if (g.face_tags[f] != FaceTag::Fracture) continue;
    bc_.flow.kind[f] = BcKind::Neumann;
    bc_.flow.value[f] = 0.0;
    bc_.heat.kind[f] = BcKind::Neumann;
    bc_.heat.value[f] = 0.0;
    bc_.mechanics.kind[f] = {BcKind::Dirichlet, BcKind::Dirichlet};
    bc_.mechanics.value.segment<2>(2 * f).setZero();
  }
  const Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  flow_ = mpfa_discretize(g, std::vector<Eigen::Matrix2d>(nc, params.permeability / params.viscosity * eye),
                          bc_.flow, options.mpfa);
  heat_ = mpfa_discretize(g, std::vector<Eigen::Matrix2d>(nc, params.thermal_conductivity * eye), bc_.heat,
                          options.mpfa);
  stress_ = mpsa_biot_discretize(g, params.lame_lambda, params.shear_modulus, bc_.mechanics, options.mpfa);
  mech_bc_const_ = bc_.mechanics.value;
  flow_bc_const_ = bc_.flow.value;
  // Conduction and advection act on the temperature relative to the
  // reference. The conduction operator annihilates constants, so the shift
  // changes nothing but the round-off, which otherwise scales with the
  // absolute temperature times the conductivity.
  heat_bc_const_ = bc_.heat.value;
  heat_dirichlet_ = Vec::Zero(nf);
  for (int f = 0; f < nf; ++f)
    if (g.face_cells[f][1] < 0 && bc_.heat.kind[f] == BcKind::Dirichlet) {
      heat_dirichlet_[f] = bc_.heat.value[f] - params.reference_temperature;
      heat_bc_const_[f] = heat_dirichlet_[f];
    }

  const int ni = static_cast<int>(grid.interfaces.size());
  face_vec_prolong_.resize(ni);
  face_vec_restrict_.resize(ni);
  for (int i = 0; i < ni; ++i) {
    const auto& intf = grid.interfaces[i];
    if (intf.high_dim != 2) continue;
    std::vector<std::pair<Index, Index>> e;
    for (int k = 0; k < intf.num_cells(); ++k)
      for (int d = 0; d < 2; ++d) e.emplace_back(2 * intf.high_faces[k] + d, 2 * k + d);
    face_vec_prolong_[i] = selection(2 * nf, 2 * intf.num_cells(), e);
    face_vec_restrict_[i] = face_vec_prolong_[i].transpose();
  }

  const int ns = static_cast<int>(grid.subdomains.size());
  frac_ops_.resize(ns);
  flow1d_.resize(ns);
  for (int sd : grid.fracture_subdomains()) {
    const auto& fg = grid.subdomains[sd];
    const int fc = fg.num_cells();
    auto ops = std::make_unique<FractureOperators>();
    ops->interface = grid.interface_of_fracture(sd);
    const auto& intf = grid.interfaces[ops->interface];
    const int n = intf.num_cells();
    std::vector<Triplet> tj, tn, tt, tg, tr;
    for (int k = 0; k < n; ++k) {
      const int c = intf.low_cells[k];
      const double sgn = intf.sides[k] == Side::Plus ? 1.0 : -1.0;
      for (int d = 0; d < 2; ++d) {
        tj.emplace_back(2 * c + d, 2 * k + d, sgn);
        tr.emplace_back(2 * k + d, 2 * c + d, 1.0);
      }
      ops->interface_normals.push_back(fg.cell_normals[c]);
    }
    std::vector<std::pair<Index, Index>> ev, od;
    for (int c = 0; c < fc; ++c) {
      const Point& nn = fg.cell_normals[c];
      const Point& t = fg.cell_tangents[c];
      for (int d = 0; d < 2; ++d) {
        tn.emplace_back(c, 2 * c + d, nn[d]);
        tt.emplace_back(c, 2 * c + d, t[d]);
        tg.emplace_back(2 * c + d, 2 * c, nn[d]);
        tg.emplace_back(2 * c + d, 2 * c + 1, t[d]);
      }
      ev.emplace_back(c, 2 * c);
      od.emplace_back(c, 2 * c + 1);
    }
    auto build = [](SpMat& m, Index r, Index cc, std::vector<Triplet>& t) {
      m.resize(r, cc);
      m.setFromTriplets(t.begin(), t.end());
    };
    build(ops->jump, 2 * fc, 2 * n, tj);
    build(ops->normal, fc, 2 * fc, tn);
    build(ops->tangent, fc, 2 * fc, tt);
    build(ops->to_global, 2 * fc, 2 * fc, tg);
    build(ops->restrict_vec, 2 * n, 2 * fc, tr);
    ops->even = selection(fc, 2 * fc, ev);
    ops->odd = selection(fc, 2 * fc, od);
    frac_ops_[sd] = std::move(ops);

    auto fo = std::make_unique<FlowOperators1d>();
    std::vector<std::pair<Index, Index>> s0, s1, sc;
    std::vector<double> h0, h1;
    for (int f = 0; f < fg.num_faces(); ++f) {
      const auto [c0, c1] = fg.face_cells[f];
      if (c1 < 0) continue;
      s0.emplace_back(fo->num_interior, c0);
      s1.emplace_back(fo->num_interior, c1);
      sc.emplace_back(f, fo->num_interior);
      h0.push_back((fg.face_centers[f] - fg.cell_centers[c0]).norm());
      h1.push_back((fg.face_centers[f] - fg.cell_centers[c1]).norm());
      ++fo->num_interior;
    }
    fo->sel0 = selection(fo->num_interior, fc, s0);
    fo->sel1 = selection(fo->num_interior, fc, s1);
    fo->h0 = Eigen::Map<Vec>(h0.data(), static_cast<Index>(h0.size()));
    fo->h1 = Eigen::Map<Vec>(h1.data(), static_cast<Index>(h1.size()));
    fo->scatter = selection(fg.num_faces(), fo->num_interior, sc);
    fo->div = fg.divergence();
    for (int i = 0; i < ni; ++i) {
      const auto& pi = grid.interfaces[i];
      if (pi.high_dim == 1 && pi.high == sd)
        fo->point_faces.emplace_back(i, selection(fg.num_faces(), 1, {{pi.high_faces[0], 0}}));
    }
    flow1d_[sd] = std::move(fo);
  }
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;

State Model::initial_state() const {
  State s;
  s.x = Vec::Zero(dofs_.num_dofs());
  for (const auto& b : dofs_.blocks())
    if (b.var == Var::Temperature) s.x.segment(b.offset, b.size).setConstant(params_.reference_temperature);
  s.div_u = Vec::Zero(grid_->matrix().num_cells());
  return s;
}

std::vector<ContactCellState> Model::contact_states(int sd, const Vec& x, const State& prev) const {
  const Vars vars = ModelKernels::variables(*this, x);
  const Vars pv = ModelKernels::variables(*this, prev.x);
  return ModelKernels::contact_states(*this, vars, pv, sd);
}

FractureGeometry Model::update_geometry(const Vec& x) const {
  const Vars vars = ModelKernels::variables(*this, x);
  const Geometry geo = ModelKernels::geometry(*this, vars);
  FractureGeometry out;
  for (std::size_t i = 0; i < geo.aperture.size(); ++i) {
    out.aperture.push_back(geo.aperture[i].size() > 0 ? geo.aperture[i].val() : Vec());
    out.specific_volume.push_back(geo.volume[i].size() > 0 ? geo.volume[i].val() : Vec());
  }
  return out;
}

Vec Model::jump_local(int sd, const Vec& x) const {
  const Vars vars = ModelKernels::variables(*this, x);
  const auto& ops = *frac_ops_[sd];
  const Vec j = ModelKernels::jump(*this, vars, sd).val();
  const Vec jn = ops.normal * j, jt = ops.tangent * j;
  Vec out(2 * jn.size());
  for (Index i = 0; i < jn.size(); ++i) {
    out[2 * i] = jn[i];
    out[2 * i + 1] = jt[i];
  }
  return out;
}

Vec Model::matrix_div_u(const Vec& x) const {
  const Vars vars = ModelKernels::variables(*this, x);
  return ModelKernels::matrix_fields(*this, vars).div_u.val();
}

Vec Model::matrix_darcy_flux(const Vec& x) const {
  const Vars vars = ModelKernels::variables(*this, x);
  return ModelKernels::matrix_fields(*this, vars).darcy.val();
}

FrozenData Model::freeze(const Vec& x, const State& prev) const {
  const auto& grid = *grid_;
  const Vars vars = ModelKernels::variables(*this, x);
  const Vars pv = ModelKernels::variables(*this, prev.x);
  const Geometry geo = ModelKernels::geometry(*this, vars);
  const MatrixFields mf = ModelKernels::matrix_fields(*this, vars);
  FrozenData fz;
  const std::size_t ns = grid.subdomains.size();
  fz.regimes.resize(ns);
  fz.contact_iterate.resize(ns);
  fz.fracture_upwind.resize(ns);
  fz.matrix_upwind = upwind_discretize(grid.matrix(), mf.darcy.val(), bc_.heat);
  for (int sd : grid.fracture_subdomains()) {
    fz.contact_iterate[sd] = ModelKernels::contact_states(*this, vars, pv, sd);
    for (const auto& c : fz.contact_iterate[sd])
      fz.regimes[sd].push_back(
          linearization_regime(c, params_.friction_coefficient, contact_c_, traction_scale()));
    const auto& fg = grid.subdomains[sd];
    fz.fracture_upwind[sd] =
        upwind_discretize(fg, ModelKernels::fracture_darcy(*this, vars, geo, sd), ScalarBc::all(fg, BcKind::Neumann));
  }
  for (std::size_t i = 0; i < grid.interfaces.size(); ++i) {
    const Vec& v = vars.v[i].val();
    std::vector<bool> up(static_cast<std::size_t>(v.size()));
    for (Index k = 0; k < v.size(); ++k) up[k] = v[k] >= 0.0;
    fz.upstream_high.push_back(std::move(up));
  }
  return fz;
}

struct Evaluation::Impl {
  const Model& m;
  const MixedDimGrid& grid;
  const MaterialParams& prm;
  const State& prev;
  double dt;
  const FrozenData& frozen;
  Index n_dofs;
  Vars vars, pv;
  Geometry geo, prev_geo;
  MatrixFields mf;
  Vec prev_matrix_div_u;

  Impl(const Model& model, const Vec& x, const State& p, double step, const FrozenData& fz)
      : m(model), grid(model.grid()), prm(model.params()), prev(p), dt(step), frozen(fz),
        n_dofs(model.dofs().num_dofs()) {
    if (!(dt > 0)) throw Error(ErrorKind::ValidationError, "time step must be positive");
    vars = ModelKernels::variables(m, x);
    pv = ModelKernels::variables(m, prev.x);
    geo = ModelKernels::geometry(m, vars);
    prev_geo = ModelKernels::geometry(m, pv);
    mf = ModelKernels::matrix_fields(m, vars);
    if (prev.div_u.size() != grid.matrix().num_cells())
      throw Error(ErrorKind::ShapeMismatch, "previous volumetric strain has the wrong length");
  }

  Vec cell_volumes(int sd) const {
    const auto& v = grid.subdomains[sd].cell_volumes;
    return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
  }

  // Accumulation terms (time differences) of the matrix balances.
  AdArray matrix_mass_accumulation() const {
    const Vec vol = cell_volumes(0);
    const AdArray dp = vars.p[0] - pv.p[0].val();
    const AdArray dT = vars.T[0] - pv.T[0].val();
    return ad::times(prm.matrix_storage() * vol, dp) + prm.biot_alpha * (mf.div_u - prev.div_u) -
           ad::times(prm.porosity * prm.fluid_thermal_expansion * vol, dT);
  }

  AdArray matrix_energy_accumulation() const {
    const Vec vol = cell_volumes(0);
    const AdArray dp = vars.p[0] - pv.p[0].val();
    const AdArray dT = vars.T[0] - pv.T[0].val();
    const double t0 = prm.reference_temperature;
    return ad::times(prm.density * prm.heat_capacity * vol, dT) -
           ad::times(prm.porosity * prm.fluid_thermal_expansion * t0 * vol, dp) +
           (prm.solid_thermal_expansion * prm.bulk_modulus * t0) * (mf.div_u - prev.div_u);
  }

  AdArray matrix_advection() const {
    const auto& up = frozen.matrix_upwind;
    const Vec t0 = Vec::Constant(grid.matrix().num_cells(), prm.reference_temperature);
    const AdArray t_up = up.cell * (vars.T[0] - t0) + up.bound * m.heat_dirichlet_;
    return (prm.fluid_density * prm.fluid_heat_capacity) * ad::times(mf.darcy, t_up) + mf.interface_advection;
  }

  AdArray lower_mass_accumulation(int sd) const {
    const AdArray& V = geo.volume[sd];
    const Vec& vp = prev_geo.volume[sd].val();
    const AdArray dp = vars.p[sd] - pv.p[sd].val();
    const AdArray dT = vars.T[sd] - pv.T[sd].val();
    const AdArray local = prm.fluid_compressibility * ad::times(V, dp) + (V - vp) -
                          prm.fluid_thermal_expansion * ad::times(V, dT);
    return ad::times(cell_volumes(sd), local);
  }

  AdArray lower_energy_accumulation(int sd) const {
    const AdArray& V = geo.volume[sd];
    const AdArray dp = vars.p[sd] - pv.p[sd].val();
    const AdArray dT = vars.T[sd] - pv.T[sd].val();
    const AdArray local = (prm.density * prm.heat_capacity) * ad::times(V, dT) -
                          (prm.fluid_thermal_expansion * prm.reference_temperature) * ad::times(V, dp);
    return ad::times(cell_volumes(sd), local);
  }

  // Sum of the interface quantity q over interfaces whose lower side is sd.
  AdArray inflow(int sd, const std::vector<AdArray>& q) const {
    AdArray sum = AdArray::constant(grid.subdomains[sd].num_cells(), 0.0, n_dofs);
    for (std::size_t i = 0; i < grid.interfaces.size(); ++i)
      if (grid.interfaces[i].low == sd) sum += grid.interfaces[i].pi_low * q[i];
    return sum;
  }

  struct FractureFluxes {
    AdArray darcy, conduction, advection;
  };

  FractureFluxes fracture_fluxes(int sd) const {
    FractureFluxes f;
    const AdArray k = ModelKernels::fracture_permeability(m, geo.aperture[sd]);
    f.darcy = ModelKernels::fracture_flux(m, sd, k, vars.p[sd], vars.v);
    f.conduction =
        ModelKernels::fracture_flux(m, sd, prm.thermal_conductivity * geo.volume[sd], vars.T[sd], vars.w);
    const auto& up = frozen.fracture_upwind[sd];
    const Vec t0 = Vec::Constant(grid.subdomains[sd].num_cells(), prm.reference_temperature);
    f.advection = (prm.fluid_density * prm.fluid_heat_capacity) * ad::times(f.darcy, up.cell * (vars.T[sd] - t0));
    for (const auto& [intf, e] : m.flow1d_[sd]->point_faces) f.advection += e * vars.s[intf];
    return f;
  }
};

Evaluation::Evaluation(const Model& model, const Vec& x, const State& prev, double dt, const FrozenData& frozen)
    : impl_(std::make_unique<Impl>(model, x, prev, dt, frozen)) {}

Evaluation::~Evaluation() = default;

AdArray Evaluation::assemble_subdomain_h() const {
  const Impl& d = *impl_;
  const auto& g = d.grid.matrix();
  const AdArray momentum = g.vector_divergence() * d.mf.traction;
  const SpMat div = g.divergence();
  const AdArray mass = d.matrix_mass_accumulation() + d.dt * (div * d.mf.darcy);
  const AdArray energy = d.matrix_energy_accumulation() + d.dt * (div * (d.mf.conduction + d.matrix_advection()));
  return ad::concat({momentum, mass, energy});
}

AdArray Evaluation::assemble_subdomain_l(int sd) const {
  const Impl& d = *impl_;
  const auto& g = d.grid.subdomains[sd];
  if (g.dim == 2) throw Error(ErrorKind::ShapeMismatch, "assemble_subdomain_l expects a fracture or intersection");
  AdArray mass = d.lower_mass_accumulation(sd) - d.dt * d.inflow(sd, d.vars.v);
  AdArray energy = d.lower_energy_accumulation(sd) - d.dt * (d.inflow(sd, d.vars.w) + d.inflow(sd, d.vars.s));
  if (g.dim == 1) {
    const auto f = d.fracture_fluxes(sd);
    const SpMat& div = d.m.flow1d_[sd]->div;
    mass += d.dt * (div * f.darcy);
    energy += d.dt * (div * (f.conduction + f.advection));
  }
  return ad::concat({mass, energy});
}

AdArray Evaluation::assemble_interface_laws(int i) const {
  const Impl& d = *impl_;
  const auto& intf = d.grid.interfaces[i];
  const auto& prm = d.prm;
  const double rho_c = prm.fluid_density * prm.fluid_heat_capacity;
  const Index n = intf.num_cells();
  const AdArray& v = d.vars.v[i];
  const AdArray& w = d.vars.w[i];
  const AdArray& s = d.vars.s[i];
  const auto& upstream = d.frozen.upstream_high[i];

  AdArray p_high, t_high, p_low = intf.xi_low * d.vars.p[intf.low], t_low = intf.xi_low * d.vars.T[intf.low];
  AdArray eq_v, eq_w;
  if (intf.high_dim == 2) {
    const Vec meas = Eigen::Map<const Vec>(intf.measures.data(), n);
    p_high = intf.xi_high * d.mf.trace_p;
    t_high = intf.xi_high * d.mf.trace_T;
    eq_v = v + prm.interface_permeability * ad::times(meas, p_low - p_high);
    eq_w = w + prm.interface_conductivity * ad::times(meas, t_low - t_high);
  } else {
    // Between a fracture end and an intersection point: the fracture side is
    // reconstructed from the adjacent cell, the coupling uses the fracture's
    // own conductivities over half an aperture.
    const auto& hg = d.grid.subdomains[intf.high];
    const int face = intf.high_faces[0];
    const int cell = hg.face_cells[face][0];
    const double dist = (hg.face_centers[face] - hg.cell_centers[cell]).norm();
    const SpMat sel = selection(1, hg.num_cells(), {{0, cell}});
    const AdArray a = sel * d.geo.aperture[intf.high];
    const AdArray k = ModelKernels::fracture_permeability(d.m, a);
    const AdArray kt = prm.thermal_conductivity * (sel * d.geo.volume[intf.high]);
    p_high = sel * d.vars.p[intf.high];
    t_high = sel * d.vars.T[intf.high];
    const AdArray trace_p = p_high - ad::divide(dist * v, k);
    const AdArray trace_t = t_high - ad::divide(dist * w, kt);
    const AdArray normal_k = 2.0 * ad::divide(k, a);
    const AdArray normal_t = 2.0 * ad::divide(kt, a);
    eq_v = v + ad::times(normal_k, p_low - trace_p);
    eq_w = w + ad::times(normal_t, t_low - trace_t);
  }
  std::vector<std::pair<Index, Index>> hi, lo;
  for (Index k = 0; k < n; ++k) (upstream[k] ? hi : lo).emplace_back(k, k);
  const AdArray t_up = selection(n, n, hi) * t_high + selection(n, n, lo) * t_low;
  const AdArray eq_s = s - rho_c * ad::times(v, t_up - Vec::Constant(n, prm.reference_temperature));
  return ad::concat({eq_v, eq_w, eq_s});
}

AdArray Evaluation::traction_balance(int i) const {
  const Impl& d = *impl_;
  const auto& intf = d.grid.interfaces[i];
  if (intf.high_dim != 2) throw Error(ErrorKind::ShapeMismatch, "traction balance needs a matrix-fracture interface");
  const auto& ops = *d.m.frac_ops_[intf.low];
  const AdArray face_t = d.m.face_vec_restrict_[i] * d.mf.traction;
  const AdArray lam = ops.restrict_vec * (ops.to_global * d.vars.lam[intf.low]);
  const AdArray pl = intf.xi_low * d.vars.p[intf.low];
  return traction_balance_rows(face_t, lam, pl, ops.interface_normals, intf.measures, intf.sides);
}

AdArray Evaluation::contact_equations(int sd) const {
  const Impl& d = *impl_;
  const auto& ops = *d.m.frac_ops_[sd];
  const AdArray j = ModelKernels::jump(d.m, d.vars, sd);
  const AdArray jn = ops.normal * j;
  const AdArray dut = ops.tangent * j - ops.tangent * ModelKernels::jump(d.m, d.pv, sd).val();
  return assemble_contact_equations(d.frozen.regimes[sd], d.frozen.contact_iterate[sd], jn, dut,
                                    ops.even * d.vars.lam[sd], ops.odd * d.vars.lam[sd],
                                    d.prm.friction_coefficient, d.m.contact_c(), d.m.traction_scale());
}

AdArray Evaluation::system() const {
  const auto& grid = impl_->grid;
  std::vector<AdArray> parts;
  for (int sd = 0; sd < static_cast<int>(grid.subdomains.size()); ++sd) {
    if (grid.subdomains[sd].dim == 2) {
      parts.push_back(assemble_subdomain_h());
    } else {
      parts.push_back(assemble_subdomain_l(sd));
      if (grid.subdomains[sd].dim == 1) parts.push_back(contact_equations(sd));
    }
  }
  for (int i = 0; i < static_cast<int>(grid.interfaces.size()); ++i) {
    if (grid.interfaces[i].high_dim == 2) parts.push_back(traction_balance(i));
    parts.push_back(assemble_interface_laws(i));
  }
  AdArray out = ad::concat(parts);
  if (!out.val().allFinite()) {
    for (const auto& b : impl_->m.dofs().blocks())
      if (!out.val().segment(b.offset, b.size).allFinite())
        throw Error(ErrorKind::NonFiniteResidual, "non-finite residual in equations of " + b.name());
    throw Error(ErrorKind::NonFiniteResidual, "non-finite residual");
  }
  return out;
}

BalanceReport Evaluation::balance() const {
  const Impl& d = *impl_;
  const auto& grid = d.grid;
  const auto& g = grid.matrix();
  BalanceReport r;
  double mass_sum = 0.0, energy_sum = 0.0;
  auto add_abs = [](const Vec& v) { return v.cwiseAbs().sum(); };

  const Vec ma = d.matrix_mass_accumulation().val();
  const Vec ea = d.matrix_energy_accumulation().val();
  const Vec q = d.mf.darcy.val();
  const Vec qe = d.mf.conduction.val() + d.matrix_advection().val();
  mass_sum += ma.sum();
  energy_sum += ea.sum();
  r.mass_scale += add_abs(ma) + d.dt * add_abs(q);
  r.energy_scale += add_abs(ea) + d.dt * add_abs(qe);
  double mismatch = 0.0, mismatch_scale = 0.0;
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_tags[f] == FaceTag::External) {
      mass_sum += d.dt * q[f];
      energy_sum += d.dt * qe[f];
    }
  for (std::size_t i = 0; i < grid.interfaces.size(); ++i) {
    const auto& intf = grid.interfaces[i];
    const Vec v = d.vars.v[i].val();
    if (intf.high_dim == 2) {
      const Vec qf = intf.xi_high * q;
      mismatch += (qf - v).cwiseAbs().sum();
    }
    mismatch_scale += v.cwiseAbs().sum();
  }
  for (int sd = 1; sd < static_cast<int>(grid.subdomains.size()); ++sd) {
    const Vec la = d.lower_mass_accumulation(sd).val();
    const Vec le = d.lower_energy_accumulation(sd).val();
    mass_sum += la.sum();
    energy_sum += le.sum();
    r.mass_scale += add_abs(la);
    r.energy_scale += add_abs(le);
    if (grid.subdomains[sd].dim == 1) {
      const auto f = d.fracture_fluxes(sd);
      r.mass_scale += d.dt * add_abs(f.darcy.val());
      r.energy_scale += d.dt * add_abs(f.conduction.val() + f.advection.val());
    }
  }
  r.mass_imbalance = std::abs(mass_sum);
  r.energy_imbalance = std::abs(energy_sum);
  r.interface_mismatch = mismatch_scale > 0 ? mismatch / mismatch_scale : 0.0;
  return r;
}

}  // namespace fracthm
