#include "fracthm/errors.hpp"
#include "fracthm/fvm.hpp"
#include "interaction_region.hpp"

#include <algorithm>

namespace fracthm {

namespace detail {

int InteractionRegion::local_cell(int cell) const {
  auto it = std::lower_bound(cells.begin(), cells.end(), cell);
  return (it != cells.end() && *it == cell) ? static_cast<int>(it - cells.begin()) : -1;
}

std::vector<InteractionRegion> interaction_regions(const SubdomainGrid& grid) {
  std::vector<InteractionRegion> regions(static_cast<std::size_t>(grid.num_nodes()));
  for (int n = 0; n < grid.num_nodes(); ++n) regions[n].node = n;
  for (int c = 0; c < grid.num_cells(); ++c)
    for (int n : grid.cell_nodes[c]) regions[n].cells.push_back(c);
  for (int f = 0; f < grid.num_faces(); ++f)
    for (int n : grid.face_nodes[f])
      if (n >= 0) regions[n].faces.push_back(f);
  for (auto& r : regions) {
    std::sort(r.cells.begin(), r.cells.end());
    std::sort(r.faces.begin(), r.faces.end());
  }
  return regions;
}

}  // namespace detail

ScalarBc ScalarBc::all(const SubdomainGrid& g, BcKind k, double v) {
  ScalarBc bc;
  bc.kind.assign(g.num_faces(), k);
  bc.value = Vec::Zero(g.num_faces());
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) bc.value[f] = v;
  return bc;
}

VectorBc VectorBc::all(const SubdomainGrid& g, BcKind k) {
  VectorBc bc;
  bc.kind.assign(g.num_faces(), {k, k});
  bc.value = Vec::Zero(2 * g.num_faces());
  return bc;
}

FluxDiscretization tpfa_discretize(const SubdomainGrid& grid, const std::vector<double>& conductivity,
                                   const ScalarBc& bc) {
  std::vector<Triplet> tf, tb, tpc, tpf;
  for (int f = 0; f < grid.num_faces(); ++f) {
    const auto [c0, c1] = grid.face_cells[f];
    auto half = [&](int c) {
      const Point d = grid.face_centers[f] - grid.cell_centers[c];
      if (grid.dim == 2) return conductivity[c] * std::abs(d.dot(grid.face_normals[f])) / d.squaredNorm();
      return conductivity[c] * grid.face_areas[f] / d.norm();
    };
    const double t0 = half(c0);
    if (c1 >= 0) {
      const double t = 1.0 / (1.0 / t0 + 1.0 / half(c1));
      tf.emplace_back(f, c0, t);
      tf.emplace_back(f, c1, -t);
    } else if (bc.kind[f] == BcKind::Dirichlet) {
      tf.emplace_back(f, c0, t0);
      tb.emplace_back(f, f, -t0);
      tpf.emplace_back(f, f, 1.0);
    } else {
      tb.emplace_back(f, f, 1.0);
      tpc.emplace_back(f, c0, 1.0);
      tpf.emplace_back(f, f, -1.0 / t0);
    }
  }
  FluxDiscretization d;
  const int nf = grid.num_faces(), nc = grid.num_cells();
  d.flux.resize(nf, nc);
  d.flux.setFromTriplets(tf.begin(), tf.end());
  d.bound_flux.resize(nf, nf);
  d.bound_flux.setFromTriplets(tb.begin(), tb.end());
  d.bound_pressure_cell.resize(nf, nc);
  d.bound_pressure_cell.setFromTriplets(tpc.begin(), tpc.end());
  d.bound_pressure_face.resize(nf, nf);
  d.bound_pressure_face.setFromTriplets(tpf.begin(), tpf.end());
  return d;
}

UpwindDiscretization upwind_discretize(const SubdomainGrid& grid, const Vec& face_fluxes,
                                       const ScalarBc& bc) {
  if (face_fluxes.size() != grid.num_faces())
    throw Error(ErrorKind::ShapeMismatch, "face flux vector does not match the grid");
  std::vector<Triplet> tc, tb;
  for (int f = 0; f < grid.num_faces(); ++f) {
    const auto [c0, c1] = grid.face_cells[f];
    const FaceTag tag = grid.face_tags[f];
    if (tag == FaceTag::Fracture || tag == FaceTag::Intersection) continue;
    const double q = face_fluxes[f];
    if (c1 >= 0) {
      tc.emplace_back(f, q >= 0 ? c0 : c1, 1.0);
    } else if (q < 0 && bc.kind[f] == BcKind::Dirichlet) {
      tb.emplace_back(f, f, 1.0);
    } else {
      tc.emplace_back(f, c0, 1.0);
    }
  }
  UpwindDiscretization u;
  u.cell.resize(grid.num_faces(), grid.num_cells());
  u.cell.setFromTriplets(tc.begin(), tc.end());
  u.bound.resize(grid.num_faces(), grid.num_faces());
  u.bound.setFromTriplets(tb.begin(), tb.end());
  return u;
}

FaceQuantities reconstruct_face_quantities(const FluxDiscretization& flow,
                                           const StressDiscretization& mech,
                                           const SubdomainGrid& grid, const Vec& u, const Vec& p,
                                           const Vec& scalar_stress, const Vec& flow_bc,
                                           const Vec& mech_bc) {
  const Index nc = grid.num_cells(), nf = grid.num_faces();
  if (u.size() != 2 * nc || p.size() != nc || scalar_stress.size() != nc || flow_bc.size() != nf ||
      mech_bc.size() != 2 * nf || flow.flux.rows() != nf || mech.stress.rows() != 2 * nf)
    throw Error(ErrorKind::ShapeMismatch, "state dimensions disagree with the grid");
  FaceQuantities out;
  out.fluxes = flow.flux * p + flow.bound_flux * flow_bc;
  out.tractions = mech.stress * u + mech.bound_stress * mech_bc + mech.scalar_stress * scalar_stress;
  return out;
}

std::vector<int> row_pattern(const SpMat& m, int row) {
  std::vector<int> cols;
  for (SpMat::InnerIterator it(m, row); it; ++it)
    if (it.value() != 0.0) cols.push_back(static_cast<int>(it.col()));
  return cols;
}

}  // namespace fracthm
