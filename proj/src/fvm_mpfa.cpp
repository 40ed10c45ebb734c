#include "fracthm/errors.hpp"
#include "fracthm/fvm.hpp"
#include "interaction_region.hpp"

#include <Eigen/LU>

#include <sstream>

namespace fracthm {

namespace {

// Local MPFA-O system of one interaction region. Unknowns are the pressure
// gradients of the sub-cells; each internal sub-face carries flux and
// pressure continuity, each boundary sub-face one boundary condition.
void assemble_region(const SubdomainGrid& g, const detail::InteractionRegion& region,
                     const std::vector<Eigen::Matrix2d>& k, const ScalarBc& bc, double eta,
                     std::vector<Triplet>& tf, std::vector<Triplet>& tb, std::vector<Triplet>& tpc,
                     std::vector<Triplet>& tpf) {
  const int nc = static_cast<int>(region.cells.size());
  const int nfaces = static_cast<int>(region.faces.size());
  std::vector<int> bnd_col(nfaces, -1);
  int nb = 0;
  for (int i = 0; i < nfaces; ++i)
    if (g.face_cells[region.faces[i]][1] < 0) bnd_col[i] = nb++;

  const int nunk = 2 * nc;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nunk, nunk);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nunk, nc + nb);
  int row = 0;
  auto check_rows = [&](int needed) {
    if (row + needed > nunk)
      throw Error(ErrorKind::SingularLocalSystem, "interaction region is over-determined");
  };

  for (int i = 0; i < nfaces; ++i) {
    const int f = region.faces[i];
    const Point n = 0.5 * g.face_normals[f];
    const Point xcp = detail::continuity_point(g, f, region.node, eta);
    const int c0 = g.face_cells[f][0], c1 = g.face_cells[f][1];
    const int l0 = region.local_cell(c0);
    const Eigen::RowVector2d flux0 = -(k[c0] * n).transpose();
    const Eigen::RowVector2d d0 = (xcp - g.cell_centers[c0]).transpose();
    if (c1 >= 0) {
      const int l1 = region.local_cell(c1);
      const Eigen::RowVector2d flux1 = -(k[c1] * n).transpose();
      const Eigen::RowVector2d d1 = (xcp - g.cell_centers[c1]).transpose();
      check_rows(2);
      a.block<1, 2>(row, 2 * l0) = flux0;
      a.block<1, 2>(row, 2 * l1) = -flux1;
      ++row;
      a.block<1, 2>(row, 2 * l0) = d0;
      a.block<1, 2>(row, 2 * l1) = -d1;
      rhs(row, l0) = -1.0;
      rhs(row, l1) = 1.0;
      ++row;
    } else {
      check_rows(1);
      if (bc.kind[f] == BcKind::Dirichlet) {
        a.block<1, 2>(row, 2 * l0) = d0;
        rhs(row, l0) = -1.0;
        rhs(row, nc + bnd_col[i]) = 1.0;
      } else {
        a.block<1, 2>(row, 2 * l0) = flux0;
        rhs(row, nc + bnd_col[i]) = 0.5;
      }
      ++row;
    }
  }
  if (row != nunk) throw Error(ErrorKind::SingularLocalSystem, "interaction region is under-determined");

  for (int r = 0; r < nunk; ++r) {
    const double s = a.row(r).cwiseAbs().maxCoeff();
    if (s == 0.0) throw Error(ErrorKind::SingularLocalSystem, "empty row in local system");
    a.row(r) /= s;
    rhs.row(r) /= s;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible() || lu.rcond() < 1e-14) {
    std::ostringstream msg;
    msg << "MPFA interaction region around node " << region.node << " is singular";
    throw Error(ErrorKind::SingularLocalSystem, msg.str());
  }
  const Eigen::MatrixXd x = lu.solve(rhs);

  for (int i = 0; i < nfaces; ++i) {
    const int f = region.faces[i];
    const int c0 = g.face_cells[f][0];
    const int l0 = region.local_cell(c0);
    const bool boundary = g.face_cells[f][1] < 0;
    if (boundary && bc.kind[f] == BcKind::Neumann) {
      tb.emplace_back(f, f, 0.5);
    } else {
      const Point n = 0.5 * g.face_normals[f];
      const Eigen::RowVector2d flux0 = -(k[c0] * n).transpose();
      const Eigen::RowVectorXd coeff = flux0 * x.middleRows(2 * l0, 2);
      for (int j = 0; j < nc; ++j)
        if (coeff[j] != 0.0) tf.emplace_back(f, region.cells[j], coeff[j]);
      for (int j = 0; j < nfaces; ++j)
        if (bnd_col[j] >= 0 && coeff[nc + bnd_col[j]] != 0.0)
          tb.emplace_back(f, region.faces[j], coeff[nc + bnd_col[j]]);
    }
    if (boundary) {
      // Pressure at the continuity point, averaged over the two sub-faces.
      if (bc.kind[f] == BcKind::Dirichlet) {
        tpf.emplace_back(f, f, 0.5);
      } else {
        const Point xcp = detail::continuity_point(g, f, region.node, eta);
        const Eigen::RowVector2d d0 = (xcp - g.cell_centers[c0]).transpose();
        Eigen::RowVectorXd coeff = d0 * x.middleRows(2 * l0, 2);
        coeff[l0] += 1.0;
        for (int j = 0; j < nc; ++j)
          if (coeff[j] != 0.0) tpc.emplace_back(f, region.cells[j], 0.5 * coeff[j]);
        for (int j = 0; j < nfaces; ++j)
          if (bnd_col[j] >= 0 && coeff[nc + bnd_col[j]] != 0.0)
            tpf.emplace_back(f, region.faces[j], 0.5 * coeff[nc + bnd_col[j]]);
      }
    }
  }
}

}  // namespace

FluxDiscretization mpfa_discretize(const SubdomainGrid& grid,
                                   const std::vector<Eigen::Matrix2d>& conductivity,
                                   const ScalarBc& bc, const MpfaOptions& options) {
  if (static_cast<int>(conductivity.size()) != grid.num_cells() ||
      static_cast<int>(bc.kind.size()) != grid.num_faces())
    throw Error(ErrorKind::ShapeMismatch, "conductivity or boundary data do not match the grid");
  if (grid.dim < 2) {
    std::vector<double> k(conductivity.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = conductivity[i](0, 0);
    return tpfa_discretize(grid, k, bc);
  }
  std::vector<Triplet> tf, tb, tpc, tpf;
  for (const auto& region : detail::interaction_regions(grid)) {
    if (region.cells.empty()) continue;
    assemble_region(grid, region, conductivity, bc, options.eta, tf, tb, tpc, tpf);
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

}  // namespace fracthm
