#include "fracthm/errors.hpp"
#include "fracthm/fvm.hpp"
#include "interaction_region.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <sstream>

namespace fracthm {

namespace {

using Mat24 = Eigen::Matrix<double, 2, 4>;

// Traction sigma(G) n for the sub-cell gradient G = [G00 G01 G10 G11].
Mat24 traction_map(const Point& n, double lambda, double mu) {
  Mat24 t;
  t << (2 * mu + lambda) * n.x(), mu * n.y(), mu * n.y(), lambda * n.x(),  //
      lambda * n.y(), mu * n.x(), mu * n.x(), (2 * mu + lambda) * n.y();
  return t;
}

// Displacement increment G d.
Mat24 displacement_map(const Point& d) {
  Mat24 m;
  m << d.x(), d.y(), 0, 0,  //
      0, 0, d.x(), d.y();
  return m;
}

struct Triplets {
  std::vector<Triplet> stress, bound_stress, scalar_stress, div_u, bound_div_u, stab;
};

// Local MPSA system of one interaction region: sub-cell displacement
// gradients with traction and displacement continuity on internal sub-faces.
// The isotropic scalar stress s enters the traction continuity.
void assemble_region(const SubdomainGrid& g, const detail::InteractionRegion& region, double lambda,
                     double mu, const VectorBc& bc, double eta, Triplets& out) {
  const int nc = static_cast<int>(region.cells.size());
  const int nfaces = static_cast<int>(region.faces.size());
  std::vector<int> bnd_col(nfaces, -1);
  int nb = 0;
  for (int i = 0; i < nfaces; ++i)
    if (g.face_cells[region.faces[i]][1] < 0) bnd_col[i] = nb++;

  const int nunk = 4 * nc;
  // Right-hand side columns: cell displacements, cell scalars, boundary values.
  const int col_s = 2 * nc, col_b = 3 * nc;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nunk, nunk);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nunk, 3 * nc + 2 * nb);
  int row = 0;
  auto need = [&](int rows) {
    if (row + rows > nunk) throw Error(ErrorKind::SingularLocalSystem, "MPSA region over-determined");
  };

  for (int i = 0; i < nfaces; ++i) {
    const int f = region.faces[i];
    const Point n = 0.5 * g.face_normals[f];
    const Point xcp = detail::continuity_point(g, f, region.node, eta);
    const int c0 = g.face_cells[f][0], c1 = g.face_cells[f][1];
    const int l0 = region.local_cell(c0);
    const Mat24 t0 = traction_map(n, lambda, mu);
    const Mat24 d0 = displacement_map(xcp - g.cell_centers[c0]);
    if (c1 >= 0) {
      const int l1 = region.local_cell(c1);
      const Mat24 d1 = displacement_map(xcp - g.cell_centers[c1]);
      need(4);
      a.block<2, 4>(row, 4 * l0) = t0;
      a.block<2, 4>(row, 4 * l1) = -t0;
      rhs.block<2, 1>(row, col_s + l0) = n;
      rhs.block<2, 1>(row, col_s + l1) = -n;
      row += 2;
      a.block<2, 4>(row, 4 * l0) = d0;
      a.block<2, 4>(row, 4 * l1) = -d1;
      rhs.block<2, 2>(row, 2 * l0) = -Eigen::Matrix2d::Identity();
      rhs.block<2, 2>(row, 2 * l1) = Eigen::Matrix2d::Identity();
      row += 2;
    } else {
      need(2);
      for (int d = 0; d < 2; ++d) {
        if (bc.kind[f][d] == BcKind::Dirichlet) {
          a.block<1, 4>(row, 4 * l0) = d0.row(d);
          rhs(row, 2 * l0 + d) = -1.0;
          rhs(row, col_b + 2 * bnd_col[i] + d) = 1.0;
        } else {
          a.block<1, 4>(row, 4 * l0) = t0.row(d);
          rhs(row, col_s + l0) = n[d];
          rhs(row, col_b + 2 * bnd_col[i] + d) = 0.5;
        }
        ++row;
      }
    }
  }
  if (row != nunk) throw Error(ErrorKind::SingularLocalSystem, "MPSA region under-determined");

  for (int r = 0; r < nunk; ++r) {
    const double s = a.row(r).cwiseAbs().maxCoeff();
    if (s == 0.0) throw Error(ErrorKind::SingularLocalSystem, "empty row in MPSA local system");
    a.row(r) /= s;
    rhs.row(r) /= s;
  }
  // A corner whose faces all carry traction data leaves the rotation of its
  // sub-cell undetermined. Tractions do not see it, so the least-squares
  // solution is used there. Any other rank loss is an error.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  cod.setThreshold(1e-12);
  bool ok = cod.rank() == nunk;
  if (cod.rank() == nunk - 1) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd z = svd.matrixV().col(nunk - 1);
    ok = true;
    for (int c = 0; c < nc; ++c) {
      const auto blk = z.segment<4>(4 * c);
      if (std::abs(blk[0]) > 1e-8 || std::abs(blk[3]) > 1e-8 || std::abs(blk[1] + blk[2]) > 1e-8) ok = false;
    }
  }
  const Eigen::MatrixXd x = cod.solve(rhs);
  if (!ok || !x.allFinite()) {
    std::ostringstream msg;
    msg << "MPSA interaction region around node " << region.node << " is singular (rank " << cod.rank()
        << " of " << nunk << ")";
    throw Error(ErrorKind::SingularLocalSystem, msg.str());
  }

  auto scatter = [&](int out_row, const Eigen::RowVectorXd& coeff, std::vector<Triplet>& cell_u,
                     std::vector<Triplet>& cell_s, std::vector<Triplet>& bnd) {
    for (int j = 0; j < nc; ++j) {
      for (int d = 0; d < 2; ++d)
        if (coeff[2 * j + d] != 0.0) cell_u.emplace_back(out_row, 2 * region.cells[j] + d, coeff[2 * j + d]);
      if (coeff[col_s + j] != 0.0) cell_s.emplace_back(out_row, region.cells[j], coeff[col_s + j]);
    }
    for (int k = 0; k < nfaces; ++k)
      if (bnd_col[k] >= 0)
        for (int d = 0; d < 2; ++d) {
          const double v = coeff[col_b + 2 * bnd_col[k] + d];
          if (v != 0.0) bnd.emplace_back(out_row, 2 * region.faces[k] + d, v);
        }
  };

  for (int i = 0; i < nfaces; ++i) {
    const int f = region.faces[i];
    const Point n = 0.5 * g.face_normals[f];
    const Point xcp = detail::continuity_point(g, f, region.node, eta);
    const int c0 = g.face_cells[f][0];
    const int l0 = region.local_cell(c0);
    const bool boundary = g.face_cells[f][1] < 0;

    // Traction on the sub-face, seen from the first cell.
    const Mat24 t0 = traction_map(n, lambda, mu);
    const Eigen::MatrixXd tcoef = t0 * x.middleRows(4 * l0, 4);
    for (int d = 0; d < 2; ++d) {
      if (boundary && bc.kind[f][d] == BcKind::Neumann) {
        out.bound_stress.emplace_back(2 * f + d, 2 * f + d, 0.5);
        continue;
      }
      Eigen::RowVectorXd coeff = tcoef.row(d);
      coeff[col_s + l0] -= n[d];
      scatter(2 * f + d, coeff, out.stress, out.scalar_stress, out.bound_stress);
    }

    // Displacement at the continuity point enters the volumetric strain of
    // every cell sharing the sub-face.
    for (int c : g.face_cells[f]) {
      if (c < 0) continue;
      const int lc = region.local_cell(c);
      const Mat24 dm = displacement_map(xcp - g.cell_centers[c]);
      Eigen::MatrixXd ucoef = dm * x.middleRows(4 * lc, 4);
      ucoef(0, 2 * lc) += 1.0;
      ucoef(1, 2 * lc + 1) += 1.0;
      const Point sn = g.sign(c, f) * n;
      const Eigen::RowVectorXd coeff = sn.transpose() * ucoef;
      scatter(c, coeff, out.div_u, out.stab, out.bound_div_u);
    }
  }
}

}  // namespace

StressDiscretization mpsa_biot_discretize(const SubdomainGrid& grid, double lame_lambda,
                                          double shear_modulus, const VectorBc& bc,
                                          const MpfaOptions& options) {
  if (grid.dim != 2) throw Error(ErrorKind::ShapeMismatch, "MPSA requires a 2D grid");
  if (static_cast<int>(bc.kind.size()) != grid.num_faces())
    throw Error(ErrorKind::ShapeMismatch, "boundary data do not match the grid");
  Triplets t;
  for (const auto& region : detail::interaction_regions(grid)) {
    if (region.cells.empty()) continue;
    assemble_region(grid, region, lame_lambda, shear_modulus, bc, options.eta, t);
  }
  const int nf = grid.num_faces(), nc = grid.num_cells();
  StressDiscretization d;
  auto build = [](SpMat& m, Index rows, Index cols, std::vector<Triplet>& trip) {
    m.resize(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
  };
  build(d.stress, 2 * nf, 2 * nc, t.stress);
  build(d.bound_stress, 2 * nf, 2 * nf, t.bound_stress);
  build(d.scalar_stress, 2 * nf, nc, t.scalar_stress);
  build(d.div_u, nc, 2 * nc, t.div_u);
  build(d.bound_div_u, nc, 2 * nf, t.bound_div_u);
  build(d.stabilization, nc, nc, t.stab);
  return d;
}

}  // namespace fracthm
