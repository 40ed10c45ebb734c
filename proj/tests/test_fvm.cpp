#include "fracthm/errors.hpp"
#include "fracthm/fvm.hpp"

#include <doctest.h>

#include <Eigen/SparseLU>

#include <cmath>
#include <random>
#include <set>

using namespace fracthm;

namespace {

// 16 x 16 lattice with interior nodes moved randomly, except the nodes on
// the line x = 0.5 which only move vertically.
MixedDimGrid perturbed_grid(int n, unsigned seed, double amplitude = 0.25) {
  auto tri = structured_triangulation(Box{}, n, n, {});
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  const double h = 1.0 / n;
  for (auto& p : tri.nodes) {
    const bool bx = p.x() < 1e-12 || p.x() > 1 - 1e-12;
    const bool by = p.y() < 1e-12 || p.y() > 1 - 1e-12;
    const bool mid = std::abs(p.x() - 0.5) < 1e-12;
    const double dx = dist(rng) * h, dy = dist(rng) * h;
    if (!bx && !mid) p.x() += dx;
    if (!by) p.y() += dy;
  }
  return build_from_triangulation(tri);
}

// Lattice of equilateral triangles on a parallelogram.
MixedDimGrid equilateral_grid(int n) {
  Triangulation tri;
  const double s = std::sqrt(3.0) / 2.0;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) tri.nodes.emplace_back(i + 0.5 * j, s * j);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      tri.triangles.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
      tri.triangles.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  tri.domain.min = Point(0, 0);
  tri.domain.max = Point(1.5 * n, s * n);
  return build_from_triangulation(tri);
}

struct Piecewise {
  double k(const Point& x) const { return x.x() < 0.5 ? 1.0 : 2.0; }
  double p(const Point& x) const {
    return x.x() < 0.5 ? x.x() + 0.3 * x.y() : 0.5 + 0.5 * (x.x() - 0.5) + 0.3 * x.y();
  }
  Point grad(const Point& x) const { return x.x() < 0.5 ? Point(1.0, 0.3) : Point(0.5, 0.3); }
  // Darcy flux -K grad p; continuous across x = 0.5.
  Point flux(const Point& x) const { return -k(x) * grad(x); }
};

Vec dense_solve(const SpMat& a, const Vec& b) {
  Eigen::SparseMatrix<double> m(a);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(m);
  REQUIRE(lu.info() == Eigen::Success);
  return lu.solve(b);
}

}  // namespace

TEST_CASE("MPFA reproduces a piecewise linear pressure") {
  const auto grid = perturbed_grid(16, 11);
  const auto& g = grid.matrix();
  const Piecewise ex;
  std::vector<Eigen::Matrix2d> k;
  for (const auto& c : g.cell_centers) k.push_back(ex.k(c) * Eigen::Matrix2d::Identity());

  auto bc = ScalarBc::all(g, BcKind::Neumann);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) {
      const Point inside = g.cell_centers[g.face_cells[f][0]];
      bc.value[f] = ex.flux(inside).dot(g.face_normals[f]);
    }
  const auto disc = mpfa_discretize(g, k, bc);

  Vec p_exact(g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c) p_exact[c] = ex.p(g.cell_centers[c]);

  SUBCASE("consistency on every face") {
    const Vec q = disc.flux * p_exact + disc.bound_flux * bc.value;
    for (int f = 0; f < g.num_faces(); ++f) {
      const Point x = g.cell_centers[g.face_cells[f][0]];
      CHECK(q[f] == doctest::Approx(ex.flux(x).dot(g.face_normals[f])).epsilon(1e-10).scale(1.0));
    }
  }

  SUBCASE("solved with one pinned cell") {
    SpMat a = SpMat(g.divergence() * disc.flux);
    Vec rhs = -(g.divergence() * (disc.bound_flux * bc.value));
    a.prune([](Index r, Index, double) { return r != 0; });
    a.coeffRef(0, 0) = 1.0;
    rhs[0] = p_exact[0];
    const Vec p = dense_solve(a, rhs);
    CHECK((p - p_exact).lpNorm<Eigen::Infinity>() < 1e-10);
  }

  SUBCASE("boundary pressure reconstruction") {
    const Vec pb = disc.bound_pressure_cell * p_exact + disc.bound_pressure_face * bc.value;
    for (int f = 0; f < g.num_faces(); ++f)
      if (g.face_cells[f][1] < 0) CHECK(pb[f] == doctest::Approx(ex.p(g.face_centers[f])).epsilon(1e-10));
  }
}

TEST_CASE("MPFA with Dirichlet data at face centres") {
  const auto grid = perturbed_grid(12, 5);
  const auto& g = grid.matrix();
  const Piecewise ex;
  std::vector<Eigen::Matrix2d> k;
  for (const auto& c : g.cell_centers) k.push_back(ex.k(c) * Eigen::Matrix2d::Identity());
  auto bc = ScalarBc::all(g, BcKind::Dirichlet);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) bc.value[f] = ex.p(g.face_centers[f]);
  // With the continuity point at the face centre a linear field is exact.
  const auto disc = mpfa_discretize(g, k, bc, MpfaOptions{0.0});
  const SpMat a = g.divergence() * disc.flux;
  const Vec rhs = -(g.divergence() * (disc.bound_flux * bc.value));
  const Vec p = dense_solve(a, rhs);
  double err = 0.0;
  for (int c = 0; c < g.num_cells(); ++c) err = std::max(err, std::abs(p[c] - ex.p(g.cell_centers[c])));
  CHECK(err < 1e-10);
}

TEST_CASE("constant pressure without boundary flux carries no flux") {
  const auto grid = perturbed_grid(8, 2);
  const auto& g = grid.matrix();
  std::vector<Eigen::Matrix2d> k(g.num_cells());
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  for (auto& m : k) {
    const double a = dist(rng), b = dist(rng), c = 0.2 * dist(rng);
    m << a, c, c, b;
  }
  const auto disc = mpfa_discretize(g, k, ScalarBc::all(g, BcKind::Neumann));
  const Vec q = disc.flux * Vec::Constant(g.num_cells(), 3.7);
  CHECK(q.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("MPFA equals two-point flux on equilateral triangles") {
  const auto grid = equilateral_grid(6);
  const auto& g = grid.matrix();
  const std::vector<Eigen::Matrix2d> k(g.num_cells(), 1.7 * Eigen::Matrix2d::Identity());
  const auto bc = ScalarBc::all(g, BcKind::Dirichlet);
  const auto mpfa = mpfa_discretize(g, k, bc, MpfaOptions{0.0});
  const auto tpfa = tpfa_discretize(g, std::vector<double>(g.num_cells(), 1.7), bc);
  CHECK(Eigen::MatrixXd(mpfa.flux - tpfa.flux).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(Eigen::MatrixXd(mpfa.bound_flux - tpfa.bound_flux).cwiseAbs().maxCoeff() < 1e-12);
  // The two-point operator is symmetric.
  const Eigen::MatrixXd a = Eigen::MatrixXd(g.divergence() * tpfa.flux);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("MPFA stencils stay within the node neighbourhood") {
  const auto grid = perturbed_grid(6, 9);
  const auto& g = grid.matrix();
  const std::vector<Eigen::Matrix2d> k(g.num_cells(), Eigen::Matrix2d::Identity());
  const auto disc = mpfa_discretize(g, k, ScalarBc::all(g, BcKind::Dirichlet));
  for (int f = 0; f < g.num_faces(); ++f) {
    std::set<int> allowed;
    for (int c = 0; c < g.num_cells(); ++c)
      for (int n : g.cell_nodes[c])
        if (n == g.face_nodes[f][0] || n == g.face_nodes[f][1]) allowed.insert(c);
    for (int c : row_pattern(disc.flux, f)) CHECK(allowed.count(c) == 1);
  }
}

TEST_CASE("MPFA rejects mismatched input") {
  const auto grid = build_structured(Box{}, 2, 2, {});
  const std::vector<Eigen::Matrix2d> k(3, Eigen::Matrix2d::Identity());
  CHECK_THROWS_AS(mpfa_discretize(grid.matrix(), k, ScalarBc::all(grid.matrix(), BcKind::Neumann)), Error);
}

namespace {

struct LinearDisplacement {
  Eigen::Matrix2d grad;
  Point u(const Point& x) const { return grad * x; }
  Eigen::Matrix2d stress(double lambda, double mu) const {
    const Eigen::Matrix2d eps = 0.5 * (grad + grad.transpose());
    return 2 * mu * eps + lambda * eps.trace() * Eigen::Matrix2d::Identity();
  }
};

void check_mpsa_consistency(const SubdomainGrid& g, const LinearDisplacement& ex, double lambda, double mu,
                            double s_value) {
  const Eigen::Matrix2d sigma = ex.stress(lambda, mu) - s_value * Eigen::Matrix2d::Identity();
  auto bc = VectorBc::all(g, BcKind::Neumann);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) bc.value.segment<2>(2 * f) = sigma * g.face_normals[f];
  const auto disc = mpsa_biot_discretize(g, lambda, mu, bc);
  Vec u(2 * g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c) u.segment<2>(2 * c) = ex.u(g.cell_centers[c]);
  const Vec s = Vec::Constant(g.num_cells(), s_value);
  const Vec t = disc.stress * u + disc.bound_stress * bc.value + disc.scalar_stress * s;
  double err = 0.0, scale = 0.0;
  for (int f = 0; f < g.num_faces(); ++f) {
    const Point exact = sigma * g.face_normals[f];
    err = std::max(err, (t.segment<2>(2 * f) - exact).norm());
    scale = std::max(scale, exact.norm());
  }
  CHECK(err <= 1e-9 * std::max(scale, 1.0));

  const Vec div = disc.div_u * u + disc.bound_div_u * bc.value + disc.stabilization * s;
  for (int c = 0; c < g.num_cells(); ++c)
    CHECK(div[c] == doctest::Approx(ex.grad.trace() * g.cell_volumes[c]).epsilon(1e-9).scale(1.0));
}

}  // namespace

TEST_CASE("MPSA uniaxial strain traction") {
  const auto grid = build_structured(Box{}, 4, 4, {});
  const auto& g = grid.matrix();
  LinearDisplacement ex{(Eigen::Matrix2d() << 1, 0, 0, 0).finished()};
  check_mpsa_consistency(g, ex, 0.0, 1.0, 0.0);
  // Directly: every internal face carries (2, 0) times its normal x-component.
  auto bc = VectorBc::all(g, BcKind::Neumann);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) bc.value[2 * f] = 2.0 * g.face_normals[f].x();
  const auto disc = mpsa_biot_discretize(g, 0.0, 1.0, bc);
  Vec u(2 * g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c) u.segment<2>(2 * c) = Point(g.cell_centers[c].x(), 0.0);
  const Vec t = disc.stress * u + disc.bound_stress * bc.value;
  for (int f = 0; f < g.num_faces(); ++f) {
    CHECK(t[2 * f] == doctest::Approx(2.0 * g.face_normals[f].x()).scale(1.0));
    CHECK(t[2 * f + 1] == doctest::Approx(0.0).scale(1.0));
  }
}

TEST_CASE("MPSA rigid rotation is stress free") {
  const auto grid = perturbed_grid(8, 4);
  LinearDisplacement ex{(Eigen::Matrix2d() << 0, -1, 1, 0).finished()};
  check_mpsa_consistency(grid.matrix(), ex, 2.0, 1.5, 0.0);
}

TEST_CASE("MPSA uniform scalar stress") {
  const auto grid = perturbed_grid(8, 6);
  LinearDisplacement ex{Eigen::Matrix2d::Zero()};
  check_mpsa_consistency(grid.matrix(), ex, 1.0, 1.0, 4.5);
}

TEST_CASE("MPSA general linear displacement on a perturbed grid") {
  const auto grid = perturbed_grid(16, 8);
  LinearDisplacement ex{(Eigen::Matrix2d() << 0.3, -0.7, 0.2, 1.1).finished()};
  check_mpsa_consistency(grid.matrix(), ex, 1.0, 2.0, 0.6);
}

TEST_CASE("MPSA Dirichlet solve reproduces a linear field") {
  const auto grid = perturbed_grid(10, 12);
  const auto& g = grid.matrix();
  const double lambda = 1.3, mu = 0.8;
  LinearDisplacement ex{(Eigen::Matrix2d() << 0.3, -0.7, 0.2, 1.1).finished()};
  auto bc = VectorBc::all(g, BcKind::Dirichlet);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) bc.value.segment<2>(2 * f) = ex.u(g.face_centers[f]);
  const auto disc = mpsa_biot_discretize(g, lambda, mu, bc, MpfaOptions{0.0});
  const SpMat a = g.vector_divergence() * disc.stress;
  const Vec rhs = -(g.vector_divergence() * (disc.bound_stress * bc.value));
  const Vec u = dense_solve(a, rhs);
  double err = 0.0;
  for (int c = 0; c < g.num_cells(); ++c)
    err = std::max(err, (u.segment<2>(2 * c) - ex.u(g.cell_centers[c])).norm());
  CHECK(err < 1e-9);
}

TEST_CASE("upwinding follows the face flux") {
  const auto grid = build_structured(Box{}, 2, 2, {});
  const auto& g = grid.matrix();
  Vec q(g.num_faces());
  for (int f = 0; f < g.num_faces(); ++f) q[f] = g.face_normals[f].dot(Point(1.0, 0.25));
  auto bc = ScalarBc::all(g, BcKind::Neumann);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_centers[f].x() < 1e-12) bc.kind[f] = BcKind::Dirichlet;
  const auto up = upwind_discretize(g, q, bc);
  for (int f = 0; f < g.num_faces(); ++f) {
    const auto [c0, c1] = g.face_cells[f];
    const auto cells = row_pattern(up.cell, f);
    const auto bnd = row_pattern(up.bound, f);
    if (c1 >= 0) {
      REQUIRE(cells.size() == 1);
      CHECK(cells[0] == (q[f] >= 0 ? c0 : c1));
    } else if (q[f] < 0 && bc.kind[f] == BcKind::Dirichlet) {
      CHECK(cells.empty());
      CHECK(bnd == std::vector<int>{f});
    } else {
      CHECK(cells == std::vector<int>{c0});
    }
  }
  CHECK_THROWS_AS(upwind_discretize(g, Vec::Zero(3), bc), Error);
}

TEST_CASE("face reconstruction validates shapes") {
  const auto grid = build_structured(Box{}, 2, 2, {});
  const auto& g = grid.matrix();
  const std::vector<Eigen::Matrix2d> k(g.num_cells(), Eigen::Matrix2d::Identity());
  const auto flow = mpfa_discretize(g, k, ScalarBc::all(g, BcKind::Neumann));
  const auto mech = mpsa_biot_discretize(g, 1.0, 1.0, VectorBc::all(g, BcKind::Neumann));
  const Index nc = g.num_cells(), nf = g.num_faces();
  CHECK_NOTHROW(reconstruct_face_quantities(flow, mech, g, Vec::Zero(2 * nc), Vec::Zero(nc), Vec::Zero(nc),
                                            Vec::Zero(nf), Vec::Zero(2 * nf)));
  try {
    reconstruct_face_quantities(flow, mech, g, Vec::Zero(nc), Vec::Zero(nc), Vec::Zero(nc), Vec::Zero(nf),
                                Vec::Zero(2 * nf));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeMismatch);
  }
}
