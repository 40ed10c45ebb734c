#include "doctest.h"

#include "fracthm/contact.hpp"
#include "fracthm/errors.hpp"

#include <random>

using namespace fracthm;

namespace {

ContactCellState cell(double ln, double lt, double jn, double jt, double djt) {
  return {ln, lt, jn, jt, djt};
}

// Residuals of both rows for a state, evaluated through the AD assembly path.
Vec assembled_residual(Regime r, const ContactCellState& s, double F, double c) {
  Vec x(4);
  x << s.jump_n, s.delta_jump_t, s.lambda_n, s.lambda_t;
  auto var = [&](Index i) { return ad::AdArray::variable(x, i, 1); };
  return assemble_contact_equations({r}, {s}, var(0), var(1), var(2), var(3), F, c, 1.0).val();
}

}  // namespace

TEST_CASE("friction bound") {
  CHECK(friction_bound(-2.0, 0.0, 0.5, 100.0) == doctest::Approx(1.0));
  CHECK(friction_bound(0.0, 0.0, 0.5, 100.0) == 0.0);
  // Closed cell: independent of c.
  CHECK(friction_bound(-3.0, 0.0, 0.4, 1.0) == friction_bound(-3.0, 0.0, 0.4, 1e6));
}

TEST_CASE("classification examples") {
  const double F = 0.5;
  CHECK(classify(cell(0, 0, 0, 0, 0), F, 10.0) == Regime::Open);
  CHECK(classify(cell(-2, 0.1, 0, 0, 0), F, 10.0) == Regime::Stick);
  CHECK(classify(cell(-2, 0.1, 0, 0, 0), F, 1e5) == Regime::Stick);
  CHECK(classify(cell(-2, 1.5, 0, 0, 0), F, 10.0) == Regime::Slide);
  // Boundary of the stick set belongs to slide.
  CHECK(classify(cell(-2, 1.0, 0, 0, 0), F, 10.0) == Regime::Slide);
  // Tension or opening beyond the penalty makes the cell open.
  CHECK(classify(cell(1.0, 0, 0, 0, 0), F, 10.0) == Regime::Open);
  CHECK(classify(cell(-1.0, 0, -0.2, 0, 0), F, 10.0) == Regime::Open);
}

TEST_CASE("partition of randomized states") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ContactCellState> cells;
  for (int i = 0; i < 500; ++i) cells.push_back(cell(u(rng), u(rng), 1e-3 * u(rng), 0.0, 1e-3 * u(rng)));
  const auto regimes = classify_states(cells, 0.6, 50.0);
  REQUIRE(regimes.size() == cells.size());
  int counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Regime r = regimes[i];
    ++counts[static_cast<int>(r)];
    // Exactly one of the set definitions holds.
    const double b = friction_bound(cells[i].lambda_n, cells[i].jump_n, 0.6, 50.0);
    const double w = std::abs(-cells[i].lambda_t + 50.0 * cells[i].delta_jump_t);
    const int hits = (b <= 0) + (b > 0 && w < b) + (b > 0 && w >= b);
    CHECK(hits == 1);
    if (b <= 0) CHECK(r == Regime::Open);
    else if (w < b) CHECK(r == Regime::Stick);
    else CHECK(r == Regime::Slide);
  }
  CHECK(counts[0] + counts[1] + counts[2] == 500);
  CHECK(counts[0] > 0);
  CHECK(counts[1] > 0);
  CHECK(counts[2] > 0);
}

TEST_CASE("constraint rows") {
  const double F = 0.5, c = 10.0;
  SUBCASE("open") {
    const auto rows = contact_rows(Regime::Open, cell(0.3, -0.2, -1e-3, 0, 0), F, c, 1.0);
    CHECK(rows.normal.residual(cell(0.3, -0.2, -1e-3, 0, 0)) == doctest::Approx(0.3));
    CHECK(rows.tangential.residual(cell(0.3, -0.2, -1e-3, 0, 0)) == doctest::Approx(-0.2));
    CHECK(rows.normal.residual(cell(0, 0, -1e-3, 0.4, 0.1)) == 0.0);
    CHECK(rows.tangential.residual(cell(0, 0, -1e-3, 0.4, 0.1)) == 0.0);
  }
  SUBCASE("stick with zero increment forbids tangential motion") {
    const auto rows = contact_rows(Regime::Stick, cell(-2, 0.1, 0, 0, 0), F, c, 1.0);
    CHECK(rows.tangential.coeff[1] == 1.0);
    CHECK(rows.tangential.coeff[2] == 0.0);
    CHECK(rows.tangential.rhs == 0.0);
    CHECK(rows.normal.coeff[0] == 1.0);
  }
  SUBCASE("stick row is the slip increment") {
    const auto s = cell(-2, 0.1, 0, 0, 1e-4);
    const auto rows = contact_rows(Regime::Stick, s, F, c, 1.0);
    CHECK(rows.tangential.residual(s) == doctest::Approx(1e-4));
  }
  SUBCASE("slide row keeps the normal jump implicit") {
    // An interpenetrating iterate must not feed c * jump_n into the traction.
    const auto s = cell(-2, 0.0, 5e-3, 0, 1e-3);
    const auto rows = contact_rows(Regime::Slide, s, F, c, 1.0);
    CHECK(rows.tangential.rhs == 0.0);
    // At jump_n = 0 the row reads lambda_t = v F (-lambda_n) with v = -1.
    CHECK(rows.tangential.residual(cell(-2, -1.0, 0, 0, 0)) == doctest::Approx(0.0));
  }
  SUBCASE("degenerate stick") {
    CHECK_THROWS_AS(contact_rows(Regime::Stick, cell(0, 0, 0, 0, 0), F, c, 1.0), Error);
    try {
      contact_rows(Regime::Stick, cell(-1e-20, 0, 0, 0, 0), F, c, 1.0);
      FAIL("expected DegenerateBound");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateBound);
    }
  }
  SUBCASE("assembly matches the per-cell rows") {
    const auto s = cell(-1.5, 0.9, 2e-4, 0.0, -3e-3);
    for (Regime r : {Regime::Open, Regime::Slide, Regime::Stick}) {
      const auto rows = contact_rows(r, s, F, c, 1.0);
      const Vec res = assembled_residual(r, s, F, c);
      CHECK(res[0] == doctest::Approx(rows.normal.residual(s)));
      CHECK(res[1] == doctest::Approx(rows.tangential.residual(s)));
    }
  }
  SUBCASE("shape mismatch") {
    Vec x = Vec::Zero(3);
    auto v = ad::AdArray::variable(x, 0, 1);
    auto w = ad::AdArray::variable(x, 0, 2);
    CHECK_THROWS_AS(assemble_contact_equations({Regime::Open}, {cell(0, 0, 0, 0, 0)}, v, v, v, w, F, c, 1.0),
                    Error);
  }
}

TEST_CASE("linearization regime") {
  const double F = 0.5, c = 10.0;
  // Slide by classify(), slip in the direction of lambda_t: taken as stick.
  const auto rev = cell(-2, 3.0, 0, 0, 0.5);
  REQUIRE(classify(rev, F, c) == Regime::Slide);
  CHECK(linearization_regime(rev, F, c, 1.0) == Regime::Stick);
  // Slip against lambda_t is a genuine slide.
  const auto fwd = cell(-2, -1.0, 0, 0, 0.5);
  CHECK(linearization_regime(fwd, F, c, 1.0) == Regime::Slide);
  // A stick cell with a round-off bound is treated as open.
  const auto weak = cell(-1e-16, 0, 0, 0, 0);
  REQUIRE(classify(weak, F, c) == Regime::Stick);
  CHECK(linearization_regime(weak, F, c, 1.0) == Regime::Open);
  CHECK(linearization_regime(cell(1, 0, 0, 0, 0), F, c, 1.0) == Regime::Open);
}

TEST_CASE("slide row fixed point on randomized Coulomb states") {
  // Any closed state obeying the Coulomb law with slip is a root of the slide
  // row built from itself, and classifies as slide.
  std::mt19937 rng(20260101);
  std::uniform_real_distribution<double> mag(0.1, 10.0), slip(1e-6, 1e-2), fric(0.1, 1.0), cc(1.0, 1e4);
  std::bernoulli_distribution sign(0.5);
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    const double F = fric(rng), c = cc(rng);
    const double ln = -mag(rng);
    const double du = (sign(rng) ? 1.0 : -1.0) * slip(rng);
    const double lt = F * ln * (du > 0 ? 1.0 : -1.0);
    const auto s = cell(ln, lt, 0.0, 0.3 * du, du);
    REQUIRE(classify(s, F, c) == Regime::Slide);
    const auto rows = contact_rows(Regime::Slide, s, F, c, 1.0);
    const double scale = std::abs(ln);
    CHECK(std::abs(rows.normal.residual(s)) <= 1e-12 * scale);
    CHECK(std::abs(rows.tangential.residual(s)) <= 1e-12 * scale);
    const Vec res = assembled_residual(Regime::Slide, s, F, c);
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-12 * scale);
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("slide row fixed point implies Coulomb law") {
  // Solving the slide row with jn = 0 gives lambda_t anti-parallel to w.
  const double F = 0.7, c = 30.0;
  for (double du : {1e-3, -1e-3}) {
    const auto s = cell(-4.0, 0.0, 0.0, 0.0, du);
    const auto rows = contact_rows(Regime::Slide, s, F, c, 1.0);
    // lambda_t = (rhs - F v lambda_n) / 1 with jn = 0.
    const double lt = rows.tangential.rhs - rows.tangential.coeff[2] * s.lambda_n;
    CHECK(lt == doctest::Approx(F * s.lambda_n * (du > 0 ? 1.0 : -1.0)));
  }
}

TEST_CASE("traction balance rows") {
  const std::vector<Point> normals{Point(0, 1), Point(0, 1)};
  const std::vector<double> meas{0.5, 0.5};
  const std::vector<Side> sides{Side::Plus, Side::Minus};
  const Index N = 1;
  auto cst = [&](std::initializer_list<double> v) {
    Vec x(v.size());
    Index i = 0;
    for (double d : v) x[i++] = d;
    return ad::AdArray::constant(x, N);
  };
  SUBCASE("pressure-supported fracture has zero contact traction") {
    // Matrix stress -p I on both surfaces; the + face has outward normal +n.
    const double p = 3.0;
    const auto T = cst({0, -p * 0.5, 0, p * 0.5});
    const auto res = traction_balance_rows(T, cst({0, 0, 0, 0}), cst({p, p}), normals, meas, sides);
    CHECK(res.val().cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("zero fracture pressure gives lambda equal to the face traction") {
    const Vec t(Eigen::Vector2d(0.4, -1.0));
    const Vec lam = t;  // traction per unit length acting on the + surface
    const auto T = cst({lam[0] * 0.5, lam[1] * 0.5, -lam[0] * 0.5, -lam[1] * 0.5});
    const auto res =
        traction_balance_rows(T, cst({lam[0], lam[1], lam[0], lam[1]}), cst({0, 0}), normals, meas, sides);
    CHECK(res.val().cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(traction_balance_rows(cst({0, 0}), cst({0, 0, 0, 0}), cst({0, 0}), normals, meas, sides),
                    Error);
  }
}

TEST_CASE("KKT report") {
  const double F = 0.5;
  std::vector<ContactCellState> cells{cell(0, 0, -1e-3, 0, 0), cell(-2, 0.5, 0, 0, 0),
                                      cell(-2, -1.0, 0, 0, 1e-3)};
  std::vector<Regime> regimes{Regime::Open, Regime::Stick, Regime::Slide};
  auto r = check_kkt(cells, regimes, F, 1e-3, 1.0);
  CHECK(r.worst() < 1e-14);
  // Slip in the direction of the traction violates the orientation.
  cells[2].delta_jump_t = -1e-3;
  r = check_kkt(cells, regimes, F, 1e-3, 1.0);
  CHECK(r.max_slide_misalignment == doctest::Approx(2.0));
  cells[2].delta_jump_t = 1e-3;
  cells[0].lambda_n = -0.1;  // compression with an open gap
  r = check_kkt(cells, regimes, F, 1e-3, 1.0);
  CHECK(r.max_complementarity == doctest::Approx(0.1));
}
