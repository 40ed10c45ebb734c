#include "fracthm/verify.hpp"

#include "fracthm/errors.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace fracthm::verify {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

// Runs `body` and stamps the elapsed wall time. Library errors are reported
// as a failed check instead of escaping.
CheckResult timed(int id, const std::string& name, const std::function<void(CheckResult&)>& body,
                  double time_limit = 0.0) {
  CheckResult r;
  r.id = id;
  r.name = name;
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  if (time_limit > 0) {
    r.detail += "; runtime limit " + fmt("%g", time_limit) + " s";
    if (r.seconds > time_limit) r.passed = false;
  }
  return r;
}

Vec solve_sparse(const SpMat& a, const Vec& b) {
  Eigen::SparseMatrix<double> m(a);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(m);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::LinearSolveFailure, "patch test system is singular");
  return lu.solve(b);
}

// Pressure that is linear on each side of x = 1/2 with conductivity 1 on the
// left and 2 on the right; the normal flux is continuous across the interface.
struct PiecewiseLinear {
  static double k(const Point& x) { return x.x() < 0.5 ? 1.0 : 2.0; }
  static double p(const Point& x) {
    return x.x() < 0.5 ? x.x() + 0.3 * x.y() : 0.5 + 0.5 * (x.x() - 0.5) + 0.3 * x.y();
  }
  static Point flux(const Point& x) {
    const Point g = x.x() < 0.5 ? Point(1.0, 0.3) : Point(0.5, 0.3);
    return -k(x) * g;
  }
};

Eigen::Matrix2d linear_stress(const Eigen::Matrix2d& grad, double lambda, double mu) {
  const Eigen::Matrix2d eps = 0.5 * (grad + grad.transpose());
  return 2 * mu * eps + lambda * eps.trace() * Eigen::Matrix2d::Identity();
}

// Face tractions of u = grad x + shift under Neumann data taken from the
// exact stress; returns max |t - t_exact| and max |t_exact|.
std::pair<double, double> mpsa_traction_error(const SubdomainGrid& g, const Eigen::Matrix2d& grad,
                                              const Point& shift, double lambda, double mu) {
  const Eigen::Matrix2d sigma = linear_stress(grad, lambda, mu);
  auto bc = VectorBc::all(g, BcKind::Neumann);
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_cells[f][1] < 0) bc.value.segment<2>(2 * f) = sigma * g.face_normals[f];
  const auto disc = mpsa_biot_discretize(g, lambda, mu, bc);
  Vec u(2 * g.num_cells());
  for (int c = 0; c < g.num_cells(); ++c) u.segment<2>(2 * c) = grad * g.cell_centers[c] + shift;
  const Vec t = disc.stress * u + disc.bound_stress * bc.value;
  double err = 0.0, scale = 0.0;
  for (int f = 0; f < g.num_faces(); ++f) {
    const Point exact = sigma * g.face_normals[f];
    err = std::max(err, (t.segment<2>(2 * f) - exact).norm());
    scale = std::max(scale, exact.norm());
  }
  return {err, scale};
}

double l2(const std::vector<double>& w, const Vec& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += w[i] * v[i] * v[i];
  return std::sqrt(s);
}

// Runs one phase and hands the states at the requested times to `sample`.
void run_and_sample(const MixedDimGrid& grid, const MaterialParams& prm, const BoundaryConditionSet& bc, double dt,
                    const std::vector<double>& times, const std::function<void(const Model&, const State&, int)>& sample) {
  Phase ph{"run", 0.0, times.back(), dt, bc};
  std::size_t next = 0;
  auto observer = [&](const Model& m, const State& s, const StepDiagnostics&) {
    if (next < times.size() && std::abs(s.time - times[next]) <= 1e-6 * dt) sample(m, s, static_cast<int>(next++));
  };
  run_simulation(grid, prm, {ph}, SolverControls{}, {}, observer);
  if (next != times.size()) throw Error(ErrorKind::ValidationError, "sample times are not multiples of dt");
}

}  // namespace

MixedDimGrid perturbed_grid(int n, unsigned seed, double amplitude) {
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

CheckResult mpfa_patch_test() {
  return timed(1, "MPFA patch test", [](CheckResult& r) {
    const auto grid = perturbed_grid(16, 11);
    const auto& g = grid.matrix();
    std::vector<Eigen::Matrix2d> k;
    for (const auto& c : g.cell_centers) k.push_back(PiecewiseLinear::k(c) * Eigen::Matrix2d::Identity());
    auto bc = ScalarBc::all(g, BcKind::Neumann);
    for (int f = 0; f < g.num_faces(); ++f)
      if (g.face_cells[f][1] < 0)
        bc.value[f] = PiecewiseLinear::flux(g.cell_centers[g.face_cells[f][0]]).dot(g.face_normals[f]);
    const auto disc = mpfa_discretize(g, k, bc);

    Vec p_exact(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c) p_exact[c] = PiecewiseLinear::p(g.cell_centers[c]);
    Vec q_exact(g.num_faces());
    for (int f = 0; f < g.num_faces(); ++f)
      q_exact[f] = PiecewiseLinear::flux(g.cell_centers[g.face_cells[f][0]]).dot(g.face_normals[f]);

    // Fluxes of the exact cell values, and of the solution with one pinned cell.
    const Vec q = disc.flux * p_exact + disc.bound_flux * bc.value;
    SpMat a = SpMat(g.divergence() * disc.flux);
    Vec rhs = -(g.divergence() * (disc.bound_flux * bc.value));
    a.prune([](Index row, Index, double) { return row != 0; });
    a.coeffRef(0, 0) = 1.0;
    rhs[0] = p_exact[0];
    const Vec p = solve_sparse(a, rhs);
    const Vec q_solved = disc.flux * p + disc.bound_flux * bc.value;

    const double scale = q_exact.lpNorm<Eigen::Infinity>();
    const double err = std::max((q - q_exact).lpNorm<Eigen::Infinity>(),
                                (q_solved - q_exact).lpNorm<Eigen::Infinity>()) / scale;
    r.passed = err <= 1e-10;
    r.detail = "16x16 perturbed grid, relative flux error " + sci(err) + " (limit 1e-10)";
  }, 5.0);
}

CheckResult mpsa_patch_test() {
  return timed(2, "MPSA patch test", [](CheckResult& r) {
    const auto grid = perturbed_grid(16, 8);
    const auto& g = grid.matrix();
    const Eigen::Matrix2d grad = (Eigen::Matrix2d() << 0.3, -0.7, 0.2, 1.1).finished();
    const auto [err, scale] = mpsa_traction_error(g, grad, Point(0.4, -0.2), 1.0, 2.0);
    const double linear = err / scale;

    // Rigid modes: two translations and a rotation, all stress free.
    double rigid = 0.0;
    const Eigen::Matrix2d rot = (Eigen::Matrix2d() << 0, -1, 1, 0).finished();
    rigid = std::max(rigid, mpsa_traction_error(g, Eigen::Matrix2d::Zero(), Point(1, 0), 2.0, 1.5).first);
    rigid = std::max(rigid, mpsa_traction_error(g, Eigen::Matrix2d::Zero(), Point(0, 1), 2.0, 1.5).first);
    rigid = std::max(rigid, mpsa_traction_error(g, rot, Point::Zero(), 2.0, 1.5).first);
    r.passed = linear <= 1e-9 && rigid <= 1e-10;
    r.detail = "linear field relative traction error " + sci(linear) + " (limit 1e-9), rigid modes " + sci(rigid) +
               " (limit 1e-10)";
  }, 5.0);
}

CheckResult two_point_equivalence() {
  return timed(3, "two-point equivalence", [](CheckResult& r) {
    const auto grid = equilateral_grid(8);
    const auto& g = grid.matrix();
    const double kappa = 1.7;
    const std::vector<Eigen::Matrix2d> k(g.num_cells(), kappa * Eigen::Matrix2d::Identity());
    const auto bc = ScalarBc::all(g, BcKind::Dirichlet);
    const auto mpfa = mpfa_discretize(g, k, bc, MpfaOptions{0.0});

    // Two-point transmissibilities from the geometry: the half distances are
    // the perpendicular distances from the cell centres to the face line.
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(g.num_faces(), g.num_cells());
    Eigen::VectorXd oracle_bound = Eigen::VectorXd::Zero(g.num_faces());
    for (int f = 0; f < g.num_faces(); ++f) {
      const double area = g.face_areas[f];
      const Point unit = g.face_normals[f] / g.face_normals[f].norm();
      const int a = g.face_cells[f][0], b = g.face_cells[f][1];
      const double da = std::abs((g.face_centers[f] - g.cell_centers[a]).dot(unit));
      if (b < 0) {
        oracle(f, a) = kappa * area / da;
        oracle_bound[f] = -kappa * area / da;
      } else {
        const double db = std::abs((g.face_centers[f] - g.cell_centers[b]).dot(unit));
        const double t = kappa * area / (da + db);
        oracle(f, a) = t;
        oracle(f, b) = -t;
      }
    }
    const Eigen::MatrixXd flux = Eigen::MatrixXd(mpfa.flux);
    const Eigen::MatrixXd bound = Eigen::MatrixXd(mpfa.bound_flux);
    const double scale = oracle.cwiseAbs().maxCoeff();
    double err = (flux - oracle).cwiseAbs().maxCoeff();
    err = std::max(err, (bound.diagonal() - oracle_bound).cwiseAbs().maxCoeff());
    err = std::max(err, (bound - Eigen::MatrixXd(bound.diagonal().asDiagonal())).cwiseAbs().maxCoeff());
    err /= scale;
    r.passed = err <= 1e-10;
    r.detail = "equilateral lattice, max relative transmissibility difference " + sci(err) + " (limit 1e-10)";
  });
}

double terzaghi_pressure(double depth, double height, double cv, double time, double p0, int terms) {
  double p = 0.0;
  for (int m = 0; m < terms; ++m) {
    const double k = (2 * m + 1) * std::numbers::pi;
    p += 4.0 * p0 / k * std::sin(k * depth / (2 * height)) * std::exp(-k * k * cv * time / (4 * height * height));
  }
  return p;
}

std::vector<TerzaghiSample> run_terzaghi(int cells) {
  const double height = 1.0, load = 1e6;
  const auto grid = build_structured(Box{Point(0, 0), Point(0.1, height)}, 2, cells, {});
  const auto& g = grid.matrix();

  MaterialParams prm;
  prm.solid_thermal_expansion = 0.0;
  prm.fluid_thermal_expansion = 0.0;
  const double m_modulus = prm.lame_lambda + 2 * prm.shear_modulus;  // constrained modulus
  const double storage = prm.matrix_storage();
  // Unit consolidation coefficient.
  prm.permeability = prm.viscosity * (storage + prm.biot_alpha * prm.biot_alpha / m_modulus);
  const double cv = 1.0;
  const double p0 = prm.biot_alpha * load / (storage * m_modulus + prm.biot_alpha * prm.biot_alpha);

  BoundaryConditionSet bc{VectorBc::all(g, BcKind::Neumann), ScalarBc::all(g, BcKind::Neumann),
                          ScalarBc::all(g, BcKind::Neumann)};
  for (int f = 0; f < g.num_faces(); ++f) {
    switch (g.face_sides[f]) {
      case BoundarySide::Left:
      case BoundarySide::Right: bc.mechanics.kind[f] = {BcKind::Dirichlet, BcKind::Neumann}; break;
      case BoundarySide::Bottom: bc.mechanics.kind[f] = {BcKind::Dirichlet, BcKind::Dirichlet}; break;
      case BoundarySide::Top:
        bc.mechanics.value[2 * f + 1] = -load * g.face_areas[f];
        bc.flow.kind[f] = BcKind::Dirichlet;
        break;
      case BoundarySide::None: break;
    }
  }

  const std::vector<double> times = {0.1, 0.3, 0.7};
  const double dt = 0.001;
  std::vector<TerzaghiSample> out;
  run_and_sample(grid, prm, bc, dt, times, [&](const Model& m, const State& s, int i) {
    const auto& pb = m.dofs().subdomain(0, Var::Pressure);
    Vec err(g.num_cells()), ref(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c) {
      ref[c] = terzaghi_pressure(height - g.cell_centers[c].y(), height, cv, times[i], p0);
      err[c] = s.x[pb.offset + c] - ref[c];
    }
    out.push_back({times[i], l2(g.cell_volumes, err) / l2(g.cell_volumes, ref)});
  });
  return out;
}

CheckResult terzaghi_consolidation() {
  return timed(4, "Terzaghi consolidation", [](CheckResult& r) {
    const auto samples = run_terzaghi();
    std::ostringstream d;
    d << "relative L2 error";
    double worst = 0.0;
    for (const auto& s : samples) {
      d << " t*=" << s.dimensionless_time << ": " << fmt("%.2f%%", 100 * s.relative_l2) << ";";
      worst = std::max(worst, s.relative_l2);
    }
    d << " limit 2%";
    r.passed = samples.size() == 3 && worst <= 0.02;
    r.detail = d.str();
  }, 60.0);
}

std::vector<ConductionSample> run_conduction(int cells) {
  const double length = 1.0, drop = -100.0;
  const auto grid = build_structured(Box{Point(0, 0), Point(length, 0.02)}, cells, 2, {});
  const auto& g = grid.matrix();

  MaterialParams prm;
  prm.solid_thermal_expansion = 0.0;
  prm.fluid_thermal_expansion = 0.0;
  // Unit diffusivity.
  prm.thermal_conductivity = prm.density * prm.heat_capacity;
  const double diffusivity = 1.0;
  const double t0 = prm.reference_temperature;

  BoundaryConditionSet bc{VectorBc::all(g, BcKind::Dirichlet), ScalarBc::all(g, BcKind::Dirichlet),
                          ScalarBc::all(g, BcKind::Neumann)};
  for (int f = 0; f < g.num_faces(); ++f)
    if (g.face_sides[f] == BoundarySide::Left) {
      bc.heat.kind[f] = BcKind::Dirichlet;
      bc.heat.value[f] = t0 + drop;
    }

  // Sampled while the front 2 sqrt(a t) is at most a fifth of the strip.
  const std::vector<double> times = {0.0025, 0.005, 0.01};
  const double dt = 2.5e-5;
  std::vector<ConductionSample> out;
  run_and_sample(grid, prm, bc, dt, times, [&](const Model& m, const State& s, int i) {
    const auto& tb = m.dofs().subdomain(0, Var::Temperature);
    Vec err(g.num_cells()), ref(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c) {
      ref[c] = drop * std::erfc(g.cell_centers[c].x() / (2 * std::sqrt(diffusivity * times[i])));
      err[c] = s.x[tb.offset + c] - t0 - ref[c];
    }
    out.push_back({times[i], 2 * std::sqrt(diffusivity * times[i]), l2(g.cell_volumes, err) / l2(g.cell_volumes, ref)});
  });
  return out;
}

CheckResult transient_conduction() {
  return timed(5, "transient conduction", [](CheckResult& r) {
    const auto samples = run_conduction();
    std::ostringstream d;
    d << "relative L2 error";
    double worst = 0.0;
    for (const auto& s : samples) {
      d << " front " << s.front << ": " << fmt("%.2f%%", 100 * s.relative_l2) << ";";
      worst = std::max(worst, s.relative_l2);
    }
    d << " limit 2%";
    r.passed = samples.size() == 3 && worst <= 0.02;
    r.detail = d.str();
  });
}

CheckResult conservation_audit(const std::vector<std::pair<std::string, std::vector<StepDiagnostics>>>& runs,
                               double tolerance) {
  return timed(6, "conservation audit", [&](CheckResult& r) {
    // A step's imbalance is measured against the larger of its own term
    // magnitudes and the largest among the steps of its phase. Near a steady
    // state every term of a step tends to zero while the round-off of the
    // operators stays at the level set by the phase's fields, so the step's
    // own scale alone becomes 0/0.
    double worst_mass = 0.0, worst_energy = 0.0, strict_mass = 0.0, strict_energy = 0.0;
    int steps = 0;
    std::ostringstream d;
    for (const auto& [name, diags] : runs) {
      std::map<int, std::pair<double, double>> phase_scale;
      for (const auto& s : diags) {
        auto& ps = phase_scale[s.phase];
        ps.first = std::max(ps.first, s.balance.mass_scale);
        ps.second = std::max(ps.second, s.balance.energy_scale);
      }
      for (const auto& s : diags) {
        const auto& ps = phase_scale[s.phase];
        const auto& b = s.balance;
        worst_mass = std::max(worst_mass, ps.first > 0 ? b.mass_imbalance / ps.first : 0.0);
        worst_energy = std::max(worst_energy, ps.second > 0 ? b.energy_imbalance / ps.second : 0.0);
        strict_mass = std::max(strict_mass, b.mass_relative());
        strict_energy = std::max(strict_energy, b.energy_relative());
        ++steps;
      }
      d << name << " ";
    }
    r.passed = steps > 0 && worst_mass <= tolerance && worst_energy <= tolerance;
    r.detail = d.str() + "(" + std::to_string(steps) + " steps): max mass " + sci(worst_mass) + ", energy " +
               sci(worst_energy) + " relative to phase scale (limit " + sci(tolerance) +
               "); relative to the step's own terms: mass " + sci(strict_mass) + ", energy " + sci(strict_energy);
  });
}

ShearSweep run_shear_sweep(const std::vector<double>& shears, double compression, int resolution, double contact_c,
                           double tolerance) {
  FractureNetwork net;
  net.segments = {{Point(0.2, 0.5), Point(0.8, 0.5)}};
  const MixedDimGrid grid = build_structured(net.domain, resolution, resolution, net);
  const auto& g = grid.matrix();
  MaterialParams prm;
  prm.biot_alpha = 0.0;
  SolverControls controls;
  controls.tolerance = tolerance;
  ModelOptions options;
  options.contact_c = contact_c;
  const int sd = grid.fracture_subdomains().front();

  ShearSweep sweep;
  for (double shear : shears) {
    BoundaryConditionSet bc{VectorBc::all(g, BcKind::Neumann), ScalarBc::all(g, BcKind::Dirichlet, 0.0),
                            ScalarBc::all(g, BcKind::Dirichlet, prm.reference_temperature)};
    for (int f = 0; f < g.num_faces(); ++f) {
      if (g.face_sides[f] == BoundarySide::Bottom) bc.mechanics.kind[f] = {BcKind::Dirichlet, BcKind::Dirichlet};
      if (g.face_sides[f] == BoundarySide::Top) {
        bc.mechanics.kind[f] = {BcKind::Dirichlet, BcKind::Dirichlet};
        bc.mechanics.value.segment<2>(2 * f) = Point(shear, -compression);
      }
    }
    const Model model(grid, prm, bc, options);
    const State s0 = model.initial_state();
    const StepResult res = newton_solve_timestep(model, s0, 1.0, controls);
    ShearPoint pt;
    pt.shear = shear;
    pt.iterations = res.iterations;
    pt.cells = model.contact_states(sd, res.state.x, s0);
    pt.regimes = res.regime_history.back()[sd];
    for (const auto& map : res.regime_history) {
      const auto& regs = map[sd];
      int counted = 0;
      for (Regime reg : regs) counted += reg == Regime::Open || reg == Regime::Stick || reg == Regime::Slide;
      pt.partitioned = pt.partitioned && static_cast<int>(regs.size()) == grid.subdomains[sd].num_cells() &&
                       counted == static_cast<int>(regs.size());
    }
    pt.kkt = check_kkt(pt.cells, pt.regimes, prm.friction_coefficient, 1e-6, prm.shear_modulus);
    for (std::size_t i = 0; i < pt.cells.size(); ++i) {
      pt.n_open += pt.regimes[i] == Regime::Open;
      pt.n_stick += pt.regimes[i] == Regime::Stick;
      pt.n_slide += pt.regimes[i] == Regime::Slide;
      const auto& c = pt.cells[i];
      if (pt.regimes[i] != Regime::Open && c.lambda_n < 0)
        pt.max_friction_ratio =
            std::max(pt.max_friction_ratio, std::abs(c.lambda_t) / (-prm.friction_coefficient * c.lambda_n));
    }
    pt.x = res.state.x;
    sweep.points.push_back(std::move(pt));
  }

  for (std::size_t k = 0; k < sweep.points.size(); ++k)
    if (sweep.points[k].n_slide > 0) {
      sweep.first_slide = static_cast<int>(k);
      break;
    }

  // With a fixed active set the stick response is affine in the load, so two
  // stick states determine where |lambda_t| first meets -F lambda_n.
  sweep.predicted_onset = std::numeric_limits<double>::quiet_NaN();
  if (sweep.first_slide >= 2) {
    const auto& a = sweep.points[sweep.first_slide - 2];
    const auto& b = sweep.points[sweep.first_slide - 1];
    const double f = prm.friction_coefficient;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      if (a.regimes[i] == Regime::Open || b.regimes[i] == Regime::Open) continue;
      const double lt0 = a.cells[i].lambda_t, dlt = b.cells[i].lambda_t - lt0;
      const double ln0 = a.cells[i].lambda_n, dln = b.cells[i].lambda_n - ln0;
      // sign * (lt0 + k dlt) = -F (ln0 + k dln) for k > 0.
      for (double sign : {1.0, -1.0}) {
        const double denom = sign * dlt + f * dln;
        if (std::abs(denom) < 1e-300) continue;
        const double k = -(sign * lt0 + f * ln0) / denom;
        if (k > 0) best = std::min(best, a.shear + k * (b.shear - a.shear));
      }
    }
    if (std::isfinite(best)) sweep.predicted_onset = best;
  }
  return sweep;
}

CheckResult contact_kkt_sweep() {
  return timed(7, "contact KKT sweep", [](CheckResult& r) {
    std::vector<double> shears;
    for (int k = 0; k < 10; ++k) shears.push_back(2e-4 * k);
    const auto sweep = run_shear_sweep(shears);
    double worst = 0.0;
    int max_it = 0;
    for (const auto& p : sweep.points) {
      worst = std::max(worst, p.kkt.worst());
      max_it = std::max(max_it, p.iterations);
    }
    bool bracketed = false;
    std::ostringstream d;
    d << "10 shears up to " << shears.back() << " m: max scaled KKT violation " << sci(worst) << " (limit 1e-8)";
    if (sweep.first_slide >= 2 && std::isfinite(sweep.predicted_onset)) {
      const double lo = sweep.points[sweep.first_slide - 1].shear, hi = sweep.points[sweep.first_slide].shear;
      bracketed = sweep.predicted_onset > lo && sweep.predicted_onset <= hi;
      d << "; first slide at shear " << hi << ", bound reached at " << fmt("%.4g", sweep.predicted_onset)
        << " within (" << lo << ", " << hi << "]";
    } else {
      d << "; no stick-to-slide transition with two stick loads before it";
    }
    d << "; Newton iterations <= " << max_it;
    r.passed = worst <= 1e-8 && bracketed;
    r.detail = d.str();
  });
}

CheckResult slide_fixed_point(unsigned seed, int samples) {
  return timed(8, "slide row fixed point", [&](CheckResult& r) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit(rng)); };

    std::vector<ContactCellState> cells;
    std::vector<double> friction, c;
    for (int i = 0; i < samples; ++i) {
      ContactCellState s;
      const double f = log_uniform(0.05, 2.0);
      s.lambda_n = -log_uniform(1e-3, 1e3);
      s.jump_n = 0.0;
      s.delta_jump_t = (unit(rng) < 0.5 ? -1.0 : 1.0) * log_uniform(1e-6, 1e-1);
      s.jump_t = s.delta_jump_t + (unit(rng) - 0.5) * 1e-2;
      s.lambda_t = f * s.lambda_n * (s.delta_jump_t > 0 ? 1.0 : -1.0);  // opposes the slip, magnitude b
      cells.push_back(s);
      friction.push_back(f);
      c.push_back(log_uniform(1e-2, 1e4));
    }

    double worst = 0.0;
    int not_slide = 0;
    for (int i = 0; i < samples; ++i) {
      const auto& s = cells[i];
      const Regime reg = linearization_regime(s, friction[i], c[i], 1.0);
      if (reg != Regime::Slide) {
        ++not_slide;
        continue;
      }
      // The assembled rows evaluated at the state they were linearised at.
      Vec x(4);
      x << s.jump_n, s.delta_jump_t, s.lambda_n, s.lambda_t;
      const auto res = assemble_contact_equations(
          {reg}, {s}, ad::AdArray::variable(x, 0, 1), ad::AdArray::variable(x, 1, 1), ad::AdArray::variable(x, 2, 1),
          ad::AdArray::variable(x, 3, 1), friction[i], c[i], 1.0);
      worst = std::max(worst, res.val().cwiseAbs().maxCoeff() / std::abs(s.lambda_n));
    }
    r.passed = not_slide == 0 && worst <= 1e-12;
    r.detail = std::to_string(samples) + " random Coulomb sliding states: max residual / |lambda_n| " + sci(worst) +
               " (limit 1e-12), " + std::to_string(not_slide) + " misclassified";
  });
}

CheckResult partition_and_c_invariance() {
  return timed(9, "active-set partition and c-invariance", [](CheckResult& r) {
    const double tol = 1e-10;
    const std::vector<double> shears = {1.2e-3, 2e-3};
    // Default c is 100 G / h with h = 1/20; compare against ten times that.
    const double c_default = 100 * MaterialParams{}.shear_modulus * 20;
    const auto base = run_shear_sweep(shears, 1e-3, 20, c_default, tol);
    const auto big = run_shear_sweep(shears, 1e-3, 20, 10 * c_default, tol);

    bool partition = true;
    double worst_diff = 0.0;
    bool same_regimes = true;
    for (std::size_t k = 0; k < shears.size(); ++k) {
      for (const auto* sw : {&base, &big}) {
        const auto& p = sw->points[k];
        partition = partition && p.partitioned;
      }
      same_regimes = same_regimes && base.points[k].regimes == big.points[k].regimes;
      // Displacements are scaled by 1e-6 m, tractions by the shear modulus.
      const auto& a = base.points[k].cells;
      const auto& b = big.points[k].cells;
      const double g = MaterialParams{}.shear_modulus;
      for (std::size_t i = 0; i < a.size(); ++i) {
        worst_diff = std::max({worst_diff, std::abs(a[i].jump_n - b[i].jump_n) / 1e-6,
                               std::abs(a[i].jump_t - b[i].jump_t) / 1e-6, std::abs(a[i].lambda_n - b[i].lambda_n) / g,
                               std::abs(a[i].lambda_t - b[i].lambda_t) / g});
      }
    }
    r.passed = partition && same_regimes && worst_diff <= 1e-8;
    r.detail = std::string("regimes partition every cell at every iteration: ") + (partition ? "yes" : "no") +
               "; c vs 10c converged regimes " + (same_regimes ? "identical" : "differ") +
               ", max scaled contact difference " + sci(worst_diff) + " (limit 1e-8)";
  });
}

std::vector<CheckResult> run_oracle_suites() {
  return {mpfa_patch_test(),   mpsa_patch_test(),      two_point_equivalence(), terzaghi_consolidation(),
          transient_conduction(), contact_kkt_sweep(), slide_fixed_point(),     partition_and_c_invariance()};
}

std::string format_result(const CheckResult& r) {
  std::ostringstream out;
  out << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " ("
      << fmt("%.2f", r.seconds) << " s)";
  return out.str();
}

}  // namespace fracthm::verify
