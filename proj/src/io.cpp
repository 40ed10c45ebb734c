#include "fracthm/io.hpp"

#include "fracthm/errors.hpp"

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace fracthm {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

// ---------------------------------------------------------------------------
// Reading

[[noreturn]] void parse_error(const YAML::Node& node, const std::string& msg) {
  std::ostringstream s;
  if (node.IsDefined() && !node.Mark().is_null()) s << "line " << node.Mark().line + 1 << ": ";
  s << msg;
  throw Error(ErrorKind::ParseError, s.str());
}

[[noreturn]] void invalid(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::ValidationError, field + " " + msg);
}

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

void expect_map(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) parse_error(n, where.empty() ? "document must be a mapping" : where + " must be a mapping");
}

void check_keys(const YAML::Node& map, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) parse_error(kv.first, "unknown key '" + join(where, key) + "'");
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) parse_error(n, field + " must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    parse_error(n, field + " has an invalid value '" + n.Scalar() + "'");
  }
}

template <class T>
void read_opt(const YAML::Node& map, const char* key, const std::string& where, T& out) {
  if (const auto n = map[key]) out = scalar<T>(n, join(where, key));
}

template <class T>
T read_req(const YAML::Node& map, const char* key, const std::string& where) {
  const auto n = map[key];
  if (!n) invalid(join(where, key), "is required");
  return scalar<T>(n, join(where, key));
}

Point read_point(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence() || n.size() != 2) parse_error(n, field + " must be a pair [x, y]");
  return {scalar<double>(n[0], field), scalar<double>(n[1], field)};
}

BcKind read_kind(const YAML::Node& n, const std::string& field) {
  const auto s = scalar<std::string>(n, field);
  if (s == "dirichlet") return BcKind::Dirichlet;
  if (s == "neumann") return BcKind::Neumann;
  parse_error(n, field + " must be 'dirichlet' or 'neumann', got '" + s + "'");
}

const char* kind_name(BcKind k) { return k == BcKind::Dirichlet ? "dirichlet" : "neumann"; }

int side_index(const std::string& key) {
  for (std::size_t i = 0; i < kBoundarySides.size(); ++i)
    if (key == to_string(kBoundarySides[i])) return static_cast<int>(i);
  return -1;
}

std::string side_name(std::size_t i) { return to_string(kBoundarySides[i]); }

/// Applies a {left: ..., top: ...} block on top of `sides`.
template <class SideBc, class ReadSide>
void read_sides(const YAML::Node& block, const std::string& where, std::array<SideBc, 4>& sides,
                ReadSide read_side) {
  if (!block) return;
  expect_map(block, where);
  for (const auto& kv : block) {
    const auto key = kv.first.as<std::string>();
    const int i = side_index(key);
    if (i < 0) parse_error(kv.first, "unknown boundary side '" + join(where, key) + "'");
    expect_map(kv.second, join(where, key));
    check_keys(kv.second, join(where, key), {"kind", "value"});
    read_side(kv.second, join(where, key), sides[static_cast<std::size_t>(i)]);
  }
}

void read_mechanics_side(const YAML::Node& n, const std::string& where, MechanicsSideBc& bc) {
  if (const auto k = n["kind"]) {
    if (k.IsSequence()) {
      if (k.size() != 2) parse_error(k, where + ".kind must have two entries");
      bc.kind = {read_kind(k[0], where + ".kind"), read_kind(k[1], where + ".kind")};
    } else {
      const BcKind kk = read_kind(k, where + ".kind");
      bc.kind = {kk, kk};
    }
  }
  if (const auto v = n["value"]) bc.value = read_point(v, where + ".value");
}

void read_scalar_side(const YAML::Node& n, const std::string& where, ScalarSideBc& bc) {
  if (const auto k = n["kind"]) bc.kind = read_kind(k, where + ".kind");
  read_opt(n, "value", where, bc.value);
}

GeometrySpec read_geometry(const YAML::Node& g) {
  GeometrySpec out;
  if (!g) invalid("geometry", "is required");
  expect_map(g, "geometry");
  check_keys(g, "geometry", {"domain", "resolution", "fractures", "mesh"});
  if (const auto d = g["domain"]) {
    expect_map(d, "geometry.domain");
    check_keys(d, "geometry.domain", {"min", "max"});
    if (d["min"]) out.domain.min = read_point(d["min"], "geometry.domain.min");
    if (d["max"]) out.domain.max = read_point(d["max"], "geometry.domain.max");
  }
  if (const auto r = g["resolution"]) {
    if (r.IsSequence()) {
      if (r.size() != 2) parse_error(r, "geometry.resolution must be n or [nx, ny]");
      out.nx = scalar<int>(r[0], "geometry.resolution");
      out.ny = scalar<int>(r[1], "geometry.resolution");
    } else {
      out.nx = out.ny = scalar<int>(r, "geometry.resolution");
    }
  }
  if (const auto f = g["fractures"]) {
    if (!f.IsSequence()) parse_error(f, "geometry.fractures must be a list of [[x0, y0], [x1, y1]]");
    for (std::size_t i = 0; i < f.size(); ++i) {
      const std::string where = "geometry.fractures[" + std::to_string(i) + "]";
      if (!f[i].IsSequence() || f[i].size() != 2) parse_error(f[i], where + " must be [[x0, y0], [x1, y1]]");
      out.fractures.push_back({read_point(f[i][0], where), read_point(f[i][1], where)});
    }
  }
  if (const auto m = g["mesh"]) {
    expect_map(m, "geometry.mesh");
    check_keys(m, "geometry.mesh", {"file", "fracture_tags"});
    out.mesh_file = read_req<std::string>(m, "file", "geometry.mesh");
    if (const auto t = m["fracture_tags"]) {
      if (!t.IsSequence()) parse_error(t, "geometry.mesh.fracture_tags must be a list");
      for (const auto& x : t) out.fracture_tags.push_back(scalar<int>(x, "geometry.mesh.fracture_tags"));
    }
  }
  return out;
}

MaterialParams read_materials(const YAML::Node& m) {
  if (!m) invalid("materials.friction_coefficient", "is required");
  expect_map(m, "materials");
  check_keys(m, "materials",
             {"young_modulus", "poisson_ratio", "lame_lambda", "shear_modulus", "biot_alpha", "bulk_modulus",
              "solid_thermal_expansion", "fluid_thermal_expansion", "porosity", "fluid_compressibility",
              "permeability", "viscosity", "fluid_density", "fluid_heat_capacity", "density", "heat_capacity",
              "thermal_conductivity", "reference_temperature", "friction_coefficient", "interface_permeability",
              "interface_conductivity", "residual_aperture", "initial_aperture"});
  const std::string w = "materials";
  MaterialParams p;
  const bool young = m["young_modulus"] || m["poisson_ratio"];
  if (young) {
    if (m["lame_lambda"] || m["shear_modulus"])
      invalid("materials", "takes either young_modulus/poisson_ratio or lame_lambda/shear_modulus, not both");
    const double e = read_req<double>(m, "young_modulus", w);
    const double nu = read_req<double>(m, "poisson_ratio", w);
    if (!(e > 0)) invalid("materials.young_modulus", "must be positive");
    if (!(nu > -1.0 && nu < 0.5)) invalid("materials.poisson_ratio", "must lie in (-1, 0.5)");
    std::tie(p.lame_lambda, p.shear_modulus) = MaterialParams::lame_from_young(e, nu);
  } else {
    read_opt(m, "lame_lambda", w, p.lame_lambda);
    read_opt(m, "shear_modulus", w, p.shear_modulus);
  }
  // Drained bulk modulus follows the Lame parameters unless given.
  p.bulk_modulus = p.lame_lambda + 2.0 * p.shear_modulus / 3.0;
  read_opt(m, "bulk_modulus", w, p.bulk_modulus);
  read_opt(m, "biot_alpha", w, p.biot_alpha);
  read_opt(m, "solid_thermal_expansion", w, p.solid_thermal_expansion);
  read_opt(m, "fluid_thermal_expansion", w, p.fluid_thermal_expansion);
  read_opt(m, "porosity", w, p.porosity);
  read_opt(m, "fluid_compressibility", w, p.fluid_compressibility);
  read_opt(m, "permeability", w, p.permeability);
  read_opt(m, "viscosity", w, p.viscosity);
  read_opt(m, "fluid_density", w, p.fluid_density);
  read_opt(m, "fluid_heat_capacity", w, p.fluid_heat_capacity);
  read_opt(m, "density", w, p.density);
  read_opt(m, "heat_capacity", w, p.heat_capacity);
  read_opt(m, "thermal_conductivity", w, p.thermal_conductivity);
  read_opt(m, "reference_temperature", w, p.reference_temperature);
  p.friction_coefficient = read_req<double>(m, "friction_coefficient", w);
  read_opt(m, "interface_permeability", w, p.interface_permeability);
  read_opt(m, "interface_conductivity", w, p.interface_conductivity);
  read_opt(m, "residual_aperture", w, p.residual_aperture);
  read_opt(m, "initial_aperture", w, p.initial_aperture);
  return p;
}

void read_solver(const YAML::Node& s, Scenario& sc) {
  if (!s) return;
  expect_map(s, "solver");
  check_keys(s, "solver",
             {"tolerance", "max_newton", "max_dt_cuts", "length_scale", "pressure_scale", "temperature_scale",
              "contact_c"});
  read_opt(s, "tolerance", "solver", sc.solver.tolerance);
  read_opt(s, "max_newton", "solver", sc.solver.max_newton);
  read_opt(s, "max_dt_cuts", "solver", sc.solver.max_dt_cuts);
  read_opt(s, "length_scale", "solver", sc.solver.length_scale);
  read_opt(s, "pressure_scale", "solver", sc.solver.pressure_scale);
  read_opt(s, "temperature_scale", "solver", sc.solver.temperature_scale);
  read_opt(s, "contact_c", "solver", sc.contact_c);
}

void read_phases(const YAML::Node& ph, Scenario& sc) {
  if (!ph) invalid("phases", "is required");
  if (!ph.IsSequence() || ph.size() == 0) parse_error(ph, "phases must be a non-empty list");
  PhaseSpec prev;
  for (std::size_t i = 0; i < ph.size(); ++i) {
    const std::string w = "phases[" + std::to_string(i) + "]";
    const auto& n = ph[i];
    expect_map(n, w);
    check_keys(n, w, {"name", "start", "end", "dt", "mechanics", "flow", "heat"});
    // Boundary data not mentioned is inherited from the previous phase.
    PhaseSpec p = prev;
    p.name = "phase" + std::to_string(i + 1);
    read_opt(n, "name", w, p.name);
    if (i == 0)
      p.start = read_req<double>(n, "start", w);
    else {
      p.start = prev.end;
      read_opt(n, "start", w, p.start);
    }
    p.end = read_req<double>(n, "end", w);
    p.dt = read_req<double>(n, "dt", w);
    read_sides(n["mechanics"], w + ".mechanics", p.mechanics, read_mechanics_side);
    read_sides(n["flow"], w + ".flow", p.flow, read_scalar_side);
    read_sides(n["heat"], w + ".heat", p.heat, read_scalar_side);
    sc.phases.push_back(p);
    prev = p;
  }
}

void read_output(const YAML::Node& o, Scenario& sc) {
  if (!o) return;
  expect_map(o, "output");
  check_keys(o, "output", {"directory", "vtk_every"});
  read_opt(o, "directory", "output", sc.output.directory);
  read_opt(o, "vtk_every", "output", sc.output.vtk_every);
}

void validate(const Scenario& sc) {
  const auto& g = sc.geometry;
  if (!(g.domain.width() > 0 && g.domain.height() > 0)) invalid("geometry.domain", "must have max > min");
  if (g.mesh_file.empty() && (g.nx < 1 || g.ny < 1)) invalid("geometry.resolution", "must be at least 1");
  for (std::size_t i = 0; i < g.fractures.size(); ++i)
    if (g.fractures[i].start == g.fractures[i].end)
      invalid("geometry.fractures[" + std::to_string(i) + "]", "has zero length");

  const auto& p = sc.materials;
  auto positive = [](double v, const char* f) {
    if (!(v > 0) || !std::isfinite(v)) invalid(std::string("materials.") + f, "must be positive");
  };
  auto non_negative = [](double v, const char* f) {
    if (!(v >= 0) || !std::isfinite(v)) invalid(std::string("materials.") + f, "must be non-negative");
  };
  positive(p.shear_modulus, "shear_modulus");
  if (!(p.lame_lambda + p.shear_modulus > 0)) invalid("materials.lame_lambda", "must exceed -shear_modulus");
  positive(p.bulk_modulus, "bulk_modulus");
  if (!(p.biot_alpha >= 0 && p.biot_alpha <= 1)) invalid("materials.biot_alpha", "must lie in [0, 1]");
  non_negative(p.solid_thermal_expansion, "solid_thermal_expansion");
  non_negative(p.fluid_thermal_expansion, "fluid_thermal_expansion");
  if (!(p.porosity > 0 && p.porosity < 1)) invalid("materials.porosity", "must lie in (0, 1)");
  positive(p.fluid_compressibility, "fluid_compressibility");
  positive(p.permeability, "permeability");
  positive(p.viscosity, "viscosity");
  positive(p.fluid_density, "fluid_density");
  positive(p.fluid_heat_capacity, "fluid_heat_capacity");
  positive(p.density, "density");
  positive(p.heat_capacity, "heat_capacity");
  positive(p.thermal_conductivity, "thermal_conductivity");
  positive(p.reference_temperature, "reference_temperature");
  positive(p.friction_coefficient, "friction_coefficient");
  positive(p.interface_permeability, "interface_permeability");
  positive(p.interface_conductivity, "interface_conductivity");
  positive(p.residual_aperture, "residual_aperture");
  positive(p.initial_aperture, "initial_aperture");
  if (p.residual_aperture > p.initial_aperture) invalid("materials.residual_aperture", "must not exceed initial_aperture");

  sc.solver.validate();
  if (!(sc.contact_c >= 0)) invalid("solver.contact_c", "must be non-negative");
  if (sc.output.vtk_every < 0) invalid("output.vtk_every", "must be non-negative");

  for (std::size_t i = 0; i < sc.phases.size(); ++i) {
    const auto& ph = sc.phases[i];
    const std::string w = "phases[" + std::to_string(i) + "]";
    if (!(ph.end > ph.start)) invalid(w + ".end", "must be greater than start");
    if (!(ph.dt > 0)) invalid(w + ".dt", "must be positive");
    if (i > 0) {
      const double prev_end = sc.phases[i - 1].end;
      const double tol = 1e-12 * std::max({1.0, std::abs(prev_end), std::abs(ph.start)});
      if (std::abs(ph.start - prev_end) > tol)
        invalid(w + ".start", ph.start < prev_end ? "overlaps the previous phase" : "leaves a gap after the previous phase");
    }
  }
}

// ---------------------------------------------------------------------------
// Writing

void emit_point(YAML::Emitter& e, const Point& p) {
  e << YAML::Flow << YAML::BeginSeq << p.x() << p.y() << YAML::EndSeq;
}

void emit_double(YAML::Emitter& e, const char* key, double v) { e << YAML::Key << key << YAML::Value << v; }

}  // namespace

Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& ex) {
    std::ostringstream s;
    s << "line " << ex.mark.line + 1 << ": " << ex.msg;
    throw Error(ErrorKind::ParseError, s.str());
  }
  expect_map(root, "");
  check_keys(root, "", {"name", "geometry", "materials", "solver", "phases", "output"});
  Scenario sc;
  read_opt(root, "name", "", sc.name);
  sc.geometry = read_geometry(root["geometry"]);
  sc.materials = read_materials(root["materials"]);
  read_solver(root["solver"], sc);
  read_phases(root["phases"], sc);
  read_output(root["output"], sc);
  validate(sc);
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& sc) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << sc.name;

  const auto& g = sc.geometry;
  e << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "min" << YAML::Value;
  emit_point(e, g.domain.min);
  e << YAML::Key << "max" << YAML::Value;
  emit_point(e, g.domain.max);
  e << YAML::EndMap;
  e << YAML::Key << "resolution" << YAML::Value << YAML::Flow << YAML::BeginSeq << g.nx << g.ny << YAML::EndSeq;
  e << YAML::Key << "fractures" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : g.fractures) {
    e << YAML::Flow << YAML::BeginSeq;
    emit_point(e, s.start);
    emit_point(e, s.end);
    e << YAML::EndSeq;
  }
  e << YAML::EndSeq;
  if (!g.mesh_file.empty()) {
    e << YAML::Key << "mesh" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "file" << YAML::Value << g.mesh_file;
    e << YAML::Key << "fracture_tags" << YAML::Value << YAML::Flow << g.fracture_tags;
    e << YAML::EndMap;
  }
  e << YAML::EndMap;

  const auto& p = sc.materials;
  e << YAML::Key << "materials" << YAML::Value << YAML::BeginMap;
  emit_double(e, "lame_lambda", p.lame_lambda);
  emit_double(e, "shear_modulus", p.shear_modulus);
  emit_double(e, "bulk_modulus", p.bulk_modulus);
  emit_double(e, "biot_alpha", p.biot_alpha);
  emit_double(e, "solid_thermal_expansion", p.solid_thermal_expansion);
  emit_double(e, "fluid_thermal_expansion", p.fluid_thermal_expansion);
  emit_double(e, "porosity", p.porosity);
  emit_double(e, "fluid_compressibility", p.fluid_compressibility);
  emit_double(e, "permeability", p.permeability);
  emit_double(e, "viscosity", p.viscosity);
  emit_double(e, "fluid_density", p.fluid_density);
  emit_double(e, "fluid_heat_capacity", p.fluid_heat_capacity);
  emit_double(e, "density", p.density);
  emit_double(e, "heat_capacity", p.heat_capacity);
  emit_double(e, "thermal_conductivity", p.thermal_conductivity);
  emit_double(e, "reference_temperature", p.reference_temperature);
  emit_double(e, "friction_coefficient", p.friction_coefficient);
  emit_double(e, "interface_permeability", p.interface_permeability);
  emit_double(e, "interface_conductivity", p.interface_conductivity);
  emit_double(e, "residual_aperture", p.residual_aperture);
  emit_double(e, "initial_aperture", p.initial_aperture);
  e << YAML::EndMap;

  const auto& s = sc.solver;
  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  emit_double(e, "tolerance", s.tolerance);
  e << YAML::Key << "max_newton" << YAML::Value << s.max_newton;
  e << YAML::Key << "max_dt_cuts" << YAML::Value << s.max_dt_cuts;
  emit_double(e, "length_scale", s.length_scale);
  emit_double(e, "pressure_scale", s.pressure_scale);
  emit_double(e, "temperature_scale", s.temperature_scale);
  emit_double(e, "contact_c", sc.contact_c);
  e << YAML::EndMap;

  e << YAML::Key << "phases" << YAML::Value << YAML::BeginSeq;
  for (const auto& ph : sc.phases) {
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << ph.name;
    emit_double(e, "start", ph.start);
    emit_double(e, "end", ph.end);
    emit_double(e, "dt", ph.dt);
    e << YAML::Key << "mechanics" << YAML::Value << YAML::BeginMap;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& b = ph.mechanics[i];
      e << YAML::Key << side_name(i) << YAML::Value << YAML::Flow << YAML::BeginMap;
      e << YAML::Key << "kind" << YAML::Value << YAML::Flow << YAML::BeginSeq << kind_name(b.kind[0])
        << kind_name(b.kind[1]) << YAML::EndSeq;
      e << YAML::Key << "value" << YAML::Value;
      emit_point(e, b.value);
      e << YAML::EndMap;
    }
    e << YAML::EndMap;
    for (const char* field : {"flow", "heat"}) {
      const auto& sides = std::string(field) == "flow" ? ph.flow : ph.heat;
      e << YAML::Key << field << YAML::Value << YAML::BeginMap;
      for (std::size_t i = 0; i < 4; ++i) {
        e << YAML::Key << side_name(i) << YAML::Value << YAML::Flow << YAML::BeginMap;
        e << YAML::Key << "kind" << YAML::Value << kind_name(sides[i].kind);
        emit_double(e, "value", sides[i].value);
        e << YAML::EndMap;
      }
      e << YAML::EndMap;
    }
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "directory" << YAML::Value << sc.output.directory;
  e << YAML::Key << "vtk_every" << YAML::Value << sc.output.vtk_every;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

MixedDimGrid build_grid(const Scenario& sc, const std::filesystem::path& base_dir) {
  const auto& g = sc.geometry;
  if (g.mesh_file.empty()) {
    FractureNetwork net;
    net.domain = g.domain;
    net.segments = g.fractures;
    return build_structured(g.domain, g.nx, g.ny, net);
  }
  std::filesystem::path path = g.mesh_file;
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read mesh file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return import_msh(buf.str(), g.fracture_tags);
}

BoundaryConditionSet boundary_conditions(const PhaseSpec& phase, const SubdomainGrid& m) {
  BoundaryConditionSet bc{VectorBc::all(m, BcKind::Neumann), ScalarBc::all(m, BcKind::Neumann),
                          ScalarBc::all(m, BcKind::Neumann)};
  for (int f = 0; f < m.num_faces(); ++f) {
    if (m.face_tags[f] != FaceTag::External) continue;
    int i = -1;
    for (std::size_t k = 0; k < kBoundarySides.size(); ++k)
      if (kBoundarySides[k] == m.face_sides[f]) i = static_cast<int>(k);
    if (i < 0) continue;
    const double area = m.face_areas[f];
    const auto& mech = phase.mechanics[static_cast<std::size_t>(i)];
    bc.mechanics.kind[f] = mech.kind;
    for (int d = 0; d < 2; ++d)
      bc.mechanics.value[2 * f + d] = mech.kind[static_cast<std::size_t>(d)] == BcKind::Dirichlet
                                          ? mech.value[d]
                                          : mech.value[d] * area;
    auto scalar_side = [&](const ScalarSideBc& s, ScalarBc& out) {
      out.kind[f] = s.kind;
      out.value[f] = s.kind == BcKind::Dirichlet ? s.value : s.value * area;
    };
    scalar_side(phase.flow[static_cast<std::size_t>(i)], bc.flow);
    scalar_side(phase.heat[static_cast<std::size_t>(i)], bc.heat);
  }
  return bc;
}

std::vector<Phase> build_phases(const Scenario& sc, const MixedDimGrid& grid) {
  std::vector<Phase> out;
  for (const auto& ph : sc.phases)
    out.push_back({ph.name, ph.start, ph.end, ph.dt, boundary_conditions(ph, grid.matrix())});
  return out;
}

std::string vtk_file_name(const std::string& name, int dim, int index, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d", step);
  return name + "_" + std::to_string(dim) + "_" + std::to_string(index) + "_" + buf + ".vtk";
}

namespace {

std::string vtk_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct VtkFile {
  std::ofstream out;
  std::filesystem::path path;

  explicit VtkFile(std::filesystem::path p) : out(p), path(std::move(p)) {
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  }

  void scalars(const char* name, const Vec& v) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Index i = 0; i < v.size(); ++i) out << vtk_number(v[i]) << "\n";
  }

  void finish() {
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
  }
};

void write_mesh(VtkFile& f, const SubdomainGrid& g, const std::string& title) {
  auto& o = f.out;
  o << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  o << "POINTS " << g.num_nodes() << " double\n";
  for (const auto& p : g.nodes) o << vtk_number(p.x()) << " " << vtk_number(p.y()) << " 0\n";
  std::size_t total = 0;
  for (const auto& c : g.cell_nodes) total += c.size() + 1;
  o << "CELLS " << g.num_cells() << " " << total << "\n";
  for (const auto& c : g.cell_nodes) {
    o << c.size();
    for (int n : c) o << " " << n;
    o << "\n";
  }
  o << "CELL_TYPES " << g.num_cells() << "\n";
  for (const auto& c : g.cell_nodes) o << (c.size() == 3 ? 5 : c.size() == 2 ? 3 : 1) << "\n";
  o << "CELL_DATA " << g.num_cells() << "\n";
}

}  // namespace

std::vector<std::filesystem::path> write_vtk_snapshot(const Model& model, const State& state,
                                                      const RegimeMap& regimes,
                                                      const std::filesystem::path& directory,
                                                      const std::string& name, int step) {
  const auto& grid = model.grid();
  const auto& dofs = model.dofs();
  const Vec& x = state.x;
  if (x.size() != dofs.num_dofs()) throw Error(ErrorKind::ShapeMismatch, "state does not match the model");
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create '" + directory.string() + "': " + ec.message());

  std::vector<std::filesystem::path> written;
  auto block = [&](int sd, Var v) {
    const auto& b = dofs.subdomain(sd, v);
    return Vec(x.segment(b.offset, b.size));
  };

  {
    const auto& g = grid.matrix();
    VtkFile f(directory / vtk_file_name(name, 2, 0, step));
    write_mesh(f, g, name + " matrix step " + std::to_string(step));
    f.scalars("p", block(0, Var::Pressure));
    f.scalars("T", block(0, Var::Temperature));
    const Vec u = block(0, Var::Displacement);
    Vec mag(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c) mag[c] = u.segment<2>(2 * c).norm();
    f.scalars("u_magnitude", mag);
    f.out << "VECTORS u double\n";
    for (int c = 0; c < g.num_cells(); ++c)
      f.out << vtk_number(u[2 * c]) << " " << vtk_number(u[2 * c + 1]) << " 0\n";
    f.finish();
    written.push_back(f.path);
  }

  const FractureGeometry geo = model.update_geometry(x);
  for (int sd : grid.fracture_subdomains()) {
    const auto& g = grid.subdomains[sd];
    VtkFile f(directory / vtk_file_name(name, 1, sd, step));
    write_mesh(f, g, name + " fracture " + std::to_string(g.fracture_id) + " step " + std::to_string(step));
    f.scalars("p", block(sd, Var::Pressure));
    f.scalars("T", block(sd, Var::Temperature));
    f.scalars("aperture", geo.aperture[sd]);
    Vec code = Vec::Zero(g.num_cells());
    if (sd < static_cast<int>(regimes.size()) && static_cast<int>(regimes[sd].size()) == g.num_cells())
      for (int c = 0; c < g.num_cells(); ++c) code[c] = static_cast<int>(regimes[sd][c]);
    f.scalars("regime", code);
    const Vec j = model.jump_local(sd, x);
    Vec jt(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c) jt[c] = std::abs(j[2 * c + 1]);
    f.scalars("jump_t_magnitude", jt);
    f.finish();
    written.push_back(f.path);
  }
  return written;
}

void write_fracture_timeseries(const std::vector<StepDiagnostics>& diagnostics, const std::filesystem::path& path) {
  if (diagnostics.empty()) throw Error(ErrorKind::IoError, "no diagnostics to write to '" + path.string() + "'");
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out << kTimeseriesHeader << "\n";
  for (const auto& d : diagnostics)
    for (const auto& f : d.fractures)
      out << d.step << "," << d.phase << "," << format_double(d.time) << "," << format_double(d.dt) << ","
          << f.fracture_id << "," << format_double(f.norm_jump_n) << "," << format_double(f.norm_jump_t) << ","
          << f.n_open << "," << f.n_stick << "," << f.n_slide << "," << d.newton_iterations << "\n";
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "failed writing '" + path.string() + "'");
}

std::string diagnostics_json(const StepDiagnostics& d) {
  nlohmann::ordered_json j;
  j["step"] = d.step;
  j["phase"] = d.phase;
  j["time"] = d.time;
  j["dt"] = d.dt;
  j["newton_iterations"] = d.newton_iterations;
  j["dt_cuts"] = d.dt_cuts;
  int open = 0, stick = 0, slide = 0;
  auto fr = nlohmann::ordered_json::array();
  for (const auto& f : d.fractures) {
    open += f.n_open;
    stick += f.n_stick;
    slide += f.n_slide;
    fr.push_back({{"id", f.fracture_id},
                  {"norm_jump_n", f.norm_jump_n},
                  {"norm_jump_t", f.norm_jump_t},
                  {"open", f.n_open},
                  {"stick", f.n_stick},
                  {"slide", f.n_slide}});
  }
  j["regimes"] = {{"open", open}, {"stick", stick}, {"slide", slide}};
  j["fractures"] = fr;
  j["balance"] = {{"mass_relative", d.balance.mass_relative()},
                  {"energy_relative", d.balance.energy_relative()},
                  {"mass_imbalance", d.balance.mass_imbalance},
                  {"mass_scale", d.balance.mass_scale},
                  {"energy_imbalance", d.balance.energy_imbalance},
                  {"energy_scale", d.balance.energy_scale}};
  j["convergence"] = {{"max_residual", d.convergence.max_residual}, {"max_increment", d.convergence.max_increment}};
  return j.dump();
}

DiagnosticsLog::DiagnosticsLog(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  out_.open(path);
  if (!out_) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
}

void DiagnosticsLog::write(const StepDiagnostics& d) {
  out_ << diagnostics_json(d) << "\n";
  out_.flush();
  if (!out_) throw Error(ErrorKind::IoError, "failed writing '" + path_.string() + "'");
}

}  // namespace fracthm
