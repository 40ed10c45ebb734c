#include "fracthm/mdgrid.hpp"

#include "fracthm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace fracthm {

const char* to_string(BoundarySide side) {
  switch (side) {
    case BoundarySide::None: return "none";
    case BoundarySide::Left: return "left";
    case BoundarySide::Right: return "right";
    case BoundarySide::Bottom: return "bottom";
    case BoundarySide::Top: return "top";
  }
  return "none";
}

SpMat SubdomainGrid::divergence() const {
  std::vector<Triplet> trip;
  for (int f = 0; f < num_faces(); ++f) {
    const auto& fc = face_cells[f];
    trip.emplace_back(fc[0], f, 1.0);
    if (fc[1] >= 0) trip.emplace_back(fc[1], f, -1.0);
  }
  SpMat div(num_cells(), num_faces());
  div.setFromTriplets(trip.begin(), trip.end());
  return div;
}

SpMat SubdomainGrid::vector_divergence() const {
  std::vector<Triplet> trip;
  for (int f = 0; f < num_faces(); ++f) {
    const auto& fc = face_cells[f];
    for (int d = 0; d < 2; ++d) {
      trip.emplace_back(2 * fc[0] + d, 2 * f + d, 1.0);
      if (fc[1] >= 0) trip.emplace_back(2 * fc[1] + d, 2 * f + d, -1.0);
    }
  }
  SpMat div(2 * num_cells(), 2 * num_faces());
  div.setFromTriplets(trip.begin(), trip.end());
  return div;
}

std::vector<int> MixedDimGrid::fracture_subdomains() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(subdomains.size()); ++i)
    if (subdomains[i].dim == 1) out.push_back(i);
  return out;
}

std::vector<int> MixedDimGrid::intersection_subdomains() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(subdomains.size()); ++i)
    if (subdomains[i].dim == 0) out.push_back(i);
  return out;
}

int MixedDimGrid::interface_of_fracture(int subdomain) const {
  for (int i = 0; i < static_cast<int>(interfaces.size()); ++i)
    if (interfaces[i].high_dim == 2 && interfaces[i].low == subdomain) return i;
  return -1;
}

int MixedDimGrid::num_fractures() const {
  std::set<int> ids;
  for (const auto& sd : subdomains)
    if (sd.dim == 1) ids.insert(sd.fracture_id);
  return static_cast<int>(ids.size());
}

double MixedDimGrid::characteristic_cell_size() const {
  const auto& m = matrix();
  double sum = 0.0;
  for (double a : m.face_areas) sum += a;
  return m.num_faces() > 0 ? sum / m.num_faces() : 1.0;
}

namespace {

BoundarySide side_of(const Point& x, const Box& box, double tol) {
  if (std::abs(x.x() - box.min.x()) < tol) return BoundarySide::Left;
  if (std::abs(x.x() - box.max.x()) < tol) return BoundarySide::Right;
  if (std::abs(x.y() - box.min.y()) < tol) return BoundarySide::Bottom;
  if (std::abs(x.y() - box.max.y()) < tol) return BoundarySide::Top;
  return BoundarySide::None;
}

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

std::pair<int, int> edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

struct Chain {
  std::vector<int> nodes;  // triangulation node ids, nodes.size() == edges.size() + 1
  std::vector<int> edges;  // triangulation edge ids
  int fracture_id = -1;
  int first_input = 0;
};

}  // namespace

MixedDimGrid build_from_triangulation(const Triangulation& tri) {
  const double scale = std::max(tri.domain.width(), tri.domain.height());
  const double tol = 1e-10 * scale;

  MixedDimGrid grid;
  grid.domain = tri.domain;

  // Orient every triangle counter-clockwise.
  std::vector<std::array<int, 3>> tris = tri.triangles;
  for (auto& t : tris) {
    const double area2 =
        cross(tri.nodes[t[1]] - tri.nodes[t[0]], tri.nodes[t[2]] - tri.nodes[t[0]]);
    if (std::abs(area2) <= tol * tol) throw Error(ErrorKind::DegenerateGeometry, "zero-area triangle");
    if (area2 < 0) std::swap(t[1], t[2]);
  }

  // Unique edges in order of first appearance.
  std::map<std::pair<int, int>, int> edge_id;
  std::vector<std::array<int, 2>> edge_nodes;
  std::vector<std::vector<int>> edge_tris;
  for (int c = 0; c < static_cast<int>(tris.size()); ++c) {
    for (int k = 0; k < 3; ++k) {
      const int a = tris[c][k], b = tris[c][(k + 1) % 3];
      auto [it, inserted] = edge_id.try_emplace(edge_key(a, b), static_cast<int>(edge_nodes.size()));
      if (inserted) {
        edge_nodes.push_back({a, b});
        edge_tris.emplace_back();
      }
      edge_tris[it->second].push_back(c);
    }
  }

  // Fracture edges.
  std::vector<int> edge_fracture(edge_nodes.size(), -1);
  std::vector<int> edge_input(edge_nodes.size(), -1);
  for (int i = 0; i < static_cast<int>(tri.fracture_edges.size()); ++i) {
    const auto& fe = tri.fracture_edges[i];
    auto it = edge_id.find(edge_key(fe.a, fe.b));
    if (it == edge_id.end()) {
      std::ostringstream msg;
      msg << "fracture edge (" << fe.a << ", " << fe.b << ") is not an edge of the triangulation";
      throw Error(ErrorKind::NonConformingMesh, msg.str());
    }
    const int e = it->second;
    if (edge_tris[e].size() != 2)
      throw Error(ErrorKind::NonConformingMesh, "fracture edge lies on the domain boundary");
    if (edge_fracture[e] >= 0 && edge_fracture[e] != fe.fracture_id)
      throw Error(ErrorKind::SegmentNotRepresentable, "two fractures share an edge");
    if (edge_fracture[e] < 0) {
      edge_fracture[e] = fe.fracture_id;
      edge_input[e] = i;
    }
  }

  // Matrix faces: one per edge, two for fracture edges (slit topology).
  SubdomainGrid m;
  m.dim = 2;
  m.nodes = tri.nodes;
  m.cell_faces.assign(tris.size(), {});
  std::vector<std::array<int, 2>> edge_faces(edge_nodes.size(), {-1, -1});
  auto add_face = [&](int e, int c0, int c1, FaceTag tag) {
    const Point& x0 = tri.nodes[edge_nodes[e][0]];
    const Point& x1 = tri.nodes[edge_nodes[e][1]];
    Point normal(x1.y() - x0.y(), -(x1.x() - x0.x()));
    const Point center = 0.5 * (x0 + x1);
    const auto& t = tris[c0];
    const Point cc = (tri.nodes[t[0]] + tri.nodes[t[1]] + tri.nodes[t[2]]) / 3.0;
    if (normal.dot(center - cc) < 0) normal = -normal;
    const int f = m.num_faces();
    m.face_centers.push_back(center);
    m.face_normals.push_back(normal);
    m.face_areas.push_back(normal.norm());
    m.face_nodes.push_back(edge_nodes[e]);
    m.face_cells.push_back({c0, c1});
    m.face_tags.push_back(tag);
    m.face_sides.push_back(tag == FaceTag::External ? side_of(center, tri.domain, tol)
                                                    : BoundarySide::None);
    m.cell_faces[c0].push_back(f);
    if (c1 >= 0) m.cell_faces[c1].push_back(f);
    return f;
  };
  for (int e = 0; e < static_cast<int>(edge_nodes.size()); ++e) {
    const auto& ts = edge_tris[e];
    if (edge_fracture[e] >= 0) {
      edge_faces[e][0] = add_face(e, ts[0], -1, FaceTag::Fracture);
      edge_faces[e][1] = add_face(e, ts[1], -1, FaceTag::Fracture);
    } else if (ts.size() == 2) {
      edge_faces[e][0] = add_face(e, ts[0], ts[1], FaceTag::Interior);
    } else {
      edge_faces[e][0] = add_face(e, ts[0], -1, FaceTag::External);
    }
  }
  for (int c = 0; c < static_cast<int>(tris.size()); ++c) {
    const auto& t = tris[c];
    const Point& a = tri.nodes[t[0]];
    const Point& b = tri.nodes[t[1]];
    const Point& d = tri.nodes[t[2]];
    m.cell_centers.push_back((a + b + d) / 3.0);
    m.cell_volumes.push_back(0.5 * cross(b - a, d - a));
    m.cell_nodes.push_back({t[0], t[1], t[2]});
  }
  grid.subdomains.push_back(std::move(m));

  // Fracture branches: maximal chains of fracture edges of one fracture
  // between tips and intersection points.
  std::map<int, std::vector<int>> node_edges;
  for (int e = 0; e < static_cast<int>(edge_nodes.size()); ++e)
    if (edge_fracture[e] >= 0)
      for (int n : edge_nodes[e]) node_edges[n].push_back(e);
  auto is_junction = [&](int n) {
    const auto& es = node_edges.at(n);
    if (es.size() >= 3) return true;
    if (es.size() == 2 && edge_fracture[es[0]] != edge_fracture[es[1]]) return true;
    return false;
  };
  std::vector<int> frac_edges_by_input;
  for (int e = 0; e < static_cast<int>(edge_nodes.size()); ++e)
    if (edge_fracture[e] >= 0) frac_edges_by_input.push_back(e);
  std::sort(frac_edges_by_input.begin(), frac_edges_by_input.end(),
            [&](int a, int b) { return edge_input[a] < edge_input[b]; });

  std::vector<bool> visited(edge_nodes.size(), false);
  std::vector<Chain> chains;
  for (int e0 : frac_edges_by_input) {
    if (visited[e0]) continue;
    Chain ch;
    ch.fracture_id = edge_fracture[e0];
    ch.first_input = edge_input[e0];
    // Walk forward from b and backward from a of the seed edge.
    auto walk = [&](int start_node, int start_edge) {
      std::vector<std::pair<int, int>> steps;  // (edge, far node)
      int node = start_node, edge = start_edge;
      while (!is_junction(node) && node_edges.at(node).size() == 2) {
        const auto& es = node_edges.at(node);
        const int next = es[0] == edge ? es[1] : es[0];
        if (visited[next] || next == e0) break;
        visited[next] = true;
        const int far = edge_nodes[next][0] == node ? edge_nodes[next][1] : edge_nodes[next][0];
        steps.emplace_back(next, far);
        node = far;
        edge = next;
      }
      return steps;
    };
    visited[e0] = true;
    int a = edge_nodes[e0][0], b = edge_nodes[e0][1];
    for (const auto& fe : tri.fracture_edges)
      if (edge_key(fe.a, fe.b) == edge_key(a, b)) {
        a = fe.a;
        b = fe.b;
        break;
      }
    const auto fwd = walk(b, e0);
    const auto bwd = walk(a, e0);
    for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) {
      ch.nodes.push_back(it->second);
      ch.edges.push_back(it->first);
    }
    ch.nodes.push_back(a);
    ch.edges.push_back(e0);
    ch.nodes.push_back(b);
    for (const auto& [edge, far] : fwd) {
      ch.edges.push_back(edge);
      ch.nodes.push_back(far);
    }
    chains.push_back(std::move(ch));
  }

  // Intersection points, ordered by node index.
  std::vector<int> junctions;
  for (const auto& [n, es] : node_edges)
    if (is_junction(n)) junctions.push_back(n);

  const int first_fracture_sd = 1;
  for (const auto& ch : chains) {
    SubdomainGrid g;
    g.dim = 1;
    g.fracture_id = ch.fracture_id;
    const int nc = static_cast<int>(ch.edges.size());
    for (int n : ch.nodes) g.nodes.push_back(tri.nodes[n]);
    for (int i = 0; i < nc; ++i) {
      const Point& x0 = g.nodes[i];
      const Point& x1 = g.nodes[i + 1];
      const double len = (x1 - x0).norm();
      if (len <= tol) throw Error(ErrorKind::DegenerateGeometry, "zero-length fracture cell");
      const Point t = (x1 - x0) / len;
      g.cell_centers.push_back(0.5 * (x0 + x1));
      g.cell_volumes.push_back(len);
      g.cell_tangents.push_back(t);
      g.cell_normals.push_back(Point(-t.y(), t.x()));
      g.cell_faces.push_back({i, i + 1});
      g.cell_nodes.push_back({i, i + 1});
    }
    for (int j = 0; j <= nc; ++j) {
      g.face_centers.push_back(g.nodes[j]);
      g.face_areas.push_back(1.0);
      g.face_nodes.push_back({j, -1});
      g.face_sides.push_back(BoundarySide::None);
      if (j == 0) {
        g.face_cells.push_back({0, -1});
        g.face_normals.push_back(-g.cell_tangents[0]);
      } else if (j == nc) {
        g.face_cells.push_back({nc - 1, -1});
        g.face_normals.push_back(g.cell_tangents[nc - 1]);
      } else {
        g.face_cells.push_back({j - 1, j});
        g.face_normals.push_back(g.cell_tangents[j - 1]);
      }
      const bool end = (j == 0 || j == nc);
      if (!end) {
        g.face_tags.push_back(FaceTag::Interior);
      } else {
        const int node = ch.nodes[j];
        g.face_tags.push_back(is_junction(node) ? FaceTag::Intersection : FaceTag::Fracture);
      }
    }
    grid.subdomains.push_back(std::move(g));
  }

  const int first_point_sd = static_cast<int>(grid.subdomains.size());
  for (int n : junctions) {
    SubdomainGrid g;
    g.dim = 0;
    g.nodes.push_back(tri.nodes[n]);
    g.cell_centers.push_back(tri.nodes[n]);
    g.cell_volumes.push_back(1.0);
    g.cell_faces.push_back({});
    g.cell_nodes.push_back({0});
    std::set<int> ids;
    for (int e : node_edges.at(n)) ids.insert(edge_fracture[e]);
    g.intersecting_fractures.assign(ids.begin(), ids.end());
    grid.subdomains.push_back(std::move(g));
  }

  // Matrix-fracture interfaces: both duplicated faces of every fracture cell;
  // build_interfaces sorts them into sides.
  for (int k = 0; k < static_cast<int>(chains.size()); ++k) {
    Interface intf;
    intf.high = 0;
    intf.low = first_fracture_sd + k;
    intf.high_dim = 2;
    for (int i = 0; i < static_cast<int>(chains[k].edges.size()); ++i) {
      const int e = chains[k].edges[i];
      for (int f : edge_faces[e]) {
        intf.high_faces.push_back(f);
        intf.low_cells.push_back(i);
      }
    }
    grid.interfaces.push_back(std::move(intf));
  }
  // Fracture-intersection interfaces, ordered by (point, branch).
  for (int p = 0; p < static_cast<int>(junctions.size()); ++p) {
    for (int k = 0; k < static_cast<int>(chains.size()); ++k) {
      const auto& ch = chains[k];
      const int nc = static_cast<int>(ch.edges.size());
      for (int j : {0, nc}) {
        if (ch.nodes[j] != junctions[p]) continue;
        Interface intf;
        intf.high = first_fracture_sd + k;
        intf.low = first_point_sd + p;
        intf.high_dim = 1;
        intf.high_faces.push_back(j);
        intf.low_cells.push_back(0);
        grid.interfaces.push_back(std::move(intf));
      }
    }
  }

  build_interfaces(grid);
  return grid;
}

void build_interfaces(MixedDimGrid& grid) {
  for (auto& intf : grid.interfaces) {
    const SubdomainGrid& high = grid.subdomains[intf.high];
    const SubdomainGrid& low = grid.subdomains[intf.low];
    if (intf.high_dim == 2) {
      // Sort the duplicated faces into + (outward normal along the fracture
      // cell normal) and - sides.
      const int nlow = low.num_cells();
      std::vector<int> plus(nlow, -1), minus(nlow, -1);
      for (int i = 0; i < intf.num_cells(); ++i) {
        const int f = intf.high_faces[i];
        const int c = intf.low_cells[i];
        const double dot = high.face_normals[f].dot(low.cell_normals[c]);
        auto& slot = dot > 0 ? plus[c] : minus[c];
        if (dot == 0.0 || slot >= 0)
          throw Error(ErrorKind::OrientationError,
                      "fracture faces cannot be two-coloured consistently");
        slot = f;
      }
      for (int c = 0; c < nlow; ++c)
        if (plus[c] < 0 || minus[c] < 0)
          throw Error(ErrorKind::OrientationError, "fracture cell is missing a side");
      intf.high_faces.clear();
      intf.low_cells.clear();
      intf.sides.clear();
      intf.measures.clear();
      for (Side s : {Side::Plus, Side::Minus}) {
        for (int c = 0; c < nlow; ++c) {
          const int f = s == Side::Plus ? plus[c] : minus[c];
          const double rel = std::abs(high.face_areas[f] - low.cell_volumes[c]) / low.cell_volumes[c];
          if (rel > 1e-10 || (high.face_centers[f] - low.cell_centers[c]).norm() > 1e-10 * low.cell_volumes[c])
            throw Error(ErrorKind::NonConformingMesh, "fracture cell does not match its matrix face");
          intf.high_faces.push_back(f);
          intf.low_cells.push_back(c);
          intf.sides.push_back(s);
          intf.measures.push_back(low.cell_volumes[c]);
        }
      }
    } else {
      intf.sides.assign(intf.num_cells(), Side::Plus);
      intf.measures.assign(intf.num_cells(), 1.0);
    }

    const int n = intf.num_cells();
    std::vector<Triplet> th, tl, tp, tm;
    int np = 0, nm = 0;
    for (int i = 0; i < n; ++i) {
      th.emplace_back(i, intf.high_faces[i], 1.0);
      tl.emplace_back(i, intf.low_cells[i], 1.0);
      if (intf.sides[i] == Side::Plus)
        tp.emplace_back(np++, intf.low_cells[i], 1.0);
      else
        tm.emplace_back(nm++, intf.low_cells[i], 1.0);
    }
    intf.xi_high.resize(n, high.num_faces());
    intf.xi_high.setFromTriplets(th.begin(), th.end());
    intf.pi_high = intf.xi_high.transpose();
    intf.xi_low.resize(n, low.num_cells());
    intf.xi_low.setFromTriplets(tl.begin(), tl.end());
    intf.pi_low = intf.xi_low.transpose();
    intf.xi_low_plus.resize(np, low.num_cells());
    intf.xi_low_plus.setFromTriplets(tp.begin(), tp.end());
    intf.pi_low_plus = intf.xi_low_plus.transpose();
    intf.xi_low_minus.resize(nm, low.num_cells());
    intf.xi_low_minus.setFromTriplets(tm.begin(), tm.end());
    intf.pi_low_minus = intf.xi_low_minus.transpose();
  }
}

Triangulation structured_triangulation(const Box& domain, int nx, int ny,
                                       const std::vector<Segment>& segments) {
  if (nx < 1 || ny < 1) throw Error(ErrorKind::DegenerateGeometry, "resolution must be positive");
  const double dx = domain.width() / nx;
  const double dy = domain.height() / ny;
  const double tol = 1e-10 * std::max(domain.width(), domain.height());
  auto node = [&](int i, int j) { return j * (nx + 1) + i; };

  // Flip flags per rectangle: false = diagonal (i,j)-(i+1,j+1).
  std::vector<int> diag(static_cast<std::size_t>(nx * ny), -1);
  std::vector<Triangulation::FractureEdge> edges;
  std::set<std::pair<int, int>> used;

  for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
    const Segment& seg = segments[s];
    for (const Point& p : {seg.start, seg.end}) {
      if (p.x() < domain.min.x() - tol || p.x() > domain.max.x() + tol ||
          p.y() < domain.min.y() - tol || p.y() > domain.max.y() + tol)
        throw Error(ErrorKind::SegmentNotRepresentable, "fracture endpoint outside the domain");
    }
    if ((seg.end - seg.start).norm() <= tol)
      throw Error(ErrorKind::DegenerateGeometry, "fracture segment has zero length");
    const int i0 = static_cast<int>(std::lround((seg.start.x() - domain.min.x()) / dx));
    const int j0 = static_cast<int>(std::lround((seg.start.y() - domain.min.y()) / dy));
    const int i1 = static_cast<int>(std::lround((seg.end.x() - domain.min.x()) / dx));
    const int j1 = static_cast<int>(std::lround((seg.end.y() - domain.min.y()) / dy));
    const int di = i1 - i0, dj = j1 - j0;
    if (di == 0 && dj == 0) {
      std::ostringstream msg;
      msg << "segment " << s << " collapses to a point after snapping to the lattice";
      throw Error(ErrorKind::DegenerateGeometry, msg.str());
    }
    if (!(di == 0 || dj == 0 || std::abs(di) == std::abs(dj))) {
      std::ostringstream msg;
      msg << "segment " << s << " is neither lattice-aligned nor a lattice diagonal";
      throw Error(ErrorKind::SegmentNotRepresentable, msg.str());
    }
    const int steps = std::max(std::abs(di), std::abs(dj));
    const int si = (di > 0) - (di < 0), sj = (dj > 0) - (dj < 0);
    int i = i0, j = j0;
    for (int k = 0; k < steps; ++k) {
      const int ni = i + si, nj = j + sj;
      if (si != 0 && sj != 0) {
        const int ri = std::min(i, ni), rj = std::min(j, nj);
        const int want = (si == sj) ? 0 : 1;
        int& d = diag[static_cast<std::size_t>(rj * nx + ri)];
        if (d >= 0 && d != want)
          throw Error(ErrorKind::SegmentNotRepresentable,
                      "two fractures need opposite diagonals of one lattice cell");
        d = want;
      }
      const int a = node(i, j), b = node(ni, nj);
      if (!used.insert(edge_key(a, b)).second)
        throw Error(ErrorKind::SegmentNotRepresentable, "fracture segments overlap");
      edges.push_back({a, b, s});
      i = ni;
      j = nj;
    }
  }

  Triangulation tri;
  tri.domain = domain;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      tri.nodes.emplace_back(domain.min.x() + i * dx, domain.min.y() + j * dy);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = node(i, j), n10 = node(i + 1, j), n01 = node(i, j + 1), n11 = node(i + 1, j + 1);
      if (diag[static_cast<std::size_t>(j * nx + i)] == 1) {
        tri.triangles.push_back({n00, n10, n01});
        tri.triangles.push_back({n10, n11, n01});
      } else {
        tri.triangles.push_back({n00, n10, n11});
        tri.triangles.push_back({n00, n11, n01});
      }
    }
  }
  tri.fracture_edges = std::move(edges);
  return tri;
}

MixedDimGrid build_structured(const Box& domain, int nx, int ny, const FractureNetwork& network) {
  return build_from_triangulation(structured_triangulation(domain, nx, ny, network.segments));
}

}  // namespace fracthm
