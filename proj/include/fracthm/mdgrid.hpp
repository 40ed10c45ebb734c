#pragma once

// Mixed-dimensional geometry: a 2D simplicial matrix grid slit along the
// fractures, 1D grids for every fracture branch, 0D grids at intersections,
// and the interfaces that connect them.

#include "fracthm/ad.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fracthm {

using Point = Eigen::Vector2d;

struct Box {
  Point min{0.0, 0.0};
  Point max{1.0, 1.0};

  double width() const { return max.x() - min.x(); }
  double height() const { return max.y() - min.y(); }
  bool operator==(const Box& o) const { return min == o.min && max == o.max; }
};

struct Segment {
  Point start;
  Point end;
  bool operator==(const Segment& o) const { return start == o.start && end == o.end; }
};

struct FractureNetwork {
  std::vector<Segment> segments;
  Box domain;
};

enum class BoundarySide { None, Left, Right, Bottom, Top };
const char* to_string(BoundarySide side);

enum class FaceTag {
  Interior,
  External,      // on the outer boundary of the domain
  Fracture,      // duplicated face along a fracture (2D) or a free/boundary tip (1D)
  Intersection,  // 1D face touching a 0D intersection
};

enum class Side { Plus, Minus };

struct SubdomainGrid {
  int dim = 2;
  std::vector<Point> nodes;
  std::vector<Point> cell_centers;
  std::vector<double> cell_volumes;
  std::vector<Point> face_centers;
  /// Area-weighted; for faces with a single cell it points out of that cell,
  /// otherwise out of face_cells[f][0]. In 1D the normal is the unit tangent.
  std::vector<Point> face_normals;
  std::vector<double> face_areas;
  std::vector<std::array<int, 2>> face_nodes;  // second entry -1 in 1D
  std::vector<std::array<int, 2>> face_cells;  // second entry -1 on boundaries
  std::vector<std::vector<int>> cell_faces;
  std::vector<std::vector<int>> cell_nodes;
  std::vector<FaceTag> face_tags;
  std::vector<BoundarySide> face_sides;
  /// 1D only: unit tangent and unit normal of each cell (local contact frame).
  std::vector<Point> cell_tangents;
  std::vector<Point> cell_normals;
  /// 1D/0D: id of the fracture segment the subdomain belongs to (-1 for 2D).
  int fracture_id = -1;
  /// 0D only: fracture ids of the branches meeting here.
  std::vector<int> intersecting_fractures;

  int num_cells() const { return static_cast<int>(cell_centers.size()); }
  int num_faces() const { return static_cast<int>(face_centers.size()); }
  int num_nodes() const { return static_cast<int>(nodes.size()); }

  /// +1 if the stored normal of `face` points out of `cell`, -1 otherwise.
  int sign(int cell, int face) const { return face_cells[face][0] == cell ? 1 : -1; }

  /// Signed cell-face incidence (cells x faces), i.e. the discrete divergence
  /// of face-integrated fluxes.
  SpMat divergence() const;
  /// Vector version acting on face vectors stored as [f0x, f0y, f1x, ...].
  SpMat vector_divergence() const;
};

/// Coupling between a subdomain and a lower-dimensional neighbour. For the
/// matrix-fracture case every fracture cell is matched by one interface cell
/// per side; for fracture-intersection couplings there is a single cell.
struct Interface {
  int high = 0;  // subdomain index
  int low = 0;
  int high_dim = 2;
  std::vector<int> high_faces;  // per interface cell
  std::vector<int> low_cells;   // per interface cell
  std::vector<Side> sides;      // per interface cell
  std::vector<double> measures;
  /// Subdomain faces -> interface cells (restriction) and back.
  SpMat xi_high;
  SpMat pi_high;
  /// Lower-dimensional cells -> all interface cells, and its transpose (which
  /// sums both sides onto the lower cells).
  SpMat xi_low, pi_low;
  /// Same restricted to the cells of one side (rows/columns in side order).
  SpMat xi_low_plus, pi_low_plus, xi_low_minus, pi_low_minus;

  int num_cells() const { return static_cast<int>(high_faces.size()); }
  /// Number of cells on one side (matrix-fracture interfaces only).
  int cells_per_side() const { return num_cells() / 2; }
};

struct MixedDimGrid {
  Box domain;
  std::vector<SubdomainGrid> subdomains;  // index 0 is the matrix
  std::vector<Interface> interfaces;      // matrix-fracture first, then fracture-intersection

  const SubdomainGrid& matrix() const { return subdomains.front(); }
  std::vector<int> fracture_subdomains() const;
  std::vector<int> intersection_subdomains() const;
  /// Index of the matrix-fracture interface of a 1D subdomain.
  int interface_of_fracture(int subdomain) const;
  /// Number of distinct fracture segments (branches are grouped by id).
  int num_fractures() const;
  double characteristic_cell_size() const;
};

/// Node coordinates, triangles and the fracture edges to cut along. This is
/// the common input of the structured mesher and the MSH importer.
struct Triangulation {
  Box domain;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  struct FractureEdge {
    int a, b;
    int fracture_id;
  };
  std::vector<FractureEdge> fracture_edges;
};

/// Lattice triangulation of the box with `nx` x `ny` rectangles, each split
/// into two triangles; the split diagonal is flipped where a fracture needs it.
Triangulation structured_triangulation(const Box& domain, int nx, int ny,
                                       const std::vector<Segment>& segments);

MixedDimGrid build_from_triangulation(const Triangulation& tri);

MixedDimGrid build_structured(const Box& domain, int nx, int ny, const FractureNetwork& network);

/// MSH 2.2 ASCII reader. Lines whose physical tag is listed become fractures;
/// the fracture id is the position of the tag in `fracture_tags`.
MixedDimGrid import_msh(const std::string& text, const std::vector<int>& fracture_tags);
Triangulation read_msh_triangulation(const std::string& text, const std::vector<int>& fracture_tags);

/// Fills side labels and the projection operators of every interface.
void build_interfaces(MixedDimGrid& grid);

}  // namespace fracthm
