#pragma once

#include "fracthm/mdgrid.hpp"

#include <vector>

namespace fracthm::detail {

/// Cells and faces sharing one node of a 2D grid. Sub-faces are the halves
/// of the faces adjacent to the node.
struct InteractionRegion {
  int node = -1;
  std::vector<int> cells;
  std::vector<int> faces;

  int local_cell(int cell) const;
};

std::vector<InteractionRegion> interaction_regions(const SubdomainGrid& grid);

/// Continuity point on the half of `face` adjacent to `node`.
inline Point continuity_point(const SubdomainGrid& g, int face, int node, double eta) {
  const Point& xf = g.face_centers[face];
  return xf + eta * (g.nodes[node] - xf);
}

}  // namespace fracthm::detail
