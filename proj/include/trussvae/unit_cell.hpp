#pragma once

/**
 * @file unit_cell.hpp
 * @brief Mirror an octant graph into the periodic cell [-1,1]^3 and size
 *        its struts for a target relative density.
 */

#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "trussvae/truss_graph.hpp"

namespace trussvae {

inline constexpr double kCellVolume = 8.0;

struct CellBeam {
  int i = 0;
  int j = 0;
  /// Fraction of the beam owned by this cell: 1 inside, 1/2 on a face, 1/4 on an edge.
  double weight = 1.0;
};

struct UnitCell {
  std::vector<Vec3> nodes;
  std::vector<CellBeam> beams;
  double radius = 0.0;
  double total_weighted_length = 0.0;

  double beam_length(const CellBeam& b) const { return (nodes[b.j] - nodes[b.i]).norm(); }
};

/**
 * Reflects the octant truss about x=0, y=0 and z=0. Nodes and beams that
 * coincide under the reflections are merged; node order is deterministic
 * (reflection pattern major, slot index minor).
 */
inline UnitCell reflect_to_cell(const TrussGraph& g) {
  UnitCell cell;
  std::map<std::array<long long, 3>, int> node_ids;
  std::map<std::pair<int, int>, int> beam_ids;

  auto node_id = [&](Vec3 p) {
    for (int a = 0; a < 3; ++a)
      if (p[a] == 0.0) p[a] = 0.0;  // fold -0.0
    const auto key = detail::quantize(p);
    auto [it, inserted] = node_ids.emplace(key, int(cell.nodes.size()));
    if (inserted) cell.nodes.push_back(p);
    return it->second;
  };

  const auto beams = g.beams();
  for (int mask = 0; mask < 8; ++mask) {
    const Vec3 sign((mask & 1) ? -1.0 : 1.0, (mask & 2) ? -1.0 : 1.0, (mask & 4) ? -1.0 : 1.0);
    for (int s : g.active_nodes()) node_id(node_position(g, s).cwiseProduct(sign));
    for (auto [a, b] : beams) {
      int i = node_id(node_position(g, a).cwiseProduct(sign));
      int j = node_id(node_position(g, b).cwiseProduct(sign));
      if (i > j) std::swap(i, j);
      if (beam_ids.contains({i, j})) continue;
      beam_ids.emplace(std::pair{i, j}, int(cell.beams.size()));
      int boundary_axes = 0;
      for (int ax = 0; ax < 3; ++ax) {
        const Vec3& p = cell.nodes[i];
        const Vec3& q = cell.nodes[j];
        if (std::abs(std::abs(p[ax]) - 1.0) < 1e-9 && std::abs(p[ax] - q[ax]) < 1e-9) ++boundary_axes;
      }
      const double weight = boundary_axes == 0 ? 1.0 : (boundary_axes == 1 ? 0.5 : 0.25);
      cell.beams.push_back({i, j, weight});
    }
  }

  for (const CellBeam& b : cell.beams) {
    const double len = cell.beam_length(b);
    if (len <= 1e-9) throw DegenerateError("zero-length beam in unit cell");
    cell.total_weighted_length += b.weight * len;
  }
  return cell;
}

/// Strut radius giving relative density rho, ignoring joint overlap.
inline double radius_for_density(const UnitCell& cell, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw RangeError("relative density must lie in (0, 1)");
  if (!(cell.total_weighted_length > 0.0)) throw DegenerateError("unit cell has no beam length");
  return std::sqrt(rho * kCellVolume / (std::numbers::pi * cell.total_weighted_length));
}

inline UnitCell sized_cell(const TrussGraph& g, double rho) {
  UnitCell cell = reflect_to_cell(g);
  cell.radius = radius_for_density(cell, rho);
  return cell;
}

}  // namespace trussvae
