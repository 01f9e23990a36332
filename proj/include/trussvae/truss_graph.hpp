#pragma once

/**
 * @file truss_graph.hpp
 * @brief Octant truss graphs: adjacency + packed node offsets, validity
 *        rules, repair, superposition and intersection resolution.
 *
 * A TrussGraph describes the truss inside the octant [0,1]^3. The full
 * periodic cell is obtained by mirroring about x=0, y=0 and z=0 (see
 * unit_cell.hpp). Degree-based rules are therefore evaluated on the tiled
 * lattice: a node sitting on a mirror or periodic plane also sees the
 * mirrored copies of its beams.
 */

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "trussvae/errors.hpp"
#include "trussvae/slots.hpp"

namespace trussvae {

using Vec3 = Eigen::Vector3d;

/// Longest permitted octant beam: the half body diagonal of the cell.
inline const double kMaxBeamLength = std::sqrt(3.0);

class TrussGraph {
 public:
  TrussGraph() {
    for (int i = 0; i < kNumSlots; ++i) rows_[i] = std::uint32_t{1} << i;
    offsets_.fill(0.0);
  }

  bool has_beam(int i, int j) const { return i != j && ((rows_[i] >> j) & 1u); }

  void add_beam(int i, int j) {
    if (i == j) return;
    rows_[i] |= std::uint32_t{1} << j;
    rows_[j] |= std::uint32_t{1} << i;
  }

  void remove_beam(int i, int j) {
    if (i == j) return;
    rows_[i] &= ~(std::uint32_t{1} << j);
    rows_[j] &= ~(std::uint32_t{1} << i);
  }

  /// Raw adjacency row including the diagonal bit.
  std::uint32_t row(int i) const { return rows_[i]; }
  void set_row_bit(int i, int j, bool on) {
    if (on)
      rows_[i] |= std::uint32_t{1} << j;
    else
      rows_[i] &= ~(std::uint32_t{1} << j);
  }

  int degree(int i) const { return std::popcount(rows_[i] & ~(std::uint32_t{1} << i)); }
  bool active(int i) const { return degree(i) > 0; }

  int num_beams() const {
    int n = 0;
    for (int i = 0; i < kNumSlots; ++i) n += degree(i);
    return n / 2;
  }

  std::vector<std::pair<int, int>> beams() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < kNumSlots; ++i)
      for (int j = i + 1; j < kNumSlots; ++j)
        if (has_beam(i, j)) out.emplace_back(i, j);
    return out;
  }

  std::vector<int> active_nodes() const {
    std::vector<int> out;
    for (int i = 0; i < kNumSlots; ++i)
      if (active(i)) out.push_back(i);
    return out;
  }

  const std::array<double, kNumOffsets>& offsets() const { return offsets_; }
  std::array<double, kNumOffsets>& offsets() { return offsets_; }

  double offset(int slot, int k) const { return offsets_[kSlots[slot].offset_begin + k]; }
  void set_offset(int slot, int k, double v) { offsets_[kSlots[slot].offset_begin + k] = v; }

  /// Inactive nodes keep zero offsets so the encoding is unique.
  void zero_inactive_offsets() {
    for (const Slot& s : kSlots)
      if (!active(s.index))
        for (int k = 0; k < s.num_free; ++k) set_offset(s.index, k, 0.0);
  }

  bool operator==(const TrussGraph& o) const = default;

 private:
  std::array<std::uint32_t, kNumSlots> rows_{};
  std::array<double, kNumOffsets> offsets_{};
};

/// Symmetric adjacency with a unit diagonal.
inline bool is_well_formed(const TrussGraph& g) {
  for (int i = 0; i < kNumSlots; ++i) {
    if (!((g.row(i) >> i) & 1u)) return false;
    if (g.row(i) >> kNumSlots) return false;
    for (int j = i + 1; j < kNumSlots; ++j)
      if (((g.row(i) >> j) & 1u) != ((g.row(j) >> i) & 1u)) return false;
  }
  return true;
}

inline bool offset_in_range(double v) {
  return std::isfinite(v) && v >= -kOffsetBound - 1e-12 && v <= kOffsetBound + 1e-12;
}

/// Coordinate of a slot in the octant for the given packed offsets.
inline Vec3 node_position(int slot, const std::array<double, kNumOffsets>& offsets) {
  if (slot < 0 || slot >= kNumSlots) throw RangeError("slot index out of range: " + std::to_string(slot));
  const Slot& s = kSlots[slot];
  Vec3 p(s.nominal[0], s.nominal[1], s.nominal[2]);
  int k = 0;
  for (int a = 0; a < 3; ++a) {
    if (!s.free[a]) continue;
    const double lambda = offsets[s.offset_begin + k++];
    if (!offset_in_range(lambda))
      throw RangeError("offset " + std::to_string(lambda) + " of slot " + std::to_string(slot) +
                       " outside [-" + std::to_string(kOffsetBound) + ", " + std::to_string(kOffsetBound) + "]");
    p[a] = 0.5 + lambda;
  }
  return p;
}

inline Vec3 node_position(const TrussGraph& g, int slot) { return node_position(slot, g.offsets()); }

// ---------------------------------------------------------------------------
// Validity
// ---------------------------------------------------------------------------

enum class Failure : std::uint8_t {
  disconnected,
  dangling_node,
  beam_too_long,
  offset_out_of_range,
  no_boundary_contact,
  empty,
};

inline std::string_view to_string(Failure f) {
  switch (f) {
    case Failure::disconnected: return "disconnected";
    case Failure::dangling_node: return "dangling_node";
    case Failure::beam_too_long: return "beam_too_long";
    case Failure::offset_out_of_range: return "offset_out_of_range";
    case Failure::no_boundary_contact: return "no_boundary_contact";
    case Failure::empty: return "empty";
  }
  return "unknown";
}

struct ValidityReport {
  bool valid = true;
  std::vector<Failure> failures;

  bool has(Failure f) const { return std::find(failures.begin(), failures.end(), f) != failures.end(); }
};

namespace detail {

inline bool on_plane(double c, double v) { return std::abs(c - v) < 1e-9; }

inline std::array<long long, 3> quantize(const Vec3& p) {
  return {std::llround(p[0] * 1e8), std::llround(p[1] * 1e8), std::llround(p[2] * 1e8)};
}

/// Connected components over active nodes; returns component id per slot (-1 inactive).
inline std::array<int, kNumSlots> components(const TrussGraph& g, int* count) {
  std::array<int, kNumSlots> comp;
  comp.fill(-1);
  int n = 0;
  for (int s = 0; s < kNumSlots; ++s) {
    if (!g.active(s) || comp[s] >= 0) continue;
    std::vector<int> stack{s};
    comp[s] = n;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < kNumSlots; ++v)
        if (g.has_beam(u, v) && comp[v] < 0) {
          comp[v] = n;
          stack.push_back(v);
        }
    }
    ++n;
  }
  if (count) *count = n;
  return comp;
}

}  // namespace detail

/**
 * Number of distinct beams meeting at a slot in the tiled lattice.
 *
 * A node lying on a mirror plane (coordinate 0) or a periodic plane
 * (coordinate 1) is fixed by the reflection through that plane, so the
 * reflected copies of its octant beams also end at it.
 */
inline int tiled_degree(const TrussGraph& g, int slot) {
  const Vec3 p = node_position(g, slot);
  std::array<bool, 3> fixed_by{};
  for (int a = 0; a < 3; ++a) fixed_by[a] = detail::on_plane(p[a], 0.0) || detail::on_plane(p[a], 1.0);
  std::set<std::array<long long, 3>> ends;
  for (int v = 0; v < kNumSlots; ++v) {
    if (!g.has_beam(slot, v)) continue;
    const Vec3 q = node_position(g, v);
    for (int mask = 0; mask < 8; ++mask) {
      bool ok = true;
      Vec3 r = q;
      for (int a = 0; a < 3; ++a) {
        if (!((mask >> a) & 1)) continue;
        if (!fixed_by[a]) {
          ok = false;
          break;
        }
        r[a] = 2.0 * p[a] - q[a];
      }
      if (ok) ends.insert(detail::quantize(r));
    }
  }
  return int(ends.size());
}

/**
 * Checks every validity rule and lists the ones that fail.
 *
 * Boundary contact requires active geometry on all six octant faces so that
 * the mirrored and tiled network spans the cell in every direction.
 */
inline ValidityReport validate(const TrussGraph& g) {
  ValidityReport r;
  auto fail = [&r](Failure f) {
    if (!r.has(f)) r.failures.push_back(f);
  };

  for (int s = 0; s < kNumSlots; ++s) {
    const Slot& slot = kSlots[s];
    for (int k = 0; k < slot.num_free; ++k) {
      const double v = g.offset(s, k);
      if (!offset_in_range(v) || (!g.active(s) && v != 0.0)) fail(Failure::offset_out_of_range);
    }
  }
  if (r.has(Failure::offset_out_of_range)) {
    r.valid = false;
    return r;
  }

  if (g.num_beams() == 0) {
    fail(Failure::empty);
    r.valid = false;
    return r;
  }

  int ncomp = 0;
  detail::components(g, &ncomp);
  if (ncomp > 1) fail(Failure::disconnected);

  std::array<bool, 6> touches{};
  for (int s : g.active_nodes()) {
    if (tiled_degree(g, s) < 2) fail(Failure::dangling_node);
    const Vec3 p = node_position(g, s);
    for (int a = 0; a < 3; ++a) {
      if (detail::on_plane(p[a], 0.0)) touches[2 * a] = true;
      if (detail::on_plane(p[a], 1.0)) touches[2 * a + 1] = true;
    }
  }
  if (!std::all_of(touches.begin(), touches.end(), [](bool b) { return b; })) fail(Failure::no_boundary_contact);

  for (auto [i, j] : g.beams())
    if ((node_position(g, i) - node_position(g, j)).norm() > kMaxBeamLength + 1e-12) fail(Failure::beam_too_long);

  r.valid = r.failures.empty();
  return r;
}

/**
 * Light post-processing for decoded graphs: prune dangling nodes, keep the
 * largest connected component, then re-validate. nullopt means the decode
 * cannot be repaired.
 */
inline std::optional<TrussGraph> repair(TrussGraph g) {
  for (int s = 0; s < kNumSlots; ++s) g.set_row_bit(s, s, true);
  g.zero_inactive_offsets();
  for (const Slot& s : kSlots)
    for (int k = 0; k < s.num_free; ++k)
      if (!offset_in_range(g.offset(s.index, k))) return std::nullopt;

  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < kNumSlots; ++s) {
      if (!g.active(s) || tiled_degree(g, s) >= 2) continue;
      for (int v = 0; v < kNumSlots; ++v) g.remove_beam(s, v);
      changed = true;
    }
  }

  int ncomp = 0;
  const auto comp = detail::components(g, &ncomp);
  if (ncomp > 1) {
    std::vector<int> size(ncomp, 0);
    for (int s = 0; s < kNumSlots; ++s)
      if (comp[s] >= 0) ++size[comp[s]];
    const int keep = int(std::max_element(size.begin(), size.end()) - size.begin());
    for (int s = 0; s < kNumSlots; ++s)
      if (comp[s] >= 0 && comp[s] != keep)
        for (int v = 0; v < kNumSlots; ++v) g.remove_beam(s, v);
  }
  g.zero_inactive_offsets();
  if (!validate(g).valid) return std::nullopt;
  return g;
}

// ---------------------------------------------------------------------------
// Intersections and superposition
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kIntersectTol = 1e-6;

/// Parameter and distance of the point closest to p on segment [a,b].
inline std::pair<double, double> project_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return {t, (a + t * d - p).norm()};
}

/// Closest points of two non-parallel segments; returns (s, t, distance) or nullopt when parallel.
inline std::optional<std::array<double, 3>> segment_closest(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                                            const Vec3& q2) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.dot(d1), e = d2.dot(d2), b = d1.dot(d2), c = d1.dot(r), f = d2.dot(r);
  const double denom = a * e - b * b;
  if (denom <= 1e-14 * a * e) return std::nullopt;
  double s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
  double t = (b * s + f) / e;
  if (t < 0.0) {
    t = 0.0;
    s = std::clamp(-c / a, 0.0, 1.0);
  } else if (t > 1.0) {
    t = 1.0;
    s = std::clamp((b - c) / a, 0.0, 1.0);
  }
  return std::array<double, 3>{s, t, ((p1 + s * d1) - (p2 + t * d2)).norm()};
}

/// An inactive slot whose fixed coordinates match p and whose offsets can reach it.
inline std::optional<int> slot_for_point(const TrussGraph& g, const Vec3& p) {
  for (const Slot& s : kSlots) {
    if (g.active(s.index)) continue;
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a) {
      if (s.free[a])
        ok = std::abs(p[a] - 0.5) <= kOffsetBound;
      else
        ok = std::abs(p[a] - s.nominal[a]) < kIntersectTol;
    }
    if (ok) return s.index;
  }
  return std::nullopt;
}

inline void place_slot(TrussGraph& g, int slot, const Vec3& p) {
  const Slot& s = kSlots[slot];
  int k = 0;
  for (int a = 0; a < 3; ++a)
    if (s.free[a]) g.set_offset(slot, k++, p[a] - 0.5);
}

}  // namespace detail

/**
 * Splits beams at every interior contact: a node lying inside another beam
 * (this also resolves collinear overlaps), or two beams crossing. A crossing
 * becomes a new node only if an inactive slot can sit exactly there;
 * otherwise the structure is rejected.
 */
inline std::optional<TrussGraph> resolve_intersections(TrussGraph g) {
  using detail::kIntersectTol;
  for (int guard = 0; guard < 4 * kNumPairs; ++guard) {
    const auto beams = g.beams();
    std::array<Vec3, kNumSlots> pos;
    for (int s = 0; s < kNumSlots; ++s) pos[s] = node_position(g, s);

    bool split = false;
    for (int n : g.active_nodes()) {
      for (auto [i, j] : beams) {
        if (n == i || n == j) continue;
        auto [t, dist] = detail::project_on_segment(pos[n], pos[i], pos[j]);
        if (dist >= kIntersectTol) continue;
        if ((pos[n] - pos[i]).norm() < kIntersectTol || (pos[n] - pos[j]).norm() < kIntersectTol) continue;
        g.remove_beam(i, j);
        g.add_beam(i, n);
        g.add_beam(n, j);
        split = true;
        break;
      }
      if (split) break;
    }
    if (split) continue;

    for (std::size_t b1 = 0; b1 < beams.size() && !split; ++b1) {
      for (std::size_t b2 = b1 + 1; b2 < beams.size(); ++b2) {
        auto [i, j] = beams[b1];
        auto [k, l] = beams[b2];
        if (i == k || i == l || j == k || j == l) continue;
        const auto hit = detail::segment_closest(pos[i], pos[j], pos[k], pos[l]);
        if (!hit || (*hit)[2] >= kIntersectTol) continue;
        const Vec3 p = pos[i] + (*hit)[0] * (pos[j] - pos[i]);
        const auto slot = detail::slot_for_point(g, p);
        if (!slot) return std::nullopt;
        detail::place_slot(g, *slot, p);
        g.remove_beam(i, j);
        g.remove_beam(k, l);
        for (int e : {i, j, k, l}) g.add_beam(*slot, e);
        split = true;
        break;
      }
    }
    if (!split) return g;
  }
  return std::nullopt;
}

/**
 * Logical OR of two graphs followed by intersection resolution. Nodes that
 * are active in both inputs must sit at the same offsets.
 */
inline std::optional<TrussGraph> superpose(const TrussGraph& g1, const TrussGraph& g2) {
  TrussGraph out;
  for (const Slot& s : kSlots) {
    const bool a1 = g1.active(s.index), a2 = g2.active(s.index);
    for (int k = 0; k < s.num_free; ++k) {
      const double v1 = g1.offset(s.index, k), v2 = g2.offset(s.index, k);
      if (a1 && a2 && std::abs(v1 - v2) > 1e-9) return std::nullopt;
      out.set_offset(s.index, k, a1 ? v1 : (a2 ? v2 : 0.0));
    }
  }
  for (int i = 0; i < kNumSlots; ++i)
    for (int j = 0; j < kNumSlots; ++j)
      out.set_row_bit(i, j, ((g1.row(i) | g2.row(i)) >> j) & 1u);
  return resolve_intersections(out);
}

/// 64-bit FNV-1a over adjacency bits and offsets quantized to 1e-4.
inline std::uint64_t graph_hash(const TrussGraph& g) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (int i = 0; i < kNumSlots; ++i) mix(g.row(i), 4);
  for (double v : g.offsets()) mix(std::uint64_t(std::llround(v * 1e4)), 8);
  return h;
}

}  // namespace trussvae
