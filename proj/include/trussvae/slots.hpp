#pragma once

/**
 * @file slots.hpp
 * @brief The 27 node slots of the octant [0,1]^3.
 *
 * Slot numbering:
 *   0..7    vertices, bit k of the index is the k-th coordinate
 *   8..19   edges, grouped by free axis (x: 8..11, y: 12..15, z: 16..19);
 *           within a group the two fixed coordinates count as a 2-bit index
 *   20..25  faces x=0, x=1, y=0, y=1, z=0, z=1
 *   26      body
 *
 * Packed offsets follow the slot order: one scalar per edge slot, two per
 * face slot (free axes in increasing order), three for the body slot.
 */

#include <array>
#include <cstdint>

namespace trussvae {

inline constexpr int kNumSlots = 27;
inline constexpr int kNumOffsets = 27;
inline constexpr int kNumPairs = kNumSlots * (kNumSlots - 1) / 2;  // 351

/// Offsets are kept this far from +-0.5 so moving nodes never reach a corner.
inline constexpr double kOffsetClearance = 0.05;
inline constexpr double kOffsetBound = 0.5 - kOffsetClearance;

enum class SlotKind : std::uint8_t { vertex, edge, face, body };

struct Slot {
  int index = 0;
  SlotKind kind = SlotKind::vertex;
  std::array<double, 3> nominal{};
  std::array<bool, 3> free{};
  int num_free = 0;
  int offset_begin = 0;  ///< first entry in the packed offset vector
};

namespace detail {

constexpr std::array<Slot, kNumSlots> make_slot_table() {
  std::array<Slot, kNumSlots> t{};
  int next_offset = 0;
  for (int v = 0; v < 8; ++v) {
    Slot& s = t[v];
    s.index = v;
    s.kind = SlotKind::vertex;
    s.nominal = {double(v & 1), double((v >> 1) & 1), double((v >> 2) & 1)};
    s.offset_begin = next_offset;
  }
  for (int axis = 0; axis < 3; ++axis) {
    const int a1 = (axis + 1) % 3 < (axis + 2) % 3 ? (axis + 1) % 3 : (axis + 2) % 3;
    const int a2 = 3 - axis - a1;
    for (int k = 0; k < 4; ++k) {
      Slot& s = t[8 + 4 * axis + k];
      s.index = 8 + 4 * axis + k;
      s.kind = SlotKind::edge;
      s.nominal[axis] = 0.5;
      s.nominal[a1] = double(k & 1);
      s.nominal[a2] = double((k >> 1) & 1);
      s.free[axis] = true;
      s.num_free = 1;
      s.offset_begin = next_offset;
      next_offset += 1;
    }
  }
  for (int f = 0; f < 6; ++f) {
    Slot& s = t[20 + f];
    const int normal = f / 2;
    s.index = 20 + f;
    s.kind = SlotKind::face;
    s.nominal = {0.5, 0.5, 0.5};
    s.nominal[normal] = double(f % 2);
    s.free = {true, true, true};
    s.free[normal] = false;
    s.num_free = 2;
    s.offset_begin = next_offset;
    next_offset += 2;
  }
  Slot& b = t[26];
  b.index = 26;
  b.kind = SlotKind::body;
  b.nominal = {0.5, 0.5, 0.5};
  b.free = {true, true, true};
  b.num_free = 3;
  b.offset_begin = next_offset;
  return t;
}

}  // namespace detail

inline constexpr std::array<Slot, kNumSlots> kSlots = detail::make_slot_table();

static_assert(kSlots[26].offset_begin + 3 == kNumOffsets);
static_assert(kSlots[20].offset_begin == 12);

/// FNV-1a over the slot table; stored in dataset headers to catch layout drift.
inline std::uint64_t slot_table_hash() {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  };
  for (const Slot& s : kSlots) {
    mix(std::uint64_t(s.index));
    mix(std::uint64_t(s.kind));
    for (int a = 0; a < 3; ++a) {
      mix(std::uint64_t(s.nominal[a] * 2.0));
      mix(std::uint64_t(s.free[a]));
    }
    mix(std::uint64_t(s.offset_begin));
  }
  return h;
}

/// Index of the strict-upper-triangle pair (i < j) in row-major order.
constexpr int pair_index(int i, int j) {
  if (i > j) {
    const int t = i;
    i = j;
    j = t;
  }
  return i * kNumSlots - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace trussvae
