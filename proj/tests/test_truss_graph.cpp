#include <gtest/gtest.h>

#include <set>

#include "trussvae/datagen.hpp"
#include "trussvae/truss_graph.hpp"

using namespace trussvae;

namespace {

int vtx(int x, int y, int z) { return x + 2 * y + 4 * z; }

std::vector<TrussGraph> small_dataset() {
  DatagenConfig cfg;
  cfg.n_library = 40;
  cfg.n_dataset = 200;
  cfg.rng_seed = 11;
  std::vector<TrussGraph> out;
  for (const auto& r : generate_dataset(cfg, 2)) out.push_back(r.graph);
  return out;
}

}  // namespace

TEST(Slots, TableLayout) {
  EXPECT_EQ(kNumPairs, 351);
  EXPECT_EQ(kSlots[7].kind, SlotKind::vertex);
  EXPECT_EQ(kSlots[7].nominal, (std::array<double, 3>{1, 1, 1}));
  EXPECT_EQ(kSlots[8].nominal, (std::array<double, 3>{0.5, 0, 0}));
  EXPECT_TRUE(kSlots[8].free[0]);
  EXPECT_EQ(kSlots[24].nominal, (std::array<double, 3>{0.5, 0.5, 0}));
  EXPECT_EQ(kSlots[24].num_free, 2);
  EXPECT_EQ(kSlots[26].offset_begin, 24);

  int offsets = 0;
  for (const Slot& s : kSlots) offsets += s.num_free;
  EXPECT_EQ(offsets, kNumOffsets);
}

TEST(Slots, PairIndexIsDenseAndSymmetric) {
  std::set<int> seen;
  for (int i = 0; i < kNumSlots; ++i)
    for (int j = i + 1; j < kNumSlots; ++j) {
      EXPECT_EQ(pair_index(i, j), pair_index(j, i));
      seen.insert(pair_index(i, j));
    }
  EXPECT_EQ(int(seen.size()), kNumPairs);
  EXPECT_EQ(*seen.begin(), 0);
  EXPECT_EQ(*seen.rbegin(), kNumPairs - 1);
}

TEST(NodePosition, OffsetsMoveAlongFreeAxes) {
  std::array<double, kNumOffsets> off{};
  off[kSlots[26].offset_begin + 1] = -0.2;
  const Vec3 p = node_position(26, off);
  EXPECT_DOUBLE_EQ(p.y(), 0.3);
  EXPECT_DOUBLE_EQ(p.x(), 0.5);

  off[kSlots[8].offset_begin] = 0.46;
  EXPECT_THROW(node_position(8, off), RangeError);
  EXPECT_THROW(node_position(27, off), RangeError);
}

TEST(Validate, ElementarySeedsAreValid) {
  for (const TrussGraph& g : elementary_seeds()) {
    const auto r = validate(g);
    EXPECT_TRUE(r.valid);
    EXPECT_TRUE(is_well_formed(g));
  }
}

TEST(Validate, SingleBodyDiagonalIsValid) {
  TrussGraph g;
  g.add_beam(vtx(0, 0, 0), vtx(1, 1, 1));
  EXPECT_TRUE(validate(g).valid);
  EXPECT_EQ(tiled_degree(g, 0), 8);
}

TEST(Validate, EmptyGraph) {
  const auto r = validate(TrussGraph{});
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.has(Failure::empty));
}

TEST(Validate, EdgeBeamMissesThreeFaces) {
  TrussGraph g;
  g.add_beam(vtx(0, 0, 0), vtx(1, 0, 0));
  const auto r = validate(g);
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.has(Failure::no_boundary_contact));
  EXPECT_FALSE(r.has(Failure::dangling_node));
}

TEST(Validate, Disconnected) {
  TrussGraph g;
  g.add_beam(vtx(0, 0, 0), vtx(1, 1, 1));
  g.add_beam(vtx(1, 0, 0), vtx(0, 1, 0));
  EXPECT_TRUE(validate(g).has(Failure::disconnected));
}

TEST(Validate, DanglingInteriorNode) {
  TrussGraph g = elementary_seeds()[0];
  g.add_beam(vtx(1, 1, 1), 26);
  g.set_offset(26, 0, 0.1);
  const auto r = validate(g);
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.has(Failure::dangling_node));
}

TEST(Validate, OffsetRules) {
  TrussGraph g = elementary_seeds()[3];
  g.set_offset(26, 0, 0.46);
  EXPECT_TRUE(validate(g).has(Failure::offset_out_of_range));

  TrussGraph h = elementary_seeds()[3];
  h.set_offset(8, 0, 0.1);  // slot 8 is inactive
  EXPECT_TRUE(validate(h).has(Failure::offset_out_of_range));
}

TEST(Repair, PrunesDanglingBranch) {
  TrussGraph g = elementary_seeds()[0];
  g.add_beam(vtx(1, 1, 1), 26);
  g.set_offset(26, 0, 0.1);
  const auto r = repair(g);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, elementary_seeds()[0]);
}

TEST(Repair, KeepsLargestComponent) {
  TrussGraph g = elementary_seeds()[4];
  g.add_beam(20, 21);  // a separate two-node component through the body
  const auto r = repair(g);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, elementary_seeds()[4]);
}

TEST(Repair, RejectsEmptyAndOutOfRange) {
  EXPECT_FALSE(repair(TrussGraph{}));
  TrussGraph g = elementary_seeds()[3];
  g.set_offset(26, 2, -0.6);
  EXPECT_FALSE(repair(g));
}

TEST(Repair, IdempotentOnGeneratedGraphs) {
  for (const TrussGraph& g : small_dataset()) {
    TrussGraph noisy = g;
    noisy.add_beam(26, 8);
    const auto once = repair(noisy);
    if (!once) continue;
    const auto twice = repair(*once);
    ASSERT_TRUE(twice);
    EXPECT_EQ(*once, *twice);
  }
}

TEST(Resolve, CrossingFaceDiagonalsGainFaceNode) {
  TrussGraph g;
  g.add_beam(vtx(0, 0, 0), vtx(1, 1, 0));
  g.add_beam(vtx(1, 0, 0), vtx(0, 1, 0));
  const auto r = resolve_intersections(g);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->num_beams(), 4);
  EXPECT_EQ(r->degree(24), 4);
  EXPECT_DOUBLE_EQ(r->offset(24, 0), 0.0);
  EXPECT_DOUBLE_EQ(r->offset(24, 1), 0.0);
}

TEST(Resolve, TJunctionSplitsBeam) {
  TrussGraph g;
  g.add_beam(vtx(0, 0, 0), vtx(1, 0, 0));
  g.add_beam(8, vtx(1, 1, 1));
  const auto r = resolve_intersections(g);
  ASSERT_TRUE(r);
  EXPECT_FALSE(r->has_beam(vtx(0, 0, 0), vtx(1, 0, 0)));
  EXPECT_TRUE(r->has_beam(vtx(0, 0, 0), 8));
  EXPECT_TRUE(r->has_beam(8, vtx(1, 0, 0)));
  EXPECT_TRUE(r->has_beam(8, vtx(1, 1, 1)));
}

TEST(Resolve, BodyCrossingUsesBodySlotOrRejects) {
  TrussGraph g;
  g.add_beam(vtx(0, 0, 0), vtx(1, 1, 1));
  g.add_beam(vtx(1, 0, 0), vtx(0, 1, 1));
  const auto r = resolve_intersections(g);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->degree(26), 4);

  // with the body slot already used elsewhere the crossing has no home
  g.add_beam(26, vtx(0, 1, 0));
  g.add_beam(26, vtx(0, 0, 1));
  g.set_offset(26, 0, 0.2);
  g.set_offset(26, 1, 0.1);
  g.set_offset(26, 2, -0.2);
  EXPECT_FALSE(resolve_intersections(g));
}

TEST(Resolve, LeavesCleanGraphUnchanged) {
  for (const TrussGraph& g : elementary_seeds()) {
    const auto r = resolve_intersections(g);
    ASSERT_TRUE(r);
    EXPECT_EQ(*r, g);
  }
}

TEST(Superpose, CommutativeAndIdempotent) {
  const auto seeds = elementary_seeds();
  for (std::size_t a = 0; a < seeds.size(); ++a) {
    const auto self = superpose(seeds[a], seeds[a]);
    ASSERT_TRUE(self);
    EXPECT_EQ(*self, seeds[a]);
    for (std::size_t b = a + 1; b < seeds.size(); ++b) {
      const auto ab = superpose(seeds[a], seeds[b]);
      const auto ba = superpose(seeds[b], seeds[a]);
      ASSERT_EQ(ab.has_value(), ba.has_value());
      if (ab) EXPECT_EQ(*ab, *ba);
    }
  }
}

TEST(Superpose, ConflictingSharedOffsetsReject) {
  TrussGraph g1 = elementary_seeds()[3], g2 = g1;
  g1.set_offset(26, 0, 0.1);
  g2.set_offset(26, 0, 0.2);
  EXPECT_FALSE(superpose(g1, g2));
}

TEST(GraphHash, QuantizedOffsets) {
  TrussGraph g = elementary_seeds()[3];
  const std::uint64_t h = graph_hash(g);
  EXPECT_EQ(h, graph_hash(elementary_seeds()[3]));
  g.set_offset(26, 0, 1e-6);
  EXPECT_EQ(h, graph_hash(g));
  g.set_offset(26, 0, 1e-3);
  EXPECT_NE(h, graph_hash(g));
  EXPECT_NE(graph_hash(elementary_seeds()[0]), graph_hash(elementary_seeds()[1]));
}
