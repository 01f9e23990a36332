#include <gtest/gtest.h>

#include <numbers>

#include "test_util.hpp"
#include "trussvae/latent_ops.hpp"

using namespace trussvae;
using namespace trussvae::testing;

namespace {

ModelState untrained() { return ModelState::create(tiny_layout(), tiny_arch(), PropertyKind::stiffness9, 5); }

}  // namespace

TEST(Slerp, EndpointsExact) {
  Eigen::VectorXd a(3), b(3);
  a << 0.3, -1.2, 0.7;
  b << 1.1, 0.4, -0.2;
  EXPECT_EQ(slerp(a, b, 0.0), a);
  EXPECT_EQ(slerp(a, b, 1.0), b);
  const auto path = slerp_path(a, b, 20);
  ASSERT_EQ(path.size(), 20u);
  EXPECT_EQ(path.front(), a);
  EXPECT_EQ(path.back(), b);
}

TEST(Slerp, OrthonormalMidpoint) {
  const Eigen::Vector2d e1(1, 0), e2(0, 1);
  const Eigen::VectorXd mid = slerp(e1, e2, 0.5);
  EXPECT_NEAR(mid[0], 1.0 / std::numbers::sqrt2, 1e-12);
  EXPECT_NEAR(mid[1], 1.0 / std::numbers::sqrt2, 1e-12);
  const Eigen::VectorXd third = slerp(e1, e2, 1.0 / 3.0);
  EXPECT_NEAR(third[0], std::cos(std::numbers::pi / 6), 1e-12);
  EXPECT_NEAR(third[1], std::sin(std::numbers::pi / 6), 1e-12);
}

TEST(Slerp, UnequalNormsUseNormalizedAngle) {
  const Eigen::Vector2d e1(1, 0), b(0, 3);
  const Eigen::VectorXd mid = slerp(e1, b, 0.5);
  EXPECT_NEAR(mid[0], std::numbers::sqrt2 / 2, 1e-12);
  EXPECT_NEAR(mid[1], 3 * std::numbers::sqrt2 / 2, 1e-12);
}

TEST(Slerp, NearParallelFallsBackToLinear) {
  Eigen::VectorXd a(3), b(3);
  a << 1, 2, 3;
  b = 2.0 * a;
  b[0] += 1e-9;
  const Eigen::VectorXd m = slerp(a, b, 0.25);
  EXPECT_LT((m - (0.75 * a + 0.25 * b)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Slerp, Degenerate) {
  const Eigen::Vector2d a(1, 0), z(0, 0);
  EXPECT_THROW(slerp(a, z, 0.5), DegenerateError);
  EXPECT_THROW(slerp(a, -a, 0.5), DegenerateError);
  EXPECT_THROW(slerp(a, Eigen::Vector3d(1, 0, 0), 0.5), ShapeError);
  EXPECT_THROW(slerp(a, Eigen::Vector2d(0, 1), 1.5), RangeError);
  EXPECT_THROW(slerp_path(a, Eigen::Vector2d(0, 1), 1), RangeError);
}

TEST(Traverse, GeometryAxesLeaveLogitsUnchanged) {
  const ModelState m = untrained();
  Rng rng = substream(1, "base", 0);
  const Eigen::VectorXd base = standard_normal_vector(rng, m.layout.d());
  for (int axis = m.layout.d_a; axis < m.layout.d(); ++axis) {
    const Traversal t = traverse(m, {base, axis, -3.0, 3.0, 7});
    EXPECT_EQ(t.partition, AxisPartition::geometry);
    for (const auto& p : t.points) EXPECT_EQ(p.decoded.logits, t.points.front().decoded.logits);
    EXPECT_NE(t.points.front().decoded.offsets, t.points.back().decoded.offsets);
  }
}

TEST(Traverse, TopologyAxesLeaveOffsetsUnchanged) {
  const ModelState m = untrained();
  Rng rng = substream(2, "base", 0);
  const Eigen::VectorXd base = standard_normal_vector(rng, m.layout.d());
  for (int axis = 0; axis < m.layout.geometry_begin(); ++axis) {
    const Traversal t = traverse(m, {base, axis, -3.0, 3.0, 7});
    EXPECT_EQ(t.partition, AxisPartition::topology);
    for (const auto& p : t.points) EXPECT_EQ(p.decoded.offsets, t.points.front().decoded.offsets);
    EXPECT_NE(t.points.front().decoded.logits, t.points.back().decoded.logits);
  }
}

TEST(Traverse, SharedAxisMovesBoth) {
  const ModelState m = untrained();
  const Traversal t = traverse(m, {Eigen::VectorXd::Zero(m.layout.d()), m.layout.geometry_begin(), -3.0, 3.0, 3});
  EXPECT_EQ(t.partition, AxisPartition::shared);
  EXPECT_NE(t.points.front().decoded.logits, t.points.back().decoded.logits);
  EXPECT_NE(t.points.front().decoded.offsets, t.points.back().decoded.offsets);
}

TEST(Traverse, ValuesAndZeroWidth) {
  const ModelState m = untrained();
  const Eigen::VectorXd base = Eigen::VectorXd::Constant(m.layout.d(), 0.5);
  const Traversal t = traverse(m, {base, 1, -2.0, 2.0, 5});
  EXPECT_EQ(t.values, (std::vector<double>{-2.0, -1.0, 0.0, 1.0, 2.0}));
  const Traversal flat = traverse(m, {base, 1, 0.5, 0.5, 4});
  for (const auto& p : flat.points) {
    EXPECT_EQ(p.z, base);
    EXPECT_EQ(p.decoded.graph, flat.points.front().decoded.graph);
  }
  EXPECT_THROW(traverse(m, {base, 1, 0.0, 1.0, 1}), RangeError);
  EXPECT_THROW(traverse(m, {base, m.layout.d(), 0.0, 1.0, 3}), RangeError);
}

TEST(Neighborhood, TinySigmaReproducesCenter) {
  const ModelState m = untrained();
  Rng rng = substream(3, "base", 0);
  const Eigen::VectorXd z0 = standard_normal_vector(rng, m.layout.d());
  const auto center = evaluate_latent(m, z0);
  for (const auto& s : neighborhood(m, z0, 1e-12, 5, 1)) {
    EXPECT_EQ(s.decoded.graph.beams(), center.decoded.graph.beams());
    for (int k = 0; k < kNumOffsets; ++k)
      EXPECT_NEAR(s.decoded.graph.offsets()[std::size_t(k)], center.decoded.graph.offsets()[std::size_t(k)], 1e-9);
  }
  EXPECT_THROW(neighborhood(m, z0, 0.0, 5, 1), RangeError);
}

TEST(SamplePrior, DeterministicAndThreadIndependent) {
  const ModelState m = untrained();
  const auto a = sample_prior(m, 30, 9, 1);
  const auto b = sample_prior(m, 30, 9, 4);
  ASSERT_EQ(a.size(), 30u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].z, b[i].z);
    EXPECT_EQ(a[i].valid(), b[i].valid());
    EXPECT_EQ(a[i].predicted, b[i].predicted);
  }
  EXPECT_EQ(validity_fraction(a), validity_fraction(b));
  EXPECT_EQ(validity_score(m, 30, 9, 1), validity_fraction(a));
}

TEST(SamplePrior, EmptyRequest) {
  const auto s = sample_prior(untrained(), 0, 1);
  EXPECT_TRUE(s.empty());
  EXPECT_TRUE(std::isnan(validity_fraction(s)));
  EXPECT_THROW(sample_prior(untrained(), -1, 1), RangeError);
}
