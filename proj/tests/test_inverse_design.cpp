#include <gtest/gtest.h>

#include "test_util.hpp"
#include "trussvae/inverse_design.hpp"
#include "trussvae/latent_ops.hpp"

using namespace trussvae;
using namespace trussvae::testing;

namespace {

Eigen::VectorXd as_vector(const StiffnessRecord& r) { return Eigen::Map<const Eigen::VectorXd>(r.s.data(), 9); }

Objective objective(ObjectiveKind k) {
  Objective o;
  o.kind = k;
  return o;
}

/// Untrained model whose predictions stay close to an SPD stiffness.
ModelState spd_model(std::uint64_t seed = 4) {
  ModelState m = ModelState::create(tiny_layout(), tiny_arch(), PropertyKind::stiffness9, seed);
  m.label_mean = as_vector(StiffnessRecord::cubic(0.05, 0.02, 0.015));
  m.label_std = Eigen::VectorXd::Constant(9, 0.002);
  return m;
}

/// A latent point whose decode survives repair.
Eigen::VectorXd valid_latent(const ModelState& m, std::uint64_t seed) {
  for (std::uint64_t i = 0;; ++i) {
    Rng rng = substream(seed, "valid-z", i);
    const Eigen::VectorXd z = standard_normal_vector(rng, m.layout.d());
    if (evaluate_latent(m, z).valid()) return z;
  }
}

}  // namespace

TEST(Objective, IsotropicPoissonOracle) {
  const auto e = objective_value(as_vector(StiffnessRecord::isotropic(1.0, 0.3)), objective(ObjectiveKind::min_nu21));
  EXPECT_TRUE(e.spd);
  EXPECT_NEAR(e.value, 0.3, 1e-12);
  const auto y = objective_value(as_vector(StiffnessRecord::isotropic(2.0, 0.3)), objective(ObjectiveKind::max_E22));
  EXPECT_NEAR(y.value, -2.0, 1e-12);
}

TEST(Objective, CubicBulkShearOracle) {
  const auto e = objective_value(as_vector(StiffnessRecord::cubic(2.0, 1.0, 0.5)), objective(ObjectiveKind::max_KvGv));
  EXPECT_NEAR(e.value, -8.0 / 3.0, 1e-12);
}

TEST(Objective, MatchIsZeroAtTarget) {
  Objective o = objective(ObjectiveKind::match_stiffness);
  const StiffnessRecord t = StiffnessRecord::cubic(2.0, 1.0, 0.5);
  o.target = PropertyVector::from_stiffness(t);
  EXPECT_EQ(objective_value(as_vector(t), o).value, 0.0);
  EXPECT_EQ(objective_value(as_vector(t), o).grad.cwiseAbs().maxCoeff(), 0.0);
  Eigen::VectorXd p = as_vector(t);
  p[0] += 0.9;
  EXPECT_NEAR(objective_value(p, o).value, 0.3 / 2.0, 1e-12);

  Objective curve = objective(ObjectiveKind::match_curve);
  EXPECT_THROW(curve.check(), ConfigError);
  curve.target = PropertyVector{PropertyKind::curve13, std::vector<double>(13, 0.0)};
  EXPECT_THROW(curve.check(), ConfigError);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  Rng rng = substream(1, "obj-grad", 0);
  Objective match = objective(ObjectiveKind::match_stiffness);
  match.target = PropertyVector::from_stiffness(StiffnessRecord::cubic(0.06, 0.01, 0.02));
  for (const Objective& o : {objective(ObjectiveKind::max_E22), objective(ObjectiveKind::min_nu21),
                             objective(ObjectiveKind::max_KvGv), match}) {
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::Matrix3d b;
      for (int i = 0; i < 9; ++i) b.data()[i] = uniform(rng, -0.2, 0.2);
      const Eigen::Matrix3d n = b * b.transpose() + 0.02 * Eigen::Matrix3d::Identity();
      Eigen::VectorXd p(9);
      p << n(0, 0), n(0, 1), n(0, 2), n(1, 1), n(1, 2), n(2, 2), uniform(rng, 0.01, 0.05), uniform(rng, 0.01, 0.05),
          uniform(rng, 0.01, 0.05);
      const auto e = objective_value(p, o);
      ASSERT_TRUE(e.spd);
      auto f = [&](const Eigen::VectorXd& q) { return objective_value(q, o).value; };
      Eigen::VectorXd d(9);
      for (int i = 0; i < 9; ++i) d[i] = standard_normal(rng);
      EXPECT_LT(directional_error(f, p, e.grad, d, 1e-7), 1e-5) << to_string(o.kind);
    }
  }
}

TEST(Objective, NonSpdUsesBarrier) {
  Objective o = objective(ObjectiveKind::max_E22);
  o.barrier_tau = 0.01;
  Eigen::VectorXd p = as_vector(StiffnessRecord::cubic(1.0, 2.0, 0.3));
  const auto e = objective_value(p, o);
  EXPECT_FALSE(e.spd);
  EXPECT_GT(e.value, 1e3);
  auto f = [&](const Eigen::VectorXd& q) { return objective_value(q, o).value; };
  Rng rng = substream(2, "barrier", 0);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd d(9);
    for (int i = 0; i < 9; ++i) d[i] = standard_normal(rng);
    EXPECT_LT(directional_error(f, p, e.grad, d, 1e-6), 1e-5);
  }
  p[6] = -0.1;
  EXPECT_LT(objective_value(p, o).grad[6], 0.0);  // raising the negative shear lowers the barrier
}

TEST(Objective, Parsing) {
  EXPECT_EQ(parse_objective_kind("max_KvGv"), ObjectiveKind::max_KvGv);
  EXPECT_THROW(parse_objective_kind("max_E33"), ConfigError);
  EXPECT_EQ(parse_ste_mode("none"), SteMode::none);
  EXPECT_THROW(parse_ste_mode("soft"), ConfigError);
  EXPECT_THROW(objective_value(Eigen::VectorXd::Zero(13), objective(ObjectiveKind::max_E22)), ConfigError);
}

TEST(SeedSelection, OrdersByLabelObjective) {
  const ModelState m = spd_model();
  std::vector<DatasetRecord> recs(3);
  const double e22[3] = {0.01, 0.05, 0.03};
  for (int i = 0; i < 3; ++i) {
    recs[std::size_t(i)].graph = elementary_seeds()[std::size_t(i)];
    recs[std::size_t(i)].properties = PropertyVector::from_stiffness(StiffnessRecord::isotropic(e22[i], 0.3));
  }
  bool truncated = true;
  const auto seeds = seed_selection(recs, m, objective(ObjectiveKind::max_E22), 2, &truncated);
  EXPECT_FALSE(truncated);
  ASSERT_EQ(seeds.size(), 2u);
  EXPECT_EQ(seeds[0].record, 1u);
  EXPECT_EQ(seeds[1].record, 2u);
  EXPECT_NEAR(seeds[0].objective, -0.05, 1e-12);
  EXPECT_EQ(seeds[0].z, Eigen::VectorXd(encode(m, recs[1].graph).mu.row(0).transpose()));

  seed_selection(recs, m, objective(ObjectiveKind::max_E22), 10, &truncated);
  EXPECT_TRUE(truncated);
}

TEST(Projection, GradientMatchesFiniteDifferences) {
  const ModelState m = spd_model();
  for (SteMode ste : {SteMode::none, SteMode::probabilities}) {
    for (ObjectiveKind k : {ObjectiveKind::max_E22, ObjectiveKind::min_nu21, ObjectiveKind::max_KvGv}) {
      const Objective o = objective(k);
      const Eigen::VectorXd z = valid_latent(m, std::uint64_t(k) + 10 * std::uint64_t(ste));
      const Projection p = project_and_predict(m, z, o, ste);
      ASSERT_FALSE(p.rejected);
      ASSERT_TRUE(p.spd);
      auto f = [&](const Eigen::VectorXd& q) { return project_and_predict(m, q, o, ste).objective; };
      Rng rng = substream(3, "proj-dir", std::uint64_t(k));
      for (int t = 0; t < 3; ++t) {
        Eigen::VectorXd d = standard_normal_vector(rng, m.layout.d());
        EXPECT_LT(directional_error(f, z, p.grad_z, d), 1e-4) << to_string(ste) << " " << to_string(k);
      }
    }
  }
}

TEST(Projection, IdentitySteSharesForwardWithNone) {
  const ModelState m = spd_model();
  const Eigen::VectorXd z = valid_latent(m, 77);
  const Objective o = objective(ObjectiveKind::max_E22);
  const Projection a = project_and_predict(m, z, o, SteMode::identity);
  const Projection b = project_and_predict(m, z, o, SteMode::none);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.mu_proj, Eigen::VectorXd(encode(m, a.graph).mu.row(0).transpose()));
}

TEST(Projection, RejectedDecodeGetsPenalty) {
  ModelState m = spd_model();
  m.decoder_a.values.setZero();
  const Projection p = project_and_predict(m, Eigen::VectorXd::Zero(m.layout.d()), objective(ObjectiveKind::max_E22),
                                           SteMode::identity, 123.0);
  EXPECT_TRUE(p.rejected);
  EXPECT_EQ(p.objective, 123.0);
  EXPECT_EQ(p.grad_z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(OptimizeSeed, ZeroGradientKeepsSeed) {
  ModelState m = spd_model();
  m.predictor.values.setZero();
  OptimConfig cfg;
  cfg.patience = 5;
  const Eigen::VectorXd z0 = valid_latent(m, 5);
  const SeedRun r = optimize_seed(m, objective(ObjectiveKind::max_E22), z0, cfg);
  EXPECT_LT(r.steps.size(), 10u);
  for (const auto& s : r.steps) EXPECT_EQ(s.z, z0);
  ASSERT_TRUE(r.best_graph);
  EXPECT_EQ(r.best_z, z0);
}

TEST(OptimizeSeed, ImprovesPredictedObjective) {
  const ModelState m = spd_model();
  OptimConfig cfg;
  cfg.max_steps = 60;
  cfg.learning_rate = 0.05;
  const Objective o = objective(ObjectiveKind::max_E22);
  const Eigen::VectorXd z0 = valid_latent(m, 6);
  const SeedRun r = optimize_seed(m, o, z0, cfg);
  ASSERT_FALSE(r.steps.empty());
  EXPECT_LE(r.best_predicted, r.steps.front().objective);
  for (const auto& s : r.steps)
    if (!s.rejected) {
      EXPECT_GE(s.objective, r.best_predicted);
    }
}

TEST(Optimize, NeverWorseThanSeedsAndDeterministic) {
  const auto& ds = labeled_dataset(60);
  const ModelState m = spd_model();
  const Objective o = objective(ObjectiveKind::max_E22);
  const auto seeds = seed_selection(ds, m, o, 4);
  OptimConfig cfg;
  cfg.max_steps = 15;
  cfg.init_noise = 0.1;
  const OptimRun a = optimize(m, o, seeds, ds, cfg, 1);
  const OptimRun b = optimize(m, o, seeds, ds, cfg, 3);
  ASSERT_FALSE(a.candidates.empty());
  const VerifiedCandidate& best = a.best();
  ASSERT_TRUE(best.fe_objective);
  for (const auto& c : a.candidates)
    if (c.fe_objective) {
      EXPECT_LE(*best.fe_objective, *c.fe_objective);
    }
  EXPECT_EQ(a.predictor_order.size(), a.candidates.size());
  for (std::size_t i = 1; i < a.predictor_order.size(); ++i)
    EXPECT_LE(a.candidates[a.predictor_order[i - 1]].predicted_objective,
              a.candidates[a.predictor_order[i]].predicted_objective);

  ASSERT_EQ(a.candidates.size(), b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    EXPECT_EQ(a.candidates[i].graph, b.candidates[i].graph);
    EXPECT_EQ(a.candidates[i].fe_objective, b.candidates[i].fe_objective);
  }
  for (std::size_t i = 0; i < a.runs.size(); ++i) ASSERT_EQ(a.runs[i].steps.size(), b.runs[i].steps.size());
}

TEST(Optimize, AllRejectedFails) {
  const auto& ds = labeled_dataset(60);
  ModelState m = spd_model();
  const Objective o = objective(ObjectiveKind::max_E22);
  const auto seeds = seed_selection(ds, m, o, 3);
  m.decoder_a.values.setZero();
  EXPECT_THROW(optimize(m, o, seeds, ds, OptimConfig{}, 1), OptimizationFailed);
  EXPECT_THROW(optimize(m, o, {}, ds, OptimConfig{}, 1), OptimizationFailed);
}

TEST(Verify, CurveObjectivesAreSkipped) {
  std::vector<VerifiedCandidate> c(1);
  c[0].graph = elementary_seeds()[0];
  Objective o = objective(ObjectiveKind::match_curve);
  verify(c, o, MaterialParams{}, 0.15);
  EXPECT_FALSE(c[0].fe_objective);
  EXPECT_FALSE(c[0].note.empty());
}
