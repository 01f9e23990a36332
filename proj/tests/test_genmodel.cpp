#include <gtest/gtest.h>

#include "test_util.hpp"
#include "trussvae/genmodel.hpp"

using namespace trussvae;
using namespace trussvae::testing;

namespace {

ModelState tiny_model(std::uint64_t seed = 1) {
  ModelState m = ModelState::create(tiny_layout(), tiny_arch(), PropertyKind::stiffness9, seed);
  Rng rng = substream(seed, "label-stats", 0);
  for (int c = 0; c < 9; ++c) {
    m.label_mean[c] = uniform(rng, -1.0, 1.0);
    m.label_std[c] = uniform(rng, 0.5, 2.0);
  }
  return m;
}

Batch batch_from(const std::vector<DatasetRecord>& ds, const ModelState& m, std::size_t begin, std::size_t n) {
  std::vector<std::size_t> which(n);
  for (std::size_t i = 0; i < n; ++i) which[i] = begin + i;
  const EncodedData e = encode_records(ds, which);
  return {e.a, e.x, m.normalize(e.props)};
}

/// Flattened parameters of every block, in block order.
Eigen::VectorXd flat_params(const ModelState& m) {
  Eigen::Index n = 0;
  for (const ParamBlock* b : m.blocks()) n += b->values.size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const ParamBlock* b : m.blocks()) {
    out.segment(at, b->values.size()) = b->values;
    at += b->values.size();
  }
  return out;
}

ModelState with_params(ModelState m, const Eigen::VectorXd& flat) {
  Eigen::Index at = 0;
  for (ParamBlock* b : m.blocks()) {
    b->values = flat.segment(at, b->values.size());
    at += b->values.size();
  }
  return m;
}

}  // namespace

TEST(Layout, PartitionAndChecks) {
  const LatentLayout l{3, 3, 1};
  EXPECT_EQ(l.d(), 5);
  EXPECT_EQ(partition(l, 0), AxisPartition::topology);
  EXPECT_EQ(partition(l, 2), AxisPartition::shared);
  EXPECT_EQ(partition(l, 3), AxisPartition::geometry);
  EXPECT_THROW(partition(l, 5), RangeError);
  EXPECT_THROW((LatentLayout{3, 2, 3}.check()), ConfigError);
  EXPECT_THROW((LatentLayout{0, 2, 0}.check()), ConfigError);
  EXPECT_EQ(LatentLayout{}.d(), 26);
}

TEST(Serialize, RoundTripsGeneratedGraphs) {
  DatagenConfig cfg;
  cfg.n_library = 200;
  cfg.n_dataset = 1000;
  for (const auto& r : generate_dataset(cfg)) {
    const SerializedGraph s = serialize(r.graph);
    EXPECT_EQ(s.a.sum(), r.graph.num_beams());
    EXPECT_EQ(deserialize(s.a, s.x), r.graph);
  }
}

TEST(Serialize, EmptyGraphIsAllZero) {
  const SerializedGraph s = serialize(TrussGraph{});
  EXPECT_EQ(s.a.size(), 351);
  EXPECT_EQ(s.x.size(), 27);
  EXPECT_EQ(s.a.cwiseAbs().sum() + s.x.cwiseAbs().sum(), 0.0);
}

TEST(Serialize, RejectsBadInput) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(351), x = Eigen::VectorXd::Zero(27);
  a[5] = 0.5;
  EXPECT_THROW(deserialize(a, x), FormatError);
  EXPECT_THROW(deserialize(Eigen::VectorXd::Zero(350), x), ShapeError);
}

TEST(Compose, SharedBlockIsMean) {
  const LatentLayout l{3, 3, 1};
  Eigen::MatrixXd ha(1, 3), hx(1, 3);
  ha << 1, 2, 3;
  hx << 5, 6, 7;
  Eigen::MatrixXd expect(1, 5);
  expect << 1, 2, 4, 6, 7;
  EXPECT_EQ(detail::compose(l, ha, hx), expect);

  Eigen::MatrixXd cat(1, 6);
  cat << 1, 2, 3, 5, 6, 7;
  EXPECT_EQ(detail::compose(LatentLayout{3, 3, 0}, ha, hx), cat);
  Eigen::MatrixXd all(1, 3);
  all << 3, 4, 5;
  EXPECT_EQ(detail::compose(LatentLayout{3, 3, 3}, ha, hx), all);
}

TEST(Encode, ComposesEncoderHeads) {
  const ModelState m = tiny_model();
  const TrussGraph g = elementary_seeds()[0];
  const SerializedGraph s = serialize(g);
  const Eigen::VectorXd ha = forward(m.encoder_a, s.a), hx = forward(m.encoder_x, s.x);
  const Encoding e = encode(m, g);
  EXPECT_DOUBLE_EQ(e.mu(0, 0), ha[0]);
  EXPECT_DOUBLE_EQ(e.mu(0, 2), 0.5 * (ha[2] + hx[0]));
  EXPECT_DOUBLE_EQ(e.mu(0, 4), hx[2]);
  EXPECT_DOUBLE_EQ(e.log_sigma(0, 2), 0.5 * (ha[5] + hx[3]));
}

TEST(Reparameterize, Examples) {
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(1, 3), ls = Eigen::MatrixXd::Zero(1, 3), eps(1, 3);
  eps << 0.3, -1.0, 2.0;
  EXPECT_EQ(reparameterize(mu, ls, eps), eps);
  ls.setConstant(std::log(2.0));
  mu.setConstant(1.0);
  EXPECT_LT((reparameterize(mu, ls, eps) - (mu + 2.0 * eps)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(reparameterize(mu, ls, Eigen::MatrixXd::Zero(2, 3)), ShapeError);
}

TEST(Kld, AnalyticPoints) {
  Eigen::MatrixXd mu(3, 1), ls(3, 1);
  mu << 0, 1, 0;
  ls << 0, 0, 1;
  const Eigen::VectorXd k = kld_closed_form(mu, ls);
  EXPECT_NEAR(k[0], 0.0, 1e-12);
  EXPECT_NEAR(k[1], 0.5, 1e-12);
  EXPECT_NEAR(k[2], (std::exp(2.0) - 3.0) / 2.0, 1e-12);
}

TEST(Kld, MonteCarloAgreement) {
  Rng rng = substream(17, "kld-mc", 0);
  for (int trial = 0; trial < 2; ++trial) {
    Eigen::MatrixXd mu(1, 4), ls(1, 4);
    for (int c = 0; c < 4; ++c) {
      mu(0, c) = uniform(rng, -1.0, 1.0);
      ls(0, c) = uniform(rng, -0.5, 0.5);
    }
    const double exact = kld_closed_form(mu, ls)[0];
    double acc = 0.0;
    const int n = 1000000;
    for (int s = 0; s < n; ++s) {
      for (int c = 0; c < 4; ++c) {
        const double e = standard_normal(rng);
        const double z = mu(0, c) + std::exp(ls(0, c)) * e;
        acc += -ls(0, c) - 0.5 * e * e + 0.5 * z * z;
      }
    }
    EXPECT_NEAR(acc / n / exact, 1.0, 0.01);
  }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  const auto& ds = labeled_dataset(40);
  for (ReconLoss kind : {ReconLoss::mse, ReconLoss::bce}) {
    for (int draw = 0; draw < 3; ++draw) {
      const ModelState m = tiny_model(100 + std::uint64_t(draw));
      const Batch b = batch_from(ds, m, std::size_t(draw) * 5, 5);
      Rng rng = substream(draw, "loss-grad", 0);
      Eigen::MatrixXd eps(5, m.layout.d());
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = standard_normal(rng);
      LossWeights w;
      w.recon_a_kind = kind;
      const double beta = 0.7;

      ad::Tape t;
      const ModelVars v = register_params(t, m);
      t.backward(loss_on_tape(m, v, b, eps, beta, w).total);
      Eigen::VectorXd grad(flat_params(m).size());
      Eigen::Index at = 0;
      for (int k = 0; k < ModelState::kNumBlocks; ++k) {
        const Eigen::VectorXd gk = t.grad(v.block[k]).col(0);
        grad.segment(at, gk.size()) = gk;
        at += gk.size();
      }
      const Eigen::VectorXd p0 = flat_params(m);
      auto f = [&](const Eigen::VectorXd& p) { return loss(with_params(m, p), b, eps, beta, w).total; };
      for (int dir = 0; dir < 4; ++dir) {
        Eigen::VectorXd d(p0.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = standard_normal(rng);
        EXPECT_LT(directional_error(f, p0, grad, d), 1e-5);
      }
    }
  }
}

TEST(Loss, TermsCombineWithWeights) {
  const auto& ds = labeled_dataset(40);
  const ModelState m = tiny_model();
  const Batch b = batch_from(ds, m, 0, 8);
  const Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(8, m.layout.d());
  LossWeights w{2.0, 3.0, 5.0, ReconLoss::mse};
  const auto t = loss(m, b, eps, 0.25, w);
  EXPECT_NEAR(t.total, 2.0 * t.recon_a + 3.0 * t.recon_x + 5.0 * t.prop + 0.25 * t.kld, 1e-12 * t.total);

  const Encoding e = encode(m, b.a, b.x);
  EXPECT_NEAR(t.kld, kld_closed_form(e.mu, e.log_sigma).mean(), 1e-12);
  EXPECT_NEAR(t.prop, (forward(m.predictor, e.mu) - b.props).squaredNorm() / 8.0, 1e-12);
}

TEST(Decode, TiesAreAbsentAndOffsetsClamped) {
  ModelState m = tiny_model();
  m.decoder_a.values.setZero();
  m.decoder_x.values.setZero();
  m.decoder_x.values.tail(27).setConstant(5.0);
  const Eigen::VectorXd z = Eigen::VectorXd::Ones(m.layout.d());
  const DecodeResult r = decode(m, z);
  EXPECT_EQ(r.graph.num_beams(), 0);
  EXPECT_EQ(r.offsets.maxCoeff(), kOffsetBound);
  EXPECT_EQ(r.graph, TrussGraph{});
  EXPECT_FALSE(repair(r.graph));
  EXPECT_THROW(decode(m, Eigen::VectorXd::Ones(3)), ShapeError);
}

TEST(Decode, AssembleZeroesInactiveOffsets) {
  Eigen::RowVectorXd logits = Eigen::RowVectorXd::Constant(351, -10.0);
  logits[pair_index(0, 26)] = 3.0;
  logits[pair_index(7, 26)] = 3.0;
  Eigen::RowVectorXd off = Eigen::RowVectorXd::Constant(27, 0.1);
  const TrussGraph g = assemble(logits, off);
  EXPECT_EQ(g.num_beams(), 2);
  EXPECT_EQ(g.offset(26, 0), 0.1);
  EXPECT_EQ(g.offset(8, 0), 0.0);
}

TEST(Predict, DenormalizesAndChecksKind) {
  const ModelState m = tiny_model();
  const Eigen::MatrixXd p = Eigen::MatrixXd::Random(4, 9);
  EXPECT_LT((m.denormalize(m.normalize(p)) - p).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(m.layout.d());
  const PropertyVector pv = predict_properties(m, mu, PropertyKind::stiffness9);
  const Eigen::VectorXd raw = forward(m.predictor, mu);
  EXPECT_DOUBLE_EQ(pv.values[3], raw[3] * m.label_std[3] + m.label_mean[3]);
  EXPECT_THROW(predict_properties(m, mu, PropertyKind::curve13), ConfigError);
}

TEST(ModelState, CheckCatchesBadState) {
  ModelState m = tiny_model();
  m.label_std[2] = 0.0;
  EXPECT_THROW(m.check(), ConfigError);
  ModelState n = tiny_model();
  n.predictor.values.conservativeResize(3);
  EXPECT_THROW(n.check(), ShapeError);
}

TEST(BetaSchedule, CyclicalRamp) {
  TrainConfig c;
  EXPECT_EQ(beta_schedule(0, c), 0.0);
  EXPECT_EQ(beta_schedule(50, c), 0.0);
  EXPECT_NEAR(beta_schedule(51, c), 0.04, 1e-15);
  EXPECT_EQ(beta_schedule(75, c), 1.0);
  EXPECT_EQ(beta_schedule(99, c), 1.0);
  EXPECT_EQ(beta_schedule(100, c), 0.0);
  EXPECT_NEAR(beta_schedule(160, c), 0.4, 1e-15);
  EXPECT_THROW(beta_schedule(-1, c), RangeError);
}

TEST(Split, DisjointAndSized) {
  const DataSplit s = split_indices(1000, TrainConfig{});
  EXPECT_EQ(s.train.size(), 900u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 90u);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_indices(1000, TrainConfig{}).test, s.test);
}

TEST(Metrics, RSquaredAndAccuracy) {
  Eigen::ArrayXd t(4), p(4);
  t << 1, 2, 3, 4;
  EXPECT_EQ(r_squared(t, t), 1.0);
  p.setConstant(2.5);
  EXPECT_EQ(r_squared(t, p), 0.0);

  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(1, 351), probs = Eigen::MatrixXd::Constant(1, 351, 0.1);
  truth(0, 3) = 1.0;
  EXPECT_DOUBLE_EQ(topology_accuracy(probs, truth), 350.0 / 351.0);
  probs(0, 3) = 0.9;
  EXPECT_EQ(topology_accuracy(probs, truth), 1.0);
}

TEST(Train, DeterministicAcrossThreads) {
  const auto& ds = labeled_dataset(80);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 40;
  cfg.arch = tiny_arch();
  cfg.val_fraction = 0.05;
  cfg.test_fraction = 0.05;
  const TrainResult a = train(ds, cfg, tiny_layout(), 1);
  const TrainResult b = train(ds, cfg, tiny_layout(), 3);
  for (int k = 0; k < ModelState::kNumBlocks; ++k) EXPECT_EQ(a.model.blocks()[k]->values, b.model.blocks()[k]->values);
  EXPECT_EQ(a.history.size(), 2u);
  EXPECT_EQ(a.model.train_config_hash, cfg.hash());
}

TEST(Train, LossDecreases) {
  const auto& ds = labeled_dataset(160);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 32;
  cfg.beta_onset = 90;  // keep beta at zero for this short run
  cfg.learning_rate = 3e-3;
  cfg.arch = tiny_arch();
  const TrainResult r = train(ds, cfg, tiny_layout(), 0);
  auto window = [&](int from) {
    double s = 0.0;
    for (int e = from; e < from + 10; ++e) s += r.history[std::size_t(e)].train.total;
    return s / 10.0;
  };
  EXPECT_LT(window(20), window(0));
}

TEST(Train, DivergenceKeepsLastFiniteModel) {
  const auto& ds = labeled_dataset(40);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e300;
  cfg.arch = tiny_arch();
  try {
    train(ds, cfg, tiny_layout(), 1);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    for (const ParamBlock* b : e.last_finite.blocks()) EXPECT_TRUE(b->values.allFinite());
    EXPECT_GE(e.epoch, 0);
  }
}

TEST(Train, ConfigChecks) {
  TrainConfig c;
  c.beta_onset = 100;
  EXPECT_THROW(c.check(), ConfigError);
  c = TrainConfig{};
  c.test_fraction = 0.5;
  EXPECT_THROW(c.check(), ConfigError);
  EXPECT_THROW(train({}, TrainConfig{}, LatentLayout{}), ConfigError);
  TrainConfig d;
  d.learning_rate = 2e-3;
  EXPECT_NE(d.hash(), TrainConfig{}.hash());
}

TEST(Evaluate, MetricsInRange) {
  const auto& ds = labeled_dataset(80);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const EncodedData d = encode_records(ds, all);
  const ModelState m = ModelState::create(tiny_layout(), tiny_arch(), PropertyKind::stiffness9, 3);
  const EvalMetrics e = evaluate(m, d, 50, 2, 2);
  EXPECT_GE(e.topology_accuracy, 0.0);
  EXPECT_LE(e.topology_accuracy, 1.0);
  EXPECT_EQ(e.r2_properties.size(), 9u);
  EXPECT_GE(e.validity_score, 0.0);
  EXPECT_LE(e.validity_score, 1.0);
  EXPECT_EQ(e.validity_score, validity_score(m, 50, 2, 1));
  EXPECT_TRUE(std::isnan(validity_score(m, 0, 2)));
}
