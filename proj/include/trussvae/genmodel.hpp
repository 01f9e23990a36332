#pragma once

/**
 * @file genmodel.hpp
 * @brief Variational autoencoder over serialized truss graphs with a jointly
 *        trained property predictor.
 *
 * Two encoders see the adjacency upper triangle (351 entries) and the packed
 * offsets (27 entries). Their latent heads overlap in d_Ax shared dimensions:
 *
 *   z = [ topology-specific | shared | geometry-specific ]
 *        0 .. d_A-d_Ax        .. d_A    .. d
 *
 * The adjacency decoder reads z[0, d_A) and the offset decoder reads
 * z[d_A-d_Ax, d), so moving along a geometry-specific axis cannot change the
 * logits, and moving along a topology-specific axis cannot change the offsets.
 */

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trussvae/adam.hpp"
#include "trussvae/autodiff.hpp"
#include "trussvae/datagen.hpp"
#include "trussvae/mlp.hpp"
#include "trussvae/parallel.hpp"
#include "trussvae/properties.hpp"
#include "trussvae/rng.hpp"
#include "trussvae/truss_graph.hpp"

namespace trussvae {

struct LatentLayout {
  int d_a = 12;
  int d_x = 16;
  int d_ax = 2;

  int d() const { return d_a + d_x - d_ax; }
  /// First index of the offset decoder's input slice.
  int geometry_begin() const { return d_a - d_ax; }

  void check() const {
    if (d_a <= 0 || d_x <= 0) throw ConfigError("latent widths d_A and d_X must be positive");
    if (d_ax < 0 || d_ax > std::min(d_a, d_x)) throw ConfigError("d_Ax must lie in [0, min(d_A, d_X)]");
  }

  bool operator==(const LatentLayout&) const = default;
};

enum class AxisPartition : std::uint8_t { topology, shared, geometry };

inline std::string_view to_string(AxisPartition p) {
  switch (p) {
    case AxisPartition::topology: return "topology";
    case AxisPartition::shared: return "shared";
    case AxisPartition::geometry: return "geometry";
  }
  return "topology";
}

inline AxisPartition partition(const LatentLayout& l, int axis) {
  if (axis < 0 || axis >= l.d()) throw RangeError("latent axis " + std::to_string(axis) + " out of range");
  if (axis < l.geometry_begin()) return AxisPartition::topology;
  if (axis < l.d_a) return AxisPartition::shared;
  return AxisPartition::geometry;
}

// ---------------------------------------------------------------- serialize

struct SerializedGraph {
  Eigen::VectorXd a;  ///< 351 entries in {0, 1}
  Eigen::VectorXd x;  ///< 27 packed offsets
};

inline SerializedGraph serialize(const TrussGraph& g) {
  SerializedGraph s{Eigen::VectorXd::Zero(kNumPairs), Eigen::VectorXd::Zero(kNumOffsets)};
  for (int i = 0; i < kNumSlots; ++i)
    for (int j = i + 1; j < kNumSlots; ++j)
      if (g.has_beam(i, j)) s.a[pair_index(i, j)] = 1.0;
  for (int k = 0; k < kNumOffsets; ++k) s.x[k] = g.offsets()[k];
  return s;
}

inline TrussGraph deserialize(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (a.size() != kNumPairs || x.size() != kNumOffsets) throw ShapeError("serialized graph must have 351 + 27 entries");
  TrussGraph g;
  for (int i = 0; i < kNumSlots; ++i)
    for (int j = i + 1; j < kNumSlots; ++j) {
      const double v = a[pair_index(i, j)];
      if (v != 0.0 && v != 1.0) throw FormatError("adjacency entries must be exactly 0 or 1");
      if (v == 1.0) g.add_beam(i, j);
    }
  for (int k = 0; k < kNumOffsets; ++k) g.offsets()[k] = x[k];
  return g;
}

/// Row-stacked serialization of many graphs.
inline void serialize_rows(const std::vector<const TrussGraph*>& graphs, Eigen::MatrixXd& a, Eigen::MatrixXd& x) {
  a.setZero(Eigen::Index(graphs.size()), kNumPairs);
  x.setZero(Eigen::Index(graphs.size()), kNumOffsets);
  for (std::size_t r = 0; r < graphs.size(); ++r) {
    const SerializedGraph s = serialize(*graphs[r]);
    a.row(Eigen::Index(r)) = s.a.transpose();
    x.row(Eigen::Index(r)) = s.x.transpose();
  }
}

// -------------------------------------------------------------------- model

struct ArchConfig {
  std::vector<int> encoder_a_hidden{256, 128};
  std::vector<int> encoder_x_hidden{64, 64};
  std::vector<int> decoder_a_hidden{128, 256};
  std::vector<int> decoder_x_hidden{64, 64};
  std::vector<int> predictor_hidden{64, 64};
  Activation hidden = Activation::tanh;

  bool operator==(const ArchConfig&) const = default;
};

struct ModelState {
  LatentLayout layout;
  PropertyKind kind = PropertyKind::stiffness9;
  ParamBlock encoder_a, encoder_x, decoder_a, decoder_x, predictor;
  Eigen::VectorXd label_mean;  ///< per-component statistics of the training labels
  Eigen::VectorXd label_std;
  std::uint64_t train_config_hash = 0;

  static constexpr int kNumBlocks = 5;

  std::array<ParamBlock*, kNumBlocks> blocks() { return {&encoder_a, &encoder_x, &decoder_a, &decoder_x, &predictor}; }
  std::array<const ParamBlock*, kNumBlocks> blocks() const {
    return {&encoder_a, &encoder_x, &decoder_a, &decoder_x, &predictor};
  }

  int property_width() const { return property_length(kind); }

  void check() const {
    layout.check();
    for (const ParamBlock* b : blocks()) b->check();
    const int d = layout.d(), p = property_width();
    if (encoder_a.spec.input_width() != kNumPairs || encoder_a.spec.output_width() != 2 * layout.d_a ||
        encoder_x.spec.input_width() != kNumOffsets || encoder_x.spec.output_width() != 2 * layout.d_x ||
        decoder_a.spec.input_width() != layout.d_a || decoder_a.spec.output_width() != kNumPairs ||
        decoder_x.spec.input_width() != layout.d_x || decoder_x.spec.output_width() != kNumOffsets ||
        predictor.spec.input_width() != d || predictor.spec.output_width() != p)
      throw ConfigError("network widths do not match the latent layout and property kind");
    if (label_mean.size() != p || label_std.size() != p) throw ConfigError("label statistics have the wrong length");
    if (!label_mean.allFinite() || !(label_std.array() > 0.0).all() || !label_std.allFinite())
      throw ConfigError("label standard deviations must be positive and finite");
  }

  /// Fresh Glorot-initialized model with identity label normalization.
  static ModelState create(const LatentLayout& layout, const ArchConfig& arch, PropertyKind kind, std::uint64_t seed) {
    layout.check();
    auto widths = [](int in, const std::vector<int>& hidden, int out) {
      std::vector<int> w{in};
      w.insert(w.end(), hidden.begin(), hidden.end());
      w.push_back(out);
      return w;
    };
    ModelState m;
    m.layout = layout;
    m.kind = kind;
    const int p = property_length(kind);
    const MlpSpec specs[kNumBlocks] = {
        MlpSpec::make(widths(kNumPairs, arch.encoder_a_hidden, 2 * layout.d_a), arch.hidden),
        MlpSpec::make(widths(kNumOffsets, arch.encoder_x_hidden, 2 * layout.d_x), arch.hidden),
        MlpSpec::make(widths(layout.d_a, arch.decoder_a_hidden, kNumPairs), arch.hidden),
        MlpSpec::make(widths(layout.d_x, arch.decoder_x_hidden, kNumOffsets), arch.hidden),
        MlpSpec::make(widths(layout.d(), arch.predictor_hidden, p), arch.hidden),
    };
    const auto bs = m.blocks();
    for (int b = 0; b < kNumBlocks; ++b) {
      Rng rng = substream(seed, "init", std::uint64_t(b));
      *bs[b] = init_params(specs[b], rng);
    }
    m.label_mean = Eigen::VectorXd::Zero(p);
    m.label_std = Eigen::VectorXd::Ones(p);
    return m;
  }

  Eigen::MatrixXd normalize(const Eigen::MatrixXd& props) const {
    return ((props.rowwise() - label_mean.transpose()).array().rowwise() / label_std.transpose().array()).matrix();
  }
  Eigen::MatrixXd denormalize(const Eigen::MatrixXd& z) const {
    return ((z.array().rowwise() * label_std.transpose().array()).rowwise() + label_mean.transpose().array()).matrix();
  }
};

// ------------------------------------------------------------------- encode

namespace detail {

/// Overlaps the topology and geometry heads: the shared block is their mean.
inline Eigen::MatrixXd compose(const LatentLayout& l, const Eigen::MatrixXd& ha, const Eigen::MatrixXd& hx) {
  const Eigen::Index n = ha.rows();
  Eigen::MatrixXd z(n, l.d());
  const int t = l.geometry_begin();
  z.leftCols(t) = ha.leftCols(t);
  z.middleCols(t, l.d_ax) = 0.5 * (ha.middleCols(t, l.d_ax) + hx.leftCols(l.d_ax));
  z.rightCols(l.d_x - l.d_ax) = hx.rightCols(l.d_x - l.d_ax);
  return z;
}

inline ad::Var compose(const LatentLayout& l, ad::Var ha, ad::Var hx) {
  const int t = l.geometry_begin();
  std::vector<ad::Var> parts;
  if (t > 0) parts.push_back(ad::slice_cols(ha, 0, t));
  if (l.d_ax > 0) parts.push_back(ad::scale(ad::add(ad::slice_cols(ha, t, l.d_ax), ad::slice_cols(hx, 0, l.d_ax)), 0.5));
  if (l.d_x > l.d_ax) parts.push_back(ad::slice_cols(hx, l.d_ax, l.d_x - l.d_ax));
  return ad::concat_cols(parts);
}

}  // namespace detail

struct Encoding {
  Eigen::MatrixXd mu;         ///< n x d
  Eigen::MatrixXd log_sigma;  ///< n x d
};

inline Encoding encode(const ModelState& m, const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd ea = forward(m.encoder_a, a);
  const Eigen::MatrixXd ex = forward(m.encoder_x, x);
  const LatentLayout& l = m.layout;
  return {detail::compose(l, ea.leftCols(l.d_a), ex.leftCols(l.d_x)),
          detail::compose(l, ea.rightCols(l.d_a), ex.rightCols(l.d_x))};
}

inline Encoding encode(const ModelState& m, const TrussGraph& g) {
  const SerializedGraph s = serialize(g);
  return encode(m, Eigen::MatrixXd(s.a.transpose()), Eigen::MatrixXd(s.x.transpose()));
}

inline Eigen::MatrixXd reparameterize(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& log_sigma,
                                      const Eigen::MatrixXd& eps) {
  if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols() || mu.rows() != eps.rows() ||
      mu.cols() != eps.cols())
    throw ShapeError("reparameterize: mu, log_sigma and eps shapes differ");
  return mu + eps.cwiseProduct(log_sigma.array().exp().matrix());
}

// ------------------------------------------------------------------- decode

inline Eigen::MatrixXd decode_logits(const ModelState& m, const Eigen::MatrixXd& z) {
  return forward(m.decoder_a, Eigen::MatrixXd(z.leftCols(m.layout.d_a)));
}

/// Offsets clamped to the slot bound.
inline Eigen::MatrixXd decode_offsets(const ModelState& m, const Eigen::MatrixXd& z) {
  const Eigen::MatrixXd raw = forward(m.decoder_x, Eigen::MatrixXd(z.middleCols(m.layout.geometry_begin(), m.layout.d_x)));
  return raw.cwiseMax(-kOffsetBound).cwiseMin(kOffsetBound);
}

/// Edge present iff sigmoid(logit) > 0.5 (ties are absent); inactive offsets zeroed.
inline TrussGraph assemble(const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                           const Eigen::Ref<const Eigen::RowVectorXd>& offsets) {
  const Eigen::RowVectorXd p = ad::sigmoid_values(logits);
  TrussGraph g;
  for (int i = 0; i < kNumSlots; ++i)
    for (int j = i + 1; j < kNumSlots; ++j)
      if (p[pair_index(i, j)] > 0.5) g.add_beam(i, j);
  for (int k = 0; k < kNumOffsets; ++k) g.offsets()[k] = offsets[k];
  g.zero_inactive_offsets();
  return g;
}

struct DecodeResult {
  Eigen::VectorXd logits;
  Eigen::VectorXd offsets;
  TrussGraph graph;
};

inline DecodeResult decode(const ModelState& m, const Eigen::VectorXd& z) {
  if (z.size() != m.layout.d()) throw ShapeError("latent vector has the wrong length");
  if (!z.allFinite()) throw NumericError("latent vector is not finite");
  const Eigen::MatrixXd zr = z.transpose();
  DecodeResult r;
  r.logits = decode_logits(m, zr).row(0).transpose();
  r.offsets = decode_offsets(m, zr).row(0).transpose();
  r.graph = assemble(r.logits.transpose(), r.offsets.transpose());
  return r;
}

/// De-normalized predictor output for each row of mu.
inline Eigen::MatrixXd predict_properties(const ModelState& m, const Eigen::MatrixXd& mu) {
  return m.denormalize(forward(m.predictor, mu));
}

inline PropertyVector predict_properties(const ModelState& m, const Eigen::VectorXd& mu, PropertyKind expected) {
  if (expected != m.kind)
    throw ConfigError("model predicts " + std::string(to_string(m.kind)) + ", not " + std::string(to_string(expected)));
  const Eigen::VectorXd p = predict_properties(m, Eigen::MatrixXd(mu.transpose())).row(0).transpose();
  return {m.kind, std::vector<double>(p.data(), p.data() + p.size())};
}

// --------------------------------------------------------------------- loss

enum class ReconLoss : std::uint8_t { mse, bce };

inline std::string_view to_string(ReconLoss r) { return r == ReconLoss::mse ? "mse" : "bce"; }

inline ReconLoss parse_recon_loss(std::string_view s) {
  if (s == "mse") return ReconLoss::mse;
  if (s == "bce") return ReconLoss::bce;
  throw ConfigError("unknown reconstruction loss '" + std::string(s) + "'");
}

struct LossWeights {
  double recon_a = 10.0;
  double recon_x = 1000.0;
  double prop = 10.0;
  ReconLoss recon_a_kind = ReconLoss::mse;

  bool operator==(const LossWeights&) const = default;
};

template <typename T>
struct LossTerms {
  T total, recon_a, recon_x, prop, kld;
};

/// Training inputs; `props` holds normalized labels.
struct Batch {
  Eigen::MatrixXd a, x, props;

  Eigen::Index size() const { return a.rows(); }

  Batch rows(const std::vector<Eigen::Index>& idx) const {
    Batch b{Eigen::MatrixXd(idx.size(), a.cols()), Eigen::MatrixXd(idx.size(), x.cols()),
            Eigen::MatrixXd(idx.size(), props.cols())};
    for (std::size_t r = 0; r < idx.size(); ++r) {
      b.a.row(Eigen::Index(r)) = a.row(idx[r]);
      b.x.row(Eigen::Index(r)) = x.row(idx[r]);
      b.props.row(Eigen::Index(r)) = props.row(idx[r]);
    }
    return b;
  }
};

/// Closed-form KL divergence to N(0, I), one value per row.
inline Eigen::VectorXd kld_closed_form(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& log_sigma) {
  return 0.5 * ((2.0 * log_sigma).array().exp() + mu.array().square() - 1.0 - 2.0 * log_sigma.array()).rowwise().sum();
}

struct ModelVars {
  std::array<ad::Var, ModelState::kNumBlocks> block;
};

inline ModelVars register_params(ad::Tape& tape, const ModelState& m, bool trainable = true) {
  ModelVars v;
  const auto bs = m.blocks();
  for (int b = 0; b < ModelState::kNumBlocks; ++b)
    v.block[b] = trainable ? tape.variable(bs[b]->values) : tape.constant(bs[b]->values);
  return v;
}

/**
 * Recorded loss. Terms are per-sample squared norms summed over the rows and
 * divided by `normalizer` (the full batch size when the batch is split).
 */
inline LossTerms<ad::Var> loss_on_tape(const ModelState& m, const ModelVars& v, const Batch& b,
                                       const Eigen::MatrixXd& eps, double beta, const LossWeights& w,
                                       double normalizer = 0.0) {
  if (b.size() == 0) throw ShapeError("loss of an empty batch");
  if (normalizer <= 0.0) normalizer = double(b.size());
  const LatentLayout& l = m.layout;
  ad::Tape& t = *v.block[0].tape;
  const ad::Var a = t.constant(b.a), x = t.constant(b.x), s = t.constant(b.props);

  const ad::Var ha = forward(m.encoder_a.spec, v.block[0], a);
  const ad::Var hx = forward(m.encoder_x.spec, v.block[1], x);
  const ad::Var mu = detail::compose(l, ad::slice_cols(ha, 0, l.d_a), ad::slice_cols(hx, 0, l.d_x));
  const ad::Var ls = detail::compose(l, ad::slice_cols(ha, l.d_a, l.d_a), ad::slice_cols(hx, l.d_x, l.d_x));
  const ad::Var z = ad::add(mu, ad::mul(t.constant(eps), ad::exp(ls)));

  const ad::Var logits = forward(m.decoder_a.spec, v.block[2], ad::slice_cols(z, 0, l.d_a));
  const ad::Var xr = forward(m.decoder_x.spec, v.block[3], ad::slice_cols(z, l.geometry_begin(), l.d_x));
  const ad::Var pred = forward(m.predictor.spec, v.block[4], mu);

  const double inv = 1.0 / normalizer;
  ad::Var recon_a;
  if (w.recon_a_kind == ReconLoss::mse) {
    recon_a = ad::scale(ad::sum(ad::square(ad::sub(ad::sigmoid(logits), a))), inv);
  } else {
    // softplus(l) - a*l is the logistic cross-entropy in logit form
    recon_a = ad::scale(ad::sum(ad::sub(ad::softplus(logits), ad::mul(a, logits))), inv);
  }
  const ad::Var recon_x = ad::scale(ad::sum(ad::square(ad::sub(xr, x))), inv);
  const ad::Var prop = ad::scale(ad::sum(ad::square(ad::sub(pred, s))), inv);
  const ad::Var kld = ad::scale(
      ad::sum(ad::sub(ad::add(ad::exp(ad::scale(ls, 2.0)), ad::square(mu)), ad::add_scalar(ad::scale(ls, 2.0), 1.0))),
      0.5 * inv);

  ad::Var total = ad::add(ad::add(ad::scale(recon_a, w.recon_a), ad::scale(recon_x, w.recon_x)),
                          ad::add(ad::scale(prop, w.prop), ad::scale(kld, beta)));
  return {total, recon_a, recon_x, prop, kld};
}

inline LossTerms<double> loss(const ModelState& m, const Batch& b, const Eigen::MatrixXd& eps, double beta,
                              const LossWeights& w = {}) {
  ad::Tape t;
  const ModelVars v = register_params(t, m, false);
  const LossTerms<ad::Var> r = loss_on_tape(m, v, b, eps, beta, w);
  return {t.scalar(r.total), t.scalar(r.recon_a), t.scalar(r.recon_x), t.scalar(r.prop), t.scalar(r.kld)};
}

// ----------------------------------------------------------------- training

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  int beta_cycle = 100;
  int beta_onset = 50;
  double beta_slope = 0.04;
  std::uint64_t seed = 1;
  double train_fraction = 0.90;
  double val_fraction = 0.01;
  double test_fraction = 0.09;
  LossWeights weights;
  ArchConfig arch;

  void check() const {
    if (epochs < 0 || batch_size <= 0) throw ConfigError("epochs must be >= 0 and batch_size > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (beta_cycle <= 0 || beta_onset < 0 || beta_onset >= beta_cycle) throw ConfigError("beta onset must lie in [0, cycle)");
    if (!(beta_slope > 0.0)) throw ConfigError("beta slope must be positive");
    for (double f : {train_fraction, val_fraction, test_fraction})
      if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
    if (!(train_fraction > 0.0) || std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
      throw ConfigError("split fractions must be positive for training and sum to 1");
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0x6a09e667f3bcc908ULL;
    auto mix = [&h](double v) { h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v)); };
    for (double v : {double(epochs), double(batch_size), learning_rate, double(beta_cycle), double(beta_onset), beta_slope,
                     double(seed), train_fraction, val_fraction, test_fraction, weights.recon_a, weights.recon_x,
                     weights.prop, double(weights.recon_a_kind), double(arch.hidden)})
      mix(v);
    for (const auto* hv : {&arch.encoder_a_hidden, &arch.encoder_x_hidden, &arch.decoder_a_hidden,
                           &arch.decoder_x_hidden, &arch.predictor_hidden}) {
      mix(double(hv->size()));
      for (int w : *hv) mix(double(w));
    }
    return h;
  }
};

/// Cyclical linear annealing: 0 before the onset of each cycle, then a ramp capped at 1.
inline double beta_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw RangeError("epoch must be non-negative");
  const int local = epoch % cfg.beta_cycle;
  if (local < cfg.beta_onset) return 0.0;
  return std::min(1.0, cfg.beta_slope * double(local - cfg.beta_onset));
}

struct DataSplit {
  std::vector<std::size_t> train, val, test;
};

inline DataSplit split_indices(std::size_t n, const TrainConfig& cfg) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = substream(cfg.seed, "split", 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  const auto n_val = std::size_t(std::llround(double(n) * cfg.val_fraction));
  const auto n_test = std::size_t(std::llround(double(n) * cfg.test_fraction));
  if (n_val + n_test >= n && n > 0) throw ConfigError("split leaves no training data");
  DataSplit s;
  s.val.assign(idx.begin(), idx.begin() + std::ptrdiff_t(n_val));
  s.test.assign(idx.begin() + std::ptrdiff_t(n_val), idx.begin() + std::ptrdiff_t(n_val + n_test));
  s.train.assign(idx.begin() + std::ptrdiff_t(n_val + n_test), idx.end());
  return s;
}

/// Serialized graphs plus raw (unnormalized) property labels.
struct EncodedData {
  Eigen::MatrixXd a, x, props;
  PropertyKind kind = PropertyKind::stiffness9;

  Eigen::Index size() const { return a.rows(); }
};

inline EncodedData encode_records(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& which) {
  EncodedData d;
  if (!which.empty()) d.kind = records[which.front()].properties.kind;
  const int p = property_length(d.kind);
  std::vector<const TrussGraph*> gs;
  d.props.resize(Eigen::Index(which.size()), p);
  for (std::size_t r = 0; r < which.size(); ++r) {
    const DatasetRecord& rec = records[which[r]];
    if (rec.properties.kind != d.kind || !rec.properties.well_formed())
      throw ConfigError("record " + std::to_string(which[r]) + " lacks well-formed " + std::string(to_string(d.kind)) +
                        " labels");
    gs.push_back(&rec.graph);
    for (int c = 0; c < p; ++c) d.props(Eigen::Index(r), c) = rec.properties.values[c];
  }
  serialize_rows(gs, d.a, d.x);
  return d;
}

struct EpochMetrics {
  int epoch = 0;
  double beta = 0.0;
  LossTerms<double> train{};
  double val_accuracy = 0.0;  ///< adjacency accuracy on the validation split (NaN when empty)
  double val_prop_mse = 0.0;  ///< normalized-label MSE per component on the validation split
};

struct TrainResult {
  ModelState model;
  std::vector<EpochMetrics> history;
  DataSplit split;
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, ModelState last, int epoch)
      : NumericError(what), last_finite(std::move(last)), epoch(epoch) {}
  ModelState last_finite;
  int epoch;
};

/// Fraction of adjacency entries where (probability > 0.5) equals the truth.
inline double topology_accuracy(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& truth) {
  if (probs.rows() != truth.rows() || probs.cols() != truth.cols()) throw ShapeError("accuracy shape mismatch");
  if (truth.size() == 0) return std::nan("");
  const Eigen::Index correct = ((probs.array() > 0.5).cast<double>() == truth.array()).count();
  return double(correct) / double(truth.size());
}

namespace detail {

/// Adjacency accuracy of mean reconstructions.
inline double adjacency_accuracy(const ModelState& m, const Eigen::MatrixXd& a, const Eigen::MatrixXd& x) {
  if (a.rows() == 0) return std::nan("");
  return topology_accuracy(ad::sigmoid_values(decode_logits(m, encode(m, a, x).mu)), a);
}

inline constexpr Eigen::Index kSubBatch = 16;

}  // namespace detail

/**
 * Mini-batch Adam over the joint loss. Sub-batches of fixed size are
 * evaluated in parallel and their gradients reduced in order, so results do
 * not depend on `threads`.
 */
template <typename EpochCallback>
TrainResult train(const std::vector<DatasetRecord>& records, const TrainConfig& cfg, const LatentLayout& layout,
                  unsigned threads, EpochCallback&& on_epoch) {
  cfg.check();
  layout.check();
  if (records.empty()) throw ConfigError("cannot train on an empty dataset");
  TrainResult res;
  res.split = split_indices(records.size(), cfg);
  const EncodedData train_data = encode_records(records, res.split.train);
  const EncodedData val_data = encode_records(records, res.split.val);

  ModelState m = ModelState::create(layout, cfg.arch, train_data.kind, cfg.seed);
  m.train_config_hash = cfg.hash();
  const Eigen::Index n = train_data.size();
  m.label_mean = train_data.props.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train_data.props.rowwise() - m.label_mean.transpose();
  m.label_std = (centered.array().square().colwise().sum() / double(n)).sqrt().transpose();
  for (Eigen::Index c = 0; c < m.label_std.size(); ++c)
    if (!(m.label_std[c] > 0.0)) m.label_std[c] = 1.0;

  const Batch all{train_data.a, train_data.x, m.normalize(train_data.props)};
  const Eigen::MatrixXd val_norm = m.normalize(val_data.props);

  std::array<AdamState, ModelState::kNumBlocks> adam;
  for (int b = 0; b < ModelState::kNumBlocks; ++b) adam[b] = AdamState::zeros(m.blocks()[b]->values.size(), cfg.learning_rate);

  std::vector<Eigen::Index> order{};
  order.resize(std::size_t(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const int d = layout.d();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double beta = beta_schedule(epoch, cfg);
    Rng shuffle = substream(cfg.seed, "shuffle", std::uint64_t(epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(shuffle)]);

    EpochMetrics em;
    em.epoch = epoch;
    em.beta = beta;
    std::size_t batches = 0;
    const ModelState before_epoch = m;
    try {
      for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
        const Eigen::Index bn = std::min<Eigen::Index>(cfg.batch_size, n - start);
        Rng noise = substream(cfg.seed ^ std::uint64_t(epoch) << 32, "eps", std::uint64_t(start));
        Eigen::MatrixXd eps(bn, d);
        for (Eigen::Index r = 0; r < bn; ++r)
          for (int c = 0; c < d; ++c) eps(r, c) = standard_normal(noise);

        const Eigen::Index subs = (bn + detail::kSubBatch - 1) / detail::kSubBatch;
        std::vector<std::array<Eigen::VectorXd, ModelState::kNumBlocks>> grads{};
        grads.resize(std::size_t(subs));
        std::vector<LossTerms<double>> terms{};
        terms.resize(std::size_t(subs));
        parallel_for(std::size_t(subs), threads, [&](std::size_t s) {
          const Eigen::Index lo = Eigen::Index(s) * detail::kSubBatch;
          const Eigen::Index cnt = std::min(detail::kSubBatch, bn - lo);
          std::vector<Eigen::Index> idx{};
          idx.resize(std::size_t(cnt));
          for (Eigen::Index r = 0; r < cnt; ++r) idx[std::size_t(r)] = order[std::size_t(start + lo + r)];
          ad::Tape t;
          const ModelVars v = register_params(t, m);
          const LossTerms<ad::Var> lt =
              loss_on_tape(m, v, all.rows(idx), eps.middleRows(lo, cnt), beta, cfg.weights, double(bn));
          t.backward(lt.total);
          for (int b = 0; b < ModelState::kNumBlocks; ++b) grads[s][b] = t.grad(v.block[b]).col(0);
          terms[s] = {t.scalar(lt.total), t.scalar(lt.recon_a), t.scalar(lt.recon_x), t.scalar(lt.prop), t.scalar(lt.kld)};
        });
        for (int b = 0; b < ModelState::kNumBlocks; ++b) {
          Eigen::VectorXd g = grads[0][b];
          for (std::size_t s = 1; s < grads.size(); ++s) g += grads[s][b];
          adam_step(adam[b], m.blocks()[b]->values, g);
        }
        for (const auto& tm : terms) {
          em.train.total += tm.total;
          em.train.recon_a += tm.recon_a;
          em.train.recon_x += tm.recon_x;
          em.train.prop += tm.prop;
          em.train.kld += tm.kld;
        }
        ++batches;
        for (const ParamBlock* b : m.blocks())
          if (!b->values.allFinite()) throw NumericError("parameters became non-finite");
      }
    } catch (const NumericError& e) {
      throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(),
                             before_epoch, epoch);
    }
    if (batches > 0) {
      const double k = 1.0 / double(batches);
      em.train = {em.train.total * k, em.train.recon_a * k, em.train.recon_x * k, em.train.prop * k, em.train.kld * k};
    }
    em.val_accuracy = detail::adjacency_accuracy(m, val_data.a, val_data.x);
    if (val_data.size() > 0) {
      const Eigen::MatrixXd pred = forward(m.predictor, encode(m, val_data.a, val_data.x).mu);
      em.val_prop_mse = (pred - val_norm).squaredNorm() / double(val_norm.size());
    } else {
      em.val_prop_mse = std::nan("");
    }
    res.history.push_back(em);
    on_epoch(em);
  }
  res.model = std::move(m);
  return res;
}

inline TrainResult train(const std::vector<DatasetRecord>& records, const TrainConfig& cfg, const LatentLayout& layout,
                         unsigned threads = 0) {
  return train(records, cfg, layout, threads, [](const EpochMetrics&) {});
}

// --------------------------------------------------------------- evaluation

inline double r_squared(const Eigen::Ref<const Eigen::ArrayXd>& truth, const Eigen::Ref<const Eigen::ArrayXd>& pred) {
  if (truth.size() == 0) return std::nan("");
  const double ss_res = (truth - pred).square().sum();
  const double ss_tot = (truth - truth.mean()).square().sum();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

struct EvalMetrics {
  double topology_accuracy = 0.0;
  double r2_offsets = 0.0;      ///< pooled over the offsets of nodes active in the true graph
  double r2_offsets_all = 0.0;  ///< pooled over all 27 entries, inactive zeros included
  std::vector<double> r2_properties;
  double validity_score = 0.0;
  int validity_samples = 0;

  double r2_properties_min() const {
    double r = std::numeric_limits<double>::infinity();
    for (double v : r2_properties) r = std::min(r, v);
    return r2_properties.empty() ? std::nan("") : r;
  }
};

/// Fraction of prior draws z ~ N(0, I) whose decode survives repair.
inline double validity_score(const ModelState& m, int samples, std::uint64_t seed, unsigned threads = 0) {
  if (samples <= 0) return std::nan("");
  std::vector<char> ok(std::size_t(samples), char{0});
  parallel_for(std::size_t(samples), threads, [&](std::size_t i) {
    Rng rng = substream(seed, "prior", i);
    Eigen::VectorXd z(m.layout.d());
    for (Eigen::Index c = 0; c < z.size(); ++c) z[c] = standard_normal(rng);
    ok[i] = repair(decode(m, z).graph).has_value();
  });
  return double(std::count(ok.begin(), ok.end(), 1)) / double(samples);
}

inline EvalMetrics evaluate(const ModelState& m, const EncodedData& test, int validity_samples = 1000,
                            std::uint64_t seed = 1, unsigned threads = 0) {
  EvalMetrics r;
  if (test.size() > 0) {
    if (test.kind != m.kind) throw ConfigError("test labels do not match the model's property kind");
    const Encoding e = encode(m, test.a, test.x);
    r.topology_accuracy = topology_accuracy(ad::sigmoid_values(decode_logits(m, e.mu)), test.a);

    const Eigen::MatrixXd xo = decode_offsets(m, e.mu);
    std::vector<double> t_act, p_act;
    for (Eigen::Index i = 0; i < test.size(); ++i) {
      const TrussGraph g = deserialize(test.a.row(i).transpose(), test.x.row(i).transpose());
      for (const Slot& s : kSlots)
        if (g.active(s.index))
          for (int k = 0; k < s.num_free; ++k) {
            t_act.push_back(test.x(i, s.offset_begin + k));
            p_act.push_back(xo(i, s.offset_begin + k));
          }
    }
    r.r2_offsets = r_squared(Eigen::Map<const Eigen::ArrayXd>(t_act.data(), Eigen::Index(t_act.size())),
                             Eigen::Map<const Eigen::ArrayXd>(p_act.data(), Eigen::Index(p_act.size())));
    r.r2_offsets_all = r_squared(test.x.reshaped().array(), xo.reshaped().array());

    const Eigen::MatrixXd pred = predict_properties(m, e.mu);
    for (Eigen::Index c = 0; c < pred.cols(); ++c) r.r2_properties.push_back(r_squared(test.props.col(c).array(), pred.col(c).array()));
  } else {
    r.topology_accuracy = r.r2_offsets = r.r2_offsets_all = std::nan("");
  }
  r.validity_samples = validity_samples;
  r.validity_score = validity_score(m, validity_samples, seed, threads);
  return r;
}

}  // namespace trussvae
