#pragma once

/**
 * @file inverse_design.hpp
 * @brief Gradient-based design in the latent space.
 *
 * Each optimizer step decodes z, repairs the graph, re-encodes it and feeds
 * the re-encoded mean to the property predictor. The binary adjacency step
 * is bridged by a straight-through estimator. Candidates are finally ranked
 * by FE homogenization, not by the predictor.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trussvae/adam.hpp"
#include "trussvae/autodiff.hpp"
#include "trussvae/genmodel.hpp"
#include "trussvae/homogenize.hpp"
#include "trussvae/parallel.hpp"

namespace trussvae {

enum class ObjectiveKind : std::uint8_t { max_E22, min_nu21, max_KvGv, match_curve, match_stiffness };

inline std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::max_E22: return "max_E22";
    case ObjectiveKind::min_nu21: return "min_nu21";
    case ObjectiveKind::max_KvGv: return "max_KvGv";
    case ObjectiveKind::match_curve: return "match_curve";
    case ObjectiveKind::match_stiffness: return "match_stiffness";
  }
  return "max_E22";
}

inline ObjectiveKind parse_objective_kind(std::string_view s) {
  for (ObjectiveKind k : {ObjectiveKind::max_E22, ObjectiveKind::min_nu21, ObjectiveKind::max_KvGv,
                          ObjectiveKind::match_curve, ObjectiveKind::match_stiffness})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown objective '" + std::string(s) + "'");
}

struct Objective {
  ObjectiveKind kind = ObjectiveKind::max_E22;
  std::optional<PropertyVector> target;  ///< required by the match kinds
  double barrier_tau = 1e-4;             ///< softness of the positive-definiteness barrier
  double barrier_weight = 1.0;

  bool is_match() const { return kind == ObjectiveKind::match_curve || kind == ObjectiveKind::match_stiffness; }

  PropertyKind property_kind() const {
    return kind == ObjectiveKind::match_curve ? PropertyKind::curve13 : PropertyKind::stiffness9;
  }

  void check() const {
    if (is_match()) {
      if (!target || target->kind != property_kind() || !target->well_formed())
        throw ConfigError(std::string(to_string(kind)) + " needs a well-formed " +
                          std::string(to_string(property_kind())) + " target");
      double mx = 0.0;
      for (double v : target->values) mx = std::max(mx, std::abs(v));
      if (mx == 0.0) throw ConfigError("match target must not be identically zero");
    }
    if (!(barrier_tau > 0.0) || !(barrier_weight >= 0.0)) throw ConfigError("barrier parameters must be positive");
  }
};

/// Value to minimize and its gradient with respect to the property vector.
struct ObjectiveEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  bool spd = true;  ///< false when the barrier is active because C is not positive definite
};

namespace detail {

inline constexpr int kNormalIndex[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
inline constexpr double kNonSpdPenalty = 1e3;

/// dN -> component gradient: off-diagonal components appear twice in N.
inline void add_block_gradient(const Eigen::Matrix3d& g, Eigen::VectorXd& out) {
  for (int c = 0; c < 6; ++c) {
    const int a = kNormalIndex[c][0], b = kNormalIndex[c][1];
    out[c] += a == b ? g(a, b) : g(a, b) + g(b, a);
  }
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/**
 * Objective on predicted (or FE) properties. Stiffness objectives invert the
 * 3x3 normal block; a softplus barrier on its eigenvalues and on the shear
 * moduli keeps the gradient informative when the prediction is not positive
 * definite.
 */
inline ObjectiveEval objective_value(const Eigen::VectorXd& p, const Objective& obj) {
  ObjectiveEval r;
  r.grad = Eigen::VectorXd::Zero(p.size());
  if (p.size() != property_length(obj.property_kind()))
    throw ConfigError("property vector does not match the objective's property kind");
  if (!p.allFinite()) throw NumericError("non-finite property vector");

  if (obj.is_match()) {
    const Eigen::Map<const Eigen::VectorXd> t(obj.target->values.data(), Eigen::Index(obj.target->values.size()));
    const double scale = t.cwiseAbs().maxCoeff();
    const Eigen::VectorXd diff = p - t;
    const double rmse = std::sqrt(diff.squaredNorm() / double(p.size()));
    r.value = rmse / scale;
    if (rmse > 0.0) r.grad = diff / (double(p.size()) * rmse * scale);
    return r;
  }

  StiffnessRecord rec;
  for (int i = 0; i < 9; ++i) rec.s[std::size_t(i)] = p[i];
  const Eigen::Matrix3d n = rec.normal_block();

  // barrier: tau * w * sum softplus(-lambda / tau) over normal-block eigenvalues and shear moduli
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(n);
  double barrier = 0.0;
  Eigen::Matrix3d db = Eigen::Matrix3d::Zero();
  const double tau = obj.barrier_tau, w = obj.barrier_weight;
  for (int i = 0; i < 3; ++i) {
    const double lam = eig.eigenvalues()[i];
    barrier += w * tau * detail::softplus(-lam / tau);
    const Eigen::Vector3d v = eig.eigenvectors().col(i);
    db += -w * detail::logistic(-lam / tau) * v * v.transpose();
  }
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(9);
  detail::add_block_gradient(db, gb);
  for (int i = 6; i < 9; ++i) {
    barrier += w * tau * detail::softplus(-p[i] / tau);
    gb[i] += -w * detail::logistic(-p[i] / tau);
  }

  r.spd = eig.eigenvalues().minCoeff() > 0.0 && p.tail<3>().minCoeff() > 0.0;
  if (!r.spd) {
    r.value = detail::kNonSpdPenalty + barrier;
    r.grad = gb;
    return r;
  }

  const Eigen::Matrix3d s = n.inverse();
  Eigen::Matrix3d df_ds = Eigen::Matrix3d::Zero();
  switch (obj.kind) {
    case ObjectiveKind::max_E22:
      r.value = -1.0 / s(1, 1);
      df_ds(1, 1) = 1.0 / (s(1, 1) * s(1, 1));
      break;
    case ObjectiveKind::min_nu21:
      r.value = -s(0, 1) / s(1, 1);
      df_ds(0, 1) = df_ds(1, 0) = -0.5 / s(1, 1);
      df_ds(1, 1) = s(0, 1) / (s(1, 1) * s(1, 1));
      break;
    case ObjectiveKind::max_KvGv: {
      const double kv = bulk_voigt(rec), gv = shear_voigt(rec);
      r.value = -kv / gv;
      // d(-K/G) = -(dK * G - K * dG) / G^2
      const double dk_diag = 1.0 / 9.0, dk_off = 2.0 / 9.0;
      const double dg_diag = 1.0 / 15.0, dg_off = -1.0 / 15.0, dg_shear = 3.0 / 15.0;
      for (int c : {0, 3, 5}) r.grad[c] = -(dk_diag * gv - kv * dg_diag) / (gv * gv);
      for (int c : {1, 2, 4}) r.grad[c] = -(dk_off * gv - kv * dg_off) / (gv * gv);
      for (int c : {6, 7, 8}) r.grad[c] = kv * dg_shear / (gv * gv);
      break;
    }
    default: break;
  }
  if (obj.kind != ObjectiveKind::max_KvGv) {
    // S = N^-1  =>  df/dN = -S^T (df/dS) S^T
    const Eigen::Matrix3d g = -s.transpose() * df_ds * s.transpose();
    detail::add_block_gradient(g, r.grad);
  }
  r.value += barrier;
  r.grad += gb;
  return r;
}

inline ObjectiveEval objective_value(const PropertyVector& p, const Objective& obj) {
  if (p.kind != obj.property_kind()) throw ConfigError("property kind does not match the objective");
  return objective_value(Eigen::Map<const Eigen::VectorXd>(p.values.data(), Eigen::Index(p.values.size())), obj);
}

// ------------------------------------------------------------ seed selection

struct SeedPoint {
  Eigen::VectorXd z;
  std::size_t record = 0;  ///< dataset index of the seed structure
  double objective = 0.0;  ///< objective of the record's labels
};

/**
 * The k records with the best label objective (ascending, ties by index),
 * encoded to their latent means. k is truncated to the dataset size.
 */
inline std::vector<SeedPoint> seed_selection(const std::vector<DatasetRecord>& records, const ModelState& m,
                                             const Objective& obj, std::size_t k = 100, bool* truncated = nullptr) {
  obj.check();
  if (truncated) *truncated = k > records.size();
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].properties.kind != obj.property_kind()) continue;
    const ObjectiveEval e = objective_value(records[i].properties, obj);
    if (e.spd || obj.is_match()) ranked.emplace_back(e.value, i);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  ranked.resize(std::min(k, ranked.size()));
  std::vector<SeedPoint> seeds;
  for (const auto& [v, i] : ranked) {
    const Encoding e = encode(m, records[i].graph);
    seeds.push_back({e.mu.row(0).transpose(), i, v});
  }
  return seeds;
}

// ------------------------------------------------------- projected objective

/// How the binary adjacency reaches the re-encoder.
enum class SteMode : std::uint8_t {
  identity,       ///< forward binary, backward identity into sigmoid probabilities
  none,           ///< forward binary, no gradient through the adjacency
  probabilities,  ///< sigmoid probabilities in both passes
};

inline std::string_view to_string(SteMode s) {
  switch (s) {
    case SteMode::identity: return "identity";
    case SteMode::none: return "none";
    case SteMode::probabilities: return "probabilities";
  }
  return "identity";
}

inline SteMode parse_ste_mode(std::string_view s) {
  if (s == "identity") return SteMode::identity;
  if (s == "none") return SteMode::none;
  if (s == "probabilities") return SteMode::probabilities;
  throw ConfigError("unknown straight-through mode '" + std::string(s) + "'");
}

struct Projection {
  bool rejected = false;
  TrussGraph graph;           ///< repaired decode (valid when not rejected)
  Eigen::VectorXd mu_proj;    ///< re-encoded mean
  Eigen::VectorXd predicted;  ///< de-normalized predictor output at mu_proj
  double objective = 0.0;
  Eigen::VectorXd grad_z;     ///< zero when rejected
  bool spd = true;
};

/**
 * decode -> repair -> re-encode -> predict, with the objective's gradient
 * pulled back to z. A decode that cannot be repaired is rejected with
 * objective `penalty` and zero gradient.
 */
inline Projection project_and_predict(const ModelState& m, const Eigen::VectorXd& z, const Objective& obj,
                                      SteMode ste = SteMode::identity, double penalty = 1e6) {
  const LatentLayout& l = m.layout;
  if (z.size() != l.d()) throw ShapeError("latent vector has the wrong length");
  Projection out;
  out.grad_z = Eigen::VectorXd::Zero(l.d());

  ad::Tape t;
  const ModelVars v = register_params(t, m, false);
  const ad::Var zv = t.variable(Eigen::MatrixXd(z.transpose()));
  const ad::Var logits = forward(m.decoder_a.spec, v.block[2], ad::slice_cols(zv, 0, l.d_a));
  const ad::Var xr = ad::clamp(forward(m.decoder_x.spec, v.block[3], ad::slice_cols(zv, l.geometry_begin(), l.d_x)),
                               -kOffsetBound, kOffsetBound);
  const Eigen::RowVectorXd logit_row = t.value(logits).row(0);
  const TrussGraph decoded = assemble(logit_row, t.value(xr).row(0));
  const std::optional<TrussGraph> repaired = repair(decoded);
  if (!repaired) {
    out.rejected = true;
    out.graph = decoded;
    out.objective = penalty;
    return out;
  }
  out.graph = *repaired;
  const SerializedGraph ser = serialize(*repaired);

  const ad::Var probs = ad::sigmoid(logits);
  ad::Var a_in;
  switch (ste) {
    case SteMode::identity: a_in = ad::straight_through(probs, Eigen::MatrixXd(ser.a.transpose())); break;
    case SteMode::none: a_in = t.constant(Eigen::MatrixXd(ser.a.transpose())); break;
    case SteMode::probabilities: a_in = probs; break;
  }
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(1, kNumOffsets);
  for (const Slot& s : kSlots)
    if (repaired->active(s.index))
      for (int k = 0; k < s.num_free; ++k) mask(0, s.offset_begin + k) = 1.0;
  const ad::Var x_in = ad::mul(xr, t.constant(mask));

  const ad::Var ha = forward(m.encoder_a.spec, v.block[0], a_in);
  const ad::Var hx = forward(m.encoder_x.spec, v.block[1], x_in);
  const ad::Var mu = detail::compose(l, ad::slice_cols(ha, 0, l.d_a), ad::slice_cols(hx, 0, l.d_x));
  const ad::Var pred_n = forward(m.predictor.spec, v.block[4], mu);
  const ad::Var pred = ad::add_row(ad::mul(pred_n, t.constant(Eigen::MatrixXd(m.label_std.transpose()))),
                                   t.constant(Eigen::MatrixXd(m.label_mean.transpose())));

  out.mu_proj = t.value(mu).row(0).transpose();
  out.predicted = t.value(pred).row(0).transpose();
  const ObjectiveEval e = objective_value(out.predicted, obj);
  out.objective = e.value;
  out.spd = e.spd;
  t.backward(pred, Eigen::MatrixXd(e.grad.transpose()));
  out.grad_z = t.grad(zv).row(0).transpose();
  return out;
}

// ---------------------------------------------------------------- optimize

struct OptimConfig {
  double learning_rate = 0.01;
  int max_steps = 500;
  int patience = 50;  ///< steps without predicted improvement before stopping
  SteMode ste = SteMode::identity;
  double reject_penalty = 1e6;
  double init_noise = 0.0;  ///< optional Gaussian jitter of the seeds
  std::uint64_t seed = 1;
  double rho = 0.15;
  MaterialParams material;

  void check() const {
    if (!(learning_rate > 0.0) || max_steps < 0 || patience <= 0) throw ConfigError("invalid optimizer settings");
    if (!(init_noise >= 0.0)) throw ConfigError("init_noise must be non-negative");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("relative density must lie in (0, 1)");
    material.check();
  }
};

struct TrajectoryStep {
  Eigen::VectorXd z;
  double objective = 0.0;  ///< predicted, after projection
  std::uint64_t graph_hash = 0;
  bool rejected = false;
};

struct SeedRun {
  std::size_t seed_index = 0;
  std::vector<TrajectoryStep> steps;
  std::optional<TrussGraph> best_graph;  ///< best-by-predicted valid decode
  Eigen::VectorXd best_z;
  double best_predicted = std::numeric_limits<double>::infinity();
};

struct VerifiedCandidate {
  TrussGraph graph;
  std::size_t seed_index = 0;
  bool from_seed = false;  ///< the seed's dataset structure rather than an optimized decode
  double predicted_objective = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> fe_objective;         ///< nullopt when FE verification is unavailable or failed
  std::optional<StiffnessRecord> fe_stiffness;
  std::string note;
};

struct OptimRun {
  ObjectiveKind objective = ObjectiveKind::max_E22;
  std::uint64_t seed = 0;
  std::vector<SeedRun> runs;
  std::vector<VerifiedCandidate> candidates;  ///< sorted by FE objective (dropped ones last)
  std::vector<std::size_t> predictor_order;   ///< candidate indices sorted by predicted objective
  bool fe_verified = true;                    ///< false for objectives without FE labels (curve13)

  const VerifiedCandidate& best() const {
    if (candidates.empty()) throw OptimizationFailed("no candidates");
    return candidates.front();
  }
};

/// Adam on one latent vector; a rejected decode reverts to the previous iterate and halves the step size.
inline SeedRun optimize_seed(const ModelState& m, const Objective& obj, const Eigen::VectorXd& z0, const OptimConfig& cfg) {
  SeedRun run;
  Eigen::VectorXd z = z0, prev = z0;
  AdamState adam = AdamState::zeros(z.size(), cfg.learning_rate);
  int stale = 0;
  bool have_prev = false;
  for (int step = 0; step < cfg.max_steps; ++step) {
    const Projection p = project_and_predict(m, z, obj, cfg.ste, cfg.reject_penalty);
    run.steps.push_back({z, p.objective, graph_hash(p.graph), p.rejected});
    if (p.rejected) {
      if (!have_prev) break;  // nothing to fall back to
      z = prev;
      adam.lr *= 0.5;
      if (++stale >= cfg.patience) break;
      continue;
    }
    if (p.objective < run.best_predicted) {
      run.best_predicted = p.objective;
      run.best_graph = p.graph;
      run.best_z = z;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
    prev = z;
    have_prev = true;
    if (p.grad_z.squaredNorm() == 0.0) {
      if (++stale >= cfg.patience) break;
      continue;
    }
    adam_step(adam, z, p.grad_z);
  }
  return run;
}

/// FE objective for stiffness objectives; sorts candidates by it, failures last.
inline void verify(std::vector<VerifiedCandidate>& candidates, const Objective& obj, const MaterialParams& mat,
                   double rho, unsigned threads = 0) {
  if (obj.property_kind() != PropertyKind::stiffness9) {
    for (VerifiedCandidate& c : candidates) c.note = "FE verification skipped: curve labels require an external solver";
    return;
  }
  parallel_for(candidates.size(), threads, [&](std::size_t i) {
    VerifiedCandidate& c = candidates[i];
    try {
      const StiffnessRecord s = homogenize_graph(c.graph, rho, mat);
      c.fe_stiffness = s;
      Eigen::VectorXd p(9);
      for (int k = 0; k < 9; ++k) p[k] = s.s[std::size_t(k)];
      c.fe_objective = objective_value(p, obj).value;
    } catch (const Error& e) {
      c.note = std::string("dropped: ") + e.what();
    }
  });
  std::stable_sort(candidates.begin(), candidates.end(), [](const VerifiedCandidate& a, const VerifiedCandidate& b) {
    if (a.fe_objective.has_value() != b.fe_objective.has_value()) return a.fe_objective.has_value();
    return a.fe_objective.has_value() && *a.fe_objective < *b.fe_objective;
  });
}

/**
 * Optimizes every seed independently (in parallel), then ranks the seed
 * structures together with each seed's best decode by FE objective. Because
 * the seeds are candidates, the winner is never worse than the best seed.
 */
inline OptimRun optimize(const ModelState& m, const Objective& obj, const std::vector<SeedPoint>& seeds,
                         const std::vector<DatasetRecord>& records, const OptimConfig& cfg, unsigned threads = 0) {
  obj.check();
  cfg.check();
  if (seeds.empty()) throw OptimizationFailed("no seeds to optimize from");
  if (obj.property_kind() != m.kind) throw ConfigError("objective does not match the model's property kind");
  OptimRun out;
  out.objective = obj.kind;
  out.seed = cfg.seed;
  out.runs.resize(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    Eigen::VectorXd z0 = seeds[i].z;
    if (cfg.init_noise > 0.0) {
      Rng rng = substream(cfg.seed, "init-noise", i);
      for (Eigen::Index c = 0; c < z0.size(); ++c) z0[c] += cfg.init_noise * standard_normal(rng);
    }
    out.runs[i] = optimize_seed(m, obj, z0, cfg);
    out.runs[i].seed_index = i;
  });

  bool any = false;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SeedRun& r = out.runs[i];
    if (r.best_graph) {
      any = true;
      VerifiedCandidate c;
      c.graph = *r.best_graph;
      c.seed_index = i;
      c.predicted_objective = r.best_predicted;
      out.candidates.push_back(std::move(c));
    }
    if (seeds[i].record < records.size()) {
      VerifiedCandidate c;
      c.graph = records[seeds[i].record].graph;
      c.seed_index = i;
      c.from_seed = true;
      c.predicted_objective = project_and_predict(m, seeds[i].z, obj, SteMode::none, cfg.reject_penalty).objective;
      out.candidates.push_back(std::move(c));
    }
  }
  if (!any) throw OptimizationFailed("every seed was rejected throughout the optimization");

  out.fe_verified = obj.property_kind() == PropertyKind::stiffness9;
  verify(out.candidates, obj, cfg.material, cfg.rho, threads);
  if (!out.fe_verified)
    std::stable_sort(out.candidates.begin(), out.candidates.end(),
                     [](const VerifiedCandidate& a, const VerifiedCandidate& b) {
                       return a.predicted_objective < b.predicted_objective;
                     });
  out.predictor_order.resize(out.candidates.size());
  std::iota(out.predictor_order.begin(), out.predictor_order.end(), std::size_t{0});
  std::stable_sort(out.predictor_order.begin(), out.predictor_order.end(), [&](std::size_t a, std::size_t b) {
    return out.candidates[a].predicted_objective < out.candidates[b].predicted_objective;
  });
  return out;
}

}  // namespace trussvae
