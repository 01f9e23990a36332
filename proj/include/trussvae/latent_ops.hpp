#pragma once

/**
 * @file latent_ops.hpp
 * @brief Exploring the latent space: prior sampling, spherical interpolation,
 *        single-axis traversal and local neighborhoods.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "trussvae/genmodel.hpp"
#include "trussvae/parallel.hpp"
#include "trussvae/rng.hpp"

namespace trussvae {

struct LatentSample {
  Eigen::VectorXd z;
  DecodeResult decoded;
  std::optional<TrussGraph> repaired;  ///< nullopt when the decode cannot be repaired
  Eigen::VectorXd predicted;           ///< predictor output at z, de-normalized

  bool valid() const { return repaired.has_value(); }
};

inline LatentSample evaluate_latent(const ModelState& m, const Eigen::VectorXd& z) {
  LatentSample s;
  s.z = z;
  s.decoded = decode(m, z);
  s.repaired = repair(s.decoded.graph);
  s.predicted = predict_properties(m, Eigen::MatrixXd(z.transpose())).row(0).transpose();
  return s;
}

inline std::vector<LatentSample> evaluate_latents(const ModelState& m, const std::vector<Eigen::VectorXd>& zs,
                                                  unsigned threads = 0) {
  std::vector<LatentSample> out(zs.size());
  parallel_for(zs.size(), threads, [&](std::size_t i) { out[i] = evaluate_latent(m, zs[i]); });
  return out;
}

/// Fraction of valid samples; NaN for an empty set.
inline double validity_fraction(const std::vector<LatentSample>& samples) {
  if (samples.empty()) return std::nan("");
  std::size_t ok = 0;
  for (const LatentSample& s : samples) ok += s.valid();
  return double(ok) / double(samples.size());
}

inline Eigen::VectorXd standard_normal_vector(Rng& rng, int d) {
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = standard_normal(rng);
  return z;
}

/// n draws from N(0, I); draw i uses its own sub-stream.
inline std::vector<LatentSample> sample_prior(const ModelState& m, int n, std::uint64_t seed, unsigned threads = 0) {
  if (n < 0) throw RangeError("sample count must be non-negative");
  std::vector<Eigen::VectorXd> zs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = substream(seed, "prior", std::uint64_t(i));
    zs[std::size_t(i)] = standard_normal_vector(rng, m.layout.d());
  }
  return evaluate_latents(m, zs, threads);
}

/**
 * Spherical interpolation along the great arc. The angle comes from the
 * normalized vectors; below 1e-6 rad the linear blend is used instead.
 */
inline Eigen::VectorXd slerp(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2, double alpha) {
  if (z1.size() != z2.size()) throw ShapeError("slerp endpoints differ in length");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw RangeError("slerp alpha must lie in [0, 1]");
  const double n1 = z1.norm(), n2 = z2.norm();
  if (n1 == 0.0 || n2 == 0.0) throw DegenerateError("slerp of a zero vector");
  const double c = std::clamp(z1.dot(z2) / (n1 * n2), -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta < 1e-6) return (1.0 - alpha) * z1 + alpha * z2;
  const double s = std::sin(theta);
  if (s < 1e-12) throw DegenerateError("slerp endpoints are antiparallel; the arc is undefined");
  return (std::sin((1.0 - alpha) * theta) / s) * z1 + (std::sin(alpha * theta) / s) * z2;
}

/// `steps` evenly spaced slerp points including both endpoints.
inline std::vector<Eigen::VectorXd> slerp_path(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2, int steps) {
  if (steps < 2) throw RangeError("an interpolation path needs at least 2 steps");
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < steps; ++i) out.push_back(slerp(z1, z2, i == steps - 1 ? 1.0 : double(i) / double(steps - 1)));
  return out;
}

struct TraversalSpec {
  Eigen::VectorXd base;
  int axis = 0;
  double lo = -2.0;
  double hi = 2.0;
  int steps = 9;
};

struct Traversal {
  AxisPartition partition = AxisPartition::topology;
  std::vector<double> values;
  std::vector<LatentSample> points;
};

inline Traversal traverse(const ModelState& m, const TraversalSpec& spec, unsigned threads = 0) {
  if (spec.base.size() != m.layout.d()) throw ShapeError("traversal base has the wrong length");
  if (spec.steps < 2) throw RangeError("a traversal needs at least 2 steps");
  Traversal t;
  t.partition = partition(m.layout, spec.axis);
  std::vector<Eigen::VectorXd> zs;
  for (int i = 0; i < spec.steps; ++i) {
    const double v = spec.lo + (spec.hi - spec.lo) * double(i) / double(spec.steps - 1);
    Eigen::VectorXd z = spec.base;
    z[spec.axis] = v;
    t.values.push_back(v);
    zs.push_back(std::move(z));
  }
  t.points = evaluate_latents(m, zs, threads);
  return t;
}

/// n draws z0 + sigma * eps around a latent point.
inline std::vector<LatentSample> neighborhood(const ModelState& m, const Eigen::VectorXd& z0, double sigma, int n,
                                              std::uint64_t seed, unsigned threads = 0) {
  if (!(sigma > 0.0)) throw RangeError("neighborhood sigma must be positive");
  if (z0.size() != m.layout.d()) throw ShapeError("neighborhood center has the wrong length");
  if (n < 0) throw RangeError("sample count must be non-negative");
  std::vector<Eigen::VectorXd> zs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = substream(seed, "neighborhood", std::uint64_t(i));
    zs[std::size_t(i)] = z0 + sigma * standard_normal_vector(rng, m.layout.d());
  }
  return evaluate_latents(m, zs, threads);
}

}  // namespace trussvae
