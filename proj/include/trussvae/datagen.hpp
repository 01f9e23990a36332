#pragma once

/**
 * @file datagen.hpp
 * @brief Dataset generation: elementary lattices, stochastic perturbation of
 *        nodes and connectivity, pairwise superposition and deduplication.
 *
 * Every random draw comes from a sub-stream keyed by (rng_seed, stage,
 * task index), and results are merged in task order, so the output does not
 * depend on the worker count.
 */

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "trussvae/parallel.hpp"
#include "trussvae/properties.hpp"
#include "trussvae/rng.hpp"
#include "trussvae/truss_graph.hpp"

namespace trussvae {

struct DatagenConfig {
  int n_perturb_iters = 10;
  int n_library = 2000;
  int n_dataset = 12000;
  double offset_dist_halfwidth = 0.5;
  double insert_prob = 0.3;
  double remove_prob = 0.2;
  double jitter_scale = 0.3;
  std::uint64_t rng_seed = 1;
  int max_attempts = 20;  ///< resamples of one perturbation iteration before it is skipped
  int budget_factor = 50;  ///< tasks allowed per requested structure

  void check() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(insert_prob) || !prob(remove_prob)) throw ConfigError("datagen probabilities must lie in [0, 1]");
    if (!(jitter_scale >= 0.0)) throw ConfigError("datagen jitter_scale must be non-negative");
    if (!(offset_dist_halfwidth > 0.0)) throw ConfigError("datagen offset_dist_halfwidth must be positive");
    if (n_perturb_iters < 0 || n_library <= 0 || n_dataset <= 0 || max_attempts <= 0 || budget_factor <= 0)
      throw ConfigError("datagen counts must be positive");
  }

  std::uint64_t hash() const {
    std::uint64_t h = splitmix64(std::uint64_t(n_perturb_iters));
    auto mix = [&h](double v) { h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v)); };
    mix(n_library);
    mix(n_dataset);
    mix(offset_dist_halfwidth);
    mix(insert_prob);
    mix(remove_prob);
    mix(jitter_scale);
    h = splitmix64(h ^ rng_seed);
    mix(max_attempts);
    mix(budget_factor);
    return h;
  }
};

struct Provenance {
  std::uint32_t seed_a = 0;  ///< library index of the first parent
  std::uint32_t seed_b = 0;
  std::uint64_t stream = 0;  ///< task index of the generating sub-stream
};

struct DatasetRecord {
  TrussGraph graph;
  PropertyVector properties;
  Provenance provenance;
};

namespace detail {

inline int vertex(int x, int y, int z) { return x + 2 * y + 4 * z; }

}  // namespace detail

/// Octet 1x, BCC 1x, SC 1x, BCC 2x2x2 and SC 2x2x2, all offsets zero.
inline std::vector<TrussGraph> elementary_seeds() {
  using detail::vertex;
  std::vector<TrussGraph> seeds(5);

  TrussGraph& octet = seeds[0];
  const int fx = vertex(1, 0, 0), fy = vertex(0, 1, 0), fz = vertex(0, 0, 1), corner = vertex(1, 1, 1);
  for (int f : {fx, fy, fz}) octet.add_beam(f, corner);
  octet.add_beam(fx, fy);
  octet.add_beam(fy, fz);
  octet.add_beam(fz, fx);

  seeds[1].add_beam(vertex(0, 0, 0), vertex(1, 1, 1));

  for (int v : {vertex(0, 1, 1), vertex(1, 0, 1), vertex(1, 1, 0)}) seeds[2].add_beam(v, vertex(1, 1, 1));

  for (int v = 0; v < 8; ++v) seeds[3].add_beam(26, v);

  for (int v = 0; v < 8; ++v)
    for (int bit = 0; bit < 3; ++bit) seeds[4].add_beam(v, v ^ (1 << bit));

  return seeds;
}

namespace detail {

inline double sample_offset(const DatagenConfig& cfg, Rng& rng) {
  return std::clamp(uniform(rng, -cfg.offset_dist_halfwidth, cfg.offset_dist_halfwidth), -kOffsetBound, kOffsetBound);
}

inline void insert_node(TrussGraph& g, const DatagenConfig& cfg, Rng& rng) {
  std::vector<int> inactive, active = g.active_nodes();
  for (int s = 0; s < kNumSlots; ++s)
    if (!g.active(s)) inactive.push_back(s);
  if (inactive.empty() || active.size() < 2) return;
  const int slot = inactive[uniform_int(rng, 0, int(inactive.size()) - 1)];
  for (int k = 0; k < kSlots[slot].num_free; ++k) g.set_offset(slot, k, sample_offset(cfg, rng));
  const int k = std::min<int>(uniform_int(rng, 2, 3), int(active.size()));
  const Vec3 p = node_position(g, slot);
  std::stable_sort(active.begin(), active.end(), [&](int a, int b) {
    return (node_position(g, a) - p).squaredNorm() < (node_position(g, b) - p).squaredNorm();
  });
  for (int n = 0; n < k; ++n) g.add_beam(slot, active[n]);
}

inline void remove_node(TrussGraph& g, Rng& rng) {
  std::vector<int> candidates;
  for (int s : g.active_nodes())
    if (kSlots[s].kind != SlotKind::vertex) candidates.push_back(s);
  if (candidates.empty()) return;
  const int slot = candidates[uniform_int(rng, 0, int(candidates.size()) - 1)];
  for (int v = 0; v < kNumSlots; ++v) g.remove_beam(slot, v);
  g.zero_inactive_offsets();
}

inline void jitter(TrussGraph& g, const DatagenConfig& cfg, Rng& rng) {
  for (const Slot& s : kSlots) {
    if (!g.active(s.index)) continue;
    for (int k = 0; k < s.num_free; ++k) {
      const double step = uniform(rng, -cfg.offset_dist_halfwidth, cfg.offset_dist_halfwidth) * cfg.jitter_scale;
      g.set_offset(s.index, k, std::clamp(g.offset(s.index, k) + step, -kOffsetBound, kOffsetBound));
    }
  }
}

}  // namespace detail

/**
 * Applies cfg.n_perturb_iters random insert / remove / jitter iterations.
 * An iteration whose result is invalid (or has unresolvable crossings) is
 * resampled up to cfg.max_attempts times, then skipped.
 */
inline TrussGraph perturb(const TrussGraph& g, const DatagenConfig& cfg, Rng& rng) {
  TrussGraph cur = g;
  for (int it = 0; it < cfg.n_perturb_iters; ++it) {
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      TrussGraph next = cur;
      if (uniform(rng, 0.0, 1.0) < cfg.insert_prob) detail::insert_node(next, cfg, rng);
      if (uniform(rng, 0.0, 1.0) < cfg.remove_prob) detail::remove_node(next, rng);
      detail::jitter(next, cfg, rng);
      next.zero_inactive_offsets();
      auto resolved = resolve_intersections(next);
      if (resolved && validate(*resolved).valid) {
        cur = *resolved;
        break;
      }
    }
  }
  return cur;
}

/**
 * Builds the structure set (no properties): a library of perturbed seeds,
 * then superpositions of random library pairs, deduplicated by graph_hash.
 */
inline std::vector<DatasetRecord> generate_dataset(const DatagenConfig& cfg, unsigned threads = 0) {
  cfg.check();
  const std::vector<TrussGraph> seeds = elementary_seeds();
  constexpr std::size_t kChunk = 512;

  std::vector<TrussGraph> library;
  std::unordered_set<std::uint64_t> seen;
  const std::size_t lib_budget = std::size_t(cfg.budget_factor) * std::size_t(cfg.n_library);
  for (std::size_t base = 0; library.size() < std::size_t(cfg.n_library); base += kChunk) {
    if (base >= lib_budget) throw GenerationExhausted("could not build a library of " + std::to_string(cfg.n_library) + " unique structures");
    std::vector<TrussGraph> chunk(kChunk);
    parallel_for(kChunk, threads, [&](std::size_t i) {
      Rng rng = substream(cfg.rng_seed, "library", base + i);
      chunk[i] = perturb(seeds[(base + i) % seeds.size()], cfg, rng);
    });
    for (const TrussGraph& g : chunk) {
      if (library.size() >= std::size_t(cfg.n_library)) break;
      if (seen.insert(graph_hash(g)).second) library.push_back(g);
    }
  }

  std::vector<DatasetRecord> out;
  seen.clear();
  const std::size_t pair_budget = std::size_t(cfg.budget_factor) * std::size_t(cfg.n_dataset);
  const int nlib = int(library.size());
  for (std::size_t base = 0; out.size() < std::size_t(cfg.n_dataset); base += kChunk) {
    if (base >= pair_budget) throw GenerationExhausted("could not reach " + std::to_string(cfg.n_dataset) + " unique superposed structures");
    std::vector<std::optional<DatasetRecord>> chunk(kChunk);
    parallel_for(kChunk, threads, [&](std::size_t i) {
      Rng rng = substream(cfg.rng_seed, "pair", base + i);
      const int a = uniform_int(rng, 0, nlib - 1), b = uniform_int(rng, 0, nlib - 1);
      auto sup = superpose(library[a], library[b]);
      if (!sup || !validate(*sup).valid) return;
      DatasetRecord rec;
      rec.graph = *sup;
      rec.provenance = {std::uint32_t(a), std::uint32_t(b), std::uint64_t(base + i)};
      chunk[i] = rec;
    });
    for (auto& rec : chunk) {
      if (out.size() >= std::size_t(cfg.n_dataset)) break;
      if (rec && seen.insert(graph_hash(rec->graph)).second) out.push_back(std::move(*rec));
    }
  }
  return out;
}

}  // namespace trussvae
