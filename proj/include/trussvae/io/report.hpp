#pragma once

/**
 * @file report.hpp
 * @brief JSON reports for optimization runs and evaluation, and the CSV table
 *        written alongside latent-space families.
 */

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trussvae/genmodel.hpp"
#include "trussvae/inverse_design.hpp"
#include "trussvae/io/text.hpp"
#include "trussvae/latent_ops.hpp"

namespace trussvae::io {

inline nlohmann::json eigen_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// NaN and infinities become null.
inline nlohmann::json number_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json graph_json(const TrussGraph& g) {
  nlohmann::json beams = nlohmann::json::array();
  for (const auto& [i, j] : g.beams()) beams.push_back({i, j});
  return {{"hash", hex64(graph_hash(g))},
          {"beams", beams},
          {"offsets", std::vector<double>(g.offsets().begin(), g.offsets().end())}};
}

inline nlohmann::json optimization_report(const OptimRun& run, std::uint64_t cli_seed) {
  nlohmann::json j;
  j["seed"] = cli_seed;
  j["objective"] = std::string(to_string(run.objective));
  j["fe_verified"] = run.fe_verified;
  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedRun& r : run.runs) {
    nlohmann::json traj = nlohmann::json::array();
    for (const TrajectoryStep& s : r.steps)
      traj.push_back({{"z", eigen_json(s.z)},
                      {"objective", number_json(s.objective)},
                      {"graph_hash", hex64(s.graph_hash)},
                      {"rejected", s.rejected}});
    seeds.push_back({{"seed_index", r.seed_index},
                     {"best_predicted", number_json(r.best_predicted)},
                     {"best_graph", r.best_graph ? graph_json(*r.best_graph) : nlohmann::json()},
                     {"trajectory", traj}});
  }
  j["seeds"] = seeds;
  nlohmann::json cands = nlohmann::json::array();
  for (const VerifiedCandidate& c : run.candidates) {
    nlohmann::json fe_s;
    if (c.fe_stiffness) fe_s = std::vector<double>(c.fe_stiffness->s.begin(), c.fe_stiffness->s.end());
    cands.push_back({{"seed_index", c.seed_index},
                     {"from_seed", c.from_seed},
                     {"predicted_objective", number_json(c.predicted_objective)},
                     {"fe_objective", c.fe_objective ? number_json(*c.fe_objective) : nlohmann::json()},
                     {"discrepancy", c.fe_objective ? number_json(c.predicted_objective - *c.fe_objective)
                                                    : nlohmann::json()},
                     {"fe_stiffness", fe_s},
                     {"note", c.note},
                     {"graph", graph_json(c.graph)}});
  }
  j["candidates_fe_order"] = cands;
  j["candidates_predictor_order"] = run.predictor_order;
  return j;
}

inline nlohmann::json evaluation_report(const EvalMetrics& m, std::uint64_t cli_seed) {
  nlohmann::json r2p = nlohmann::json::array();
  for (double v : m.r2_properties) r2p.push_back(number_json(v));
  return {{"seed", cli_seed},
          {"topology_accuracy", number_json(m.topology_accuracy)},
          {"r2_offsets", number_json(m.r2_offsets)},
          {"r2_offsets_all_entries", number_json(m.r2_offsets_all)},
          {"r2_properties", r2p},
          {"r2_properties_min", number_json(m.r2_properties_min())},
          {"validity_score", number_json(m.validity_score)},
          {"validity_samples", m.validity_samples}};
}

/**
 * One row per latent sample: step, traversal value, validity, graph hash,
 * predicted properties and, when given, FE-verified stiffness.
 */
inline void write_family_csv(std::ostream& os, const std::vector<LatentSample>& samples,
                             const std::vector<double>& values,
                             const std::vector<std::optional<StiffnessRecord>>& fe = {}) {
  const Eigen::Index p = samples.empty() ? 0 : samples.front().predicted.size();
  os << "step,value,valid,graph_hash";
  for (Eigen::Index c = 0; c < p; ++c) os << ",pred" << c + 1;
  if (!fe.empty())
    for (int c = 0; c < 9; ++c) os << ",fe" << c + 1;
  os << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LatentSample& s = samples[i];
    os << i << ',' << (i < values.size() ? format_double(values[i]) : std::string()) << ',' << int(s.valid()) << ','
       << (s.valid() ? hex64(graph_hash(*s.repaired)) : std::string());
    for (Eigen::Index c = 0; c < p; ++c) os << ',' << format_double(s.predicted[c]);
    if (!fe.empty()) {
      for (int c = 0; c < 9; ++c)
        os << ',' << (i < fe.size() && fe[i] ? format_double(fe[i]->s[std::size_t(c)]) : std::string());
    }
    os << '\n';
  }
}

}  // namespace trussvae::io
