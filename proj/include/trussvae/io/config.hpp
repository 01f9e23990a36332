#pragma once

/**
 * @file config.hpp
 * @brief Run configuration as a flat JSON object with dotted keys, e.g.
 *
 *   { "datagen.n_dataset": 12000, "train.epochs": 200, "optimize.objective": "max_E22" }
 *
 * Unknown keys and wrongly typed values are rejected. dump_config() writes
 * every key with its current value.
 */

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trussvae/datagen.hpp"
#include "trussvae/genmodel.hpp"
#include "trussvae/inverse_design.hpp"
#include "trussvae/io/text.hpp"

namespace trussvae::io {

struct RunConfig {
  DatagenConfig datagen;
  MaterialParams material;
  double rho = 0.15;
  LatentLayout layout;
  TrainConfig train;
  OptimConfig optimize;
  ObjectiveKind objective = ObjectiveKind::max_E22;
  std::vector<double> target;  ///< for the match objectives
  int num_seeds = 100;
  double barrier_tau = 1e-4;
  double barrier_weight = 1.0;
  int validity_samples = 1000;
  int surface_theta = 37;
  int surface_phi = 73;

  Objective make_objective() const {
    Objective o;
    o.kind = objective;
    o.barrier_tau = barrier_tau;
    o.barrier_weight = barrier_weight;
    if (o.is_match()) o.target = PropertyVector{o.property_kind(), target};
    return o;
  }

  void check() const {
    datagen.check();
    material.check();
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("homogenize.rho must lie in (0, 1)");
    layout.check();
    train.check();
    optimize.check();
    if (num_seeds <= 0 || validity_samples < 0) throw ConfigError("counts must be positive");
    if (surface_theta < 2 || surface_phi < 2) throw ConfigError("surface grid needs at least 2x2 points");
    make_objective().check();
  }
};

namespace detail {

struct Field {
  std::string key;
  std::function<nlohmann::json(const RunConfig&)> get;
  std::function<void(RunConfig&, const nlohmann::json&)> set;
};

template <typename T, typename Member>
Field field(std::string key, Member member) {
  return {std::move(key), [member](const RunConfig& c) { return nlohmann::json(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const nlohmann::json& j) { member(c) = j.get<T>(); }};
}

template <typename E, typename Member, typename ToS, typename Parse>
Field enum_field(std::string key, Member member, ToS to_s, Parse parse) {
  return {std::move(key),
          [member, to_s](const RunConfig& c) { return nlohmann::json(std::string(to_s(member(const_cast<RunConfig&>(c))))); },
          [member, parse](RunConfig& c, const nlohmann::json& j) { member(c) = parse(j.get<std::string>()); }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
#define TV_FIELD(T, key, expr) v.push_back(field<T>(key, [](RunConfig& c) -> T& { return expr; }))
    TV_FIELD(int, "datagen.n_perturb_iters", c.datagen.n_perturb_iters);
    TV_FIELD(int, "datagen.n_library", c.datagen.n_library);
    TV_FIELD(int, "datagen.n_dataset", c.datagen.n_dataset);
    TV_FIELD(double, "datagen.offset_dist_halfwidth", c.datagen.offset_dist_halfwidth);
    TV_FIELD(double, "datagen.insert_prob", c.datagen.insert_prob);
    TV_FIELD(double, "datagen.remove_prob", c.datagen.remove_prob);
    TV_FIELD(double, "datagen.jitter_scale", c.datagen.jitter_scale);
    TV_FIELD(std::uint64_t, "datagen.rng_seed", c.datagen.rng_seed);
    TV_FIELD(int, "datagen.max_attempts", c.datagen.max_attempts);
    TV_FIELD(int, "datagen.budget_factor", c.datagen.budget_factor);
    TV_FIELD(double, "material.youngs", c.material.youngs);
    TV_FIELD(double, "material.poisson", c.material.poisson);
    TV_FIELD(double, "homogenize.rho", c.rho);
    TV_FIELD(int, "homogenize.surface_theta", c.surface_theta);
    TV_FIELD(int, "homogenize.surface_phi", c.surface_phi);
    TV_FIELD(int, "latent.d_a", c.layout.d_a);
    TV_FIELD(int, "latent.d_x", c.layout.d_x);
    TV_FIELD(int, "latent.d_ax", c.layout.d_ax);
    TV_FIELD(int, "train.epochs", c.train.epochs);
    TV_FIELD(int, "train.batch_size", c.train.batch_size);
    TV_FIELD(double, "train.learning_rate", c.train.learning_rate);
    TV_FIELD(int, "train.beta_cycle", c.train.beta_cycle);
    TV_FIELD(int, "train.beta_onset", c.train.beta_onset);
    TV_FIELD(double, "train.beta_slope", c.train.beta_slope);
    TV_FIELD(std::uint64_t, "train.seed", c.train.seed);
    TV_FIELD(double, "train.train_fraction", c.train.train_fraction);
    TV_FIELD(double, "train.val_fraction", c.train.val_fraction);
    TV_FIELD(double, "train.test_fraction", c.train.test_fraction);
    TV_FIELD(double, "train.weight_recon_a", c.train.weights.recon_a);
    TV_FIELD(double, "train.weight_recon_x", c.train.weights.recon_x);
    TV_FIELD(double, "train.weight_prop", c.train.weights.prop);
    TV_FIELD(std::vector<int>, "train.encoder_a_hidden", c.train.arch.encoder_a_hidden);
    TV_FIELD(std::vector<int>, "train.encoder_x_hidden", c.train.arch.encoder_x_hidden);
    TV_FIELD(std::vector<int>, "train.decoder_a_hidden", c.train.arch.decoder_a_hidden);
    TV_FIELD(std::vector<int>, "train.decoder_x_hidden", c.train.arch.decoder_x_hidden);
    TV_FIELD(std::vector<int>, "train.predictor_hidden", c.train.arch.predictor_hidden);
    TV_FIELD(int, "evaluate.validity_samples", c.validity_samples);
    TV_FIELD(int, "optimize.num_seeds", c.num_seeds);
    TV_FIELD(double, "optimize.learning_rate", c.optimize.learning_rate);
    TV_FIELD(int, "optimize.max_steps", c.optimize.max_steps);
    TV_FIELD(int, "optimize.patience", c.optimize.patience);
    TV_FIELD(double, "optimize.reject_penalty", c.optimize.reject_penalty);
    TV_FIELD(double, "optimize.init_noise", c.optimize.init_noise);
    TV_FIELD(std::uint64_t, "optimize.seed", c.optimize.seed);
    TV_FIELD(double, "optimize.barrier_tau", c.barrier_tau);
    TV_FIELD(double, "optimize.barrier_weight", c.barrier_weight);
    TV_FIELD(std::vector<double>, "optimize.target", c.target);
#undef TV_FIELD
    v.push_back(enum_field<ReconLoss>(
        "train.recon_a_loss", [](RunConfig& c) -> ReconLoss& { return c.train.weights.recon_a_kind; },
        [](ReconLoss r) { return to_string(r); }, [](const std::string& s) { return parse_recon_loss(s); }));
    v.push_back(enum_field<Activation>(
        "train.hidden_activation", [](RunConfig& c) -> Activation& { return c.train.arch.hidden; },
        [](Activation a) { return to_string(a); }, [](const std::string& s) { return parse_activation(s); }));
    v.push_back(enum_field<ObjectiveKind>(
        "optimize.objective", [](RunConfig& c) -> ObjectiveKind& { return c.objective; },
        [](ObjectiveKind k) { return to_string(k); }, [](const std::string& s) { return parse_objective_kind(s); }));
    v.push_back(enum_field<SteMode>(
        "optimize.ste", [](RunConfig& c) -> SteMode& { return c.optimize.ste; }, [](SteMode s) { return to_string(s); },
        [](const std::string& s) { return parse_ste_mode(s); }));
    return v;
  }();
  return f;
}

}  // namespace detail

/// Applies the keys present in `j`; everything else keeps its current value.
inline void apply_config(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto& fs = detail::fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const detail::Field& f) { return f.key == key; });
    if (it == fs.end()) throw ConfigError("unknown configuration key '" + key + "'");
    try {
      it->set(c, value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("configuration key '" + key + "' has the wrong type");
    }
  }
}

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const detail::Field& f : detail::fields()) j[f.key] = f.get(c);
  return j;
}

inline RunConfig load_config(const std::string& path) {
  auto f = open_in(path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  RunConfig c;
  apply_config(c, j);
  c.check();
  return c;
}

inline std::string dump_config(const RunConfig& c) { return config_json(c).dump(2); }

}  // namespace trussvae::io
