#pragma once

/**
 * @file checkpoint.hpp
 * @brief JSON model checkpoints. Doubles are written in shortest round-trip
 *        form, so a save/load cycle restores every parameter bit for bit.
 */

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "trussvae/genmodel.hpp"
#include "trussvae/io/text.hpp"

namespace trussvae::io {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

inline constexpr const char* kBlockNames[ModelState::kNumBlocks] = {"encoder_a", "encoder_x", "decoder_a", "decoder_x",
                                                                    "predictor"};

}  // namespace detail

inline nlohmann::json checkpoint_json(const ModelState& m) {
  m.check();
  nlohmann::json j;
  j["format"] = "trussvae-checkpoint";
  j["version"] = kCheckpointVersion;
  j["layout"] = {{"d_a", m.layout.d_a}, {"d_x", m.layout.d_x}, {"d_ax", m.layout.d_ax}};
  j["property_kind"] = std::string(to_string(m.kind));
  j["train_config_hash"] = hex64(m.train_config_hash);
  j["label_mean"] = detail::vector_json(m.label_mean);
  j["label_std"] = detail::vector_json(m.label_std);
  const auto bs = m.blocks();
  for (int b = 0; b < ModelState::kNumBlocks; ++b) {
    std::vector<std::string> acts;
    for (Activation a : bs[b]->spec.activations) acts.emplace_back(to_string(a));
    j["networks"][detail::kBlockNames[b]] = {
        {"widths", bs[b]->spec.widths}, {"activations", acts}, {"params", detail::vector_json(bs[b]->values)}};
  }
  return j;
}

inline ModelState checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "trussvae-checkpoint") throw FormatError("not a trussvae checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    ModelState m;
    m.layout = {j.at("layout").at("d_a").get<int>(), j.at("layout").at("d_x").get<int>(),
                j.at("layout").at("d_ax").get<int>()};
    m.kind = parse_property_kind(j.at("property_kind").get<std::string>());
    m.train_config_hash = parse_hex64(j.at("train_config_hash").get<std::string>());
    m.label_mean = detail::json_vector(j.at("label_mean"));
    m.label_std = detail::json_vector(j.at("label_std"));
    const auto bs = m.blocks();
    for (int b = 0; b < ModelState::kNumBlocks; ++b) {
      const nlohmann::json& n = j.at("networks").at(detail::kBlockNames[b]);
      bs[b]->spec.widths = n.at("widths").get<std::vector<int>>();
      bs[b]->spec.activations.clear();
      for (const auto& a : n.at("activations")) bs[b]->spec.activations.push_back(parse_activation(a.get<std::string>()));
      bs[b]->spec.check();
      bs[b]->values = detail::json_vector(n.at("params"));
    }
    m.check();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void write_checkpoint(const std::string& path, const ModelState& m) {
  auto f = open_out(path);
  f << checkpoint_json(m).dump(1) << '\n';
  if (!f) throw Error("write to '" + path + "' failed");
}

/// Loads a checkpoint, refusing a latent layout or property kind other than the expected one.
inline ModelState read_checkpoint(const std::string& path, const std::optional<LatentLayout>& expect_layout = {},
                                  const std::optional<PropertyKind>& expect_kind = {}) {
  auto f = open_in(path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
  ModelState m = checkpoint_from_json(j);
  if (expect_layout && !(*expect_layout == m.layout))
    throw ConfigError("checkpoint latent layout " + std::to_string(m.layout.d_a) + "/" + std::to_string(m.layout.d_x) +
                      "/" + std::to_string(m.layout.d_ax) + " does not match the configured " +
                      std::to_string(expect_layout->d_a) + "/" + std::to_string(expect_layout->d_x) + "/" +
                      std::to_string(expect_layout->d_ax));
  if (expect_kind && *expect_kind != m.kind)
    throw ConfigError("checkpoint predicts " + std::string(to_string(m.kind)) + ", but " +
                      std::string(to_string(*expect_kind)) + " was requested");
  return m;
}

}  // namespace trussvae::io
