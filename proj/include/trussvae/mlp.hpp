#pragma once

/**
 * @file mlp.hpp
 * @brief Fully connected networks over flat parameter vectors.
 *
 * Layer l maps width[l] -> width[l+1]; its weights are stored column-major
 * as a width[l] x width[l+1] block followed by a bias of width[l+1].
 * Inputs are row vectors (one sample per row).
 */

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trussvae/autodiff.hpp"
#include "trussvae/errors.hpp"
#include "trussvae/rng.hpp"

namespace trussvae {

enum class Activation : std::uint8_t { identity, tanh, relu, sigmoid };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct MlpSpec {
  std::vector<int> widths;              ///< input, hidden..., output
  std::vector<Activation> activations;  ///< one per layer (widths.size() - 1)

  /// Hidden layers use `hidden`, the last layer `output`.
  static MlpSpec make(std::vector<int> widths, Activation hidden, Activation output = Activation::identity) {
    MlpSpec s;
    s.widths = std::move(widths);
    for (std::size_t l = 0; l + 1 < s.widths.size(); ++l)
      s.activations.push_back(l + 2 == s.widths.size() ? output : hidden);
    s.check();
    return s;
  }

  void check() const {
    if (widths.size() < 2) throw ConfigError("an MLP needs at least an input and an output width");
    if (activations.size() != widths.size() - 1) throw ConfigError("one activation per MLP layer required");
    for (int w : widths)
      if (w <= 0) throw ConfigError("MLP widths must be positive");
  }

  int layers() const { return int(widths.size()) - 1; }
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }

  Eigen::Index weight_offset(int l) const {
    Eigen::Index off = 0;
    for (int k = 0; k < l; ++k) off += Eigen::Index(widths[k] + 1) * widths[k + 1];
    return off;
  }
  Eigen::Index bias_offset(int l) const { return weight_offset(l) + Eigen::Index(widths[l]) * widths[l + 1]; }
  Eigen::Index num_params() const { return weight_offset(layers()); }

  bool operator==(const MlpSpec&) const = default;
};

/// Flat parameters of one network plus the spec that lays them out.
struct ParamBlock {
  MlpSpec spec;
  Eigen::VectorXd values;

  void check() const {
    if (values.size() != spec.num_params()) throw ShapeError("parameter count does not match the MLP spec");
    if (!values.allFinite()) throw NumericError("non-finite network parameters");
  }
};

/// Glorot-uniform weights, zero biases.
inline ParamBlock init_params(const MlpSpec& spec, Rng& rng) {
  spec.check();
  ParamBlock p{spec, Eigen::VectorXd::Zero(spec.num_params())};
  for (int l = 0; l < spec.layers(); ++l) {
    const double bound = std::sqrt(6.0 / double(spec.widths[l] + spec.widths[l + 1]));
    const Eigen::Index off = spec.weight_offset(l);
    for (Eigen::Index i = 0; i < Eigen::Index(spec.widths[l]) * spec.widths[l + 1]; ++i)
      p.values[off + i] = uniform(rng, -bound, bound);
  }
  return p;
}

namespace detail {

inline void apply_activation(Eigen::MatrixXd& x, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::tanh: x = x.array().tanh().matrix(); break;
    case Activation::relu: x = x.cwiseMax(0.0); break;
    case Activation::sigmoid: x = ad::sigmoid_values(x); break;
  }
}

inline ad::Var apply_activation(ad::Var x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return ad::tanh(x);
    case Activation::relu: return ad::relu(x);
    case Activation::sigmoid: return ad::sigmoid(x);
  }
  return x;
}

}  // namespace detail

/// Batched inference: one sample per row of `input`.
inline Eigen::MatrixXd forward(const ParamBlock& p, const Eigen::MatrixXd& input) {
  const MlpSpec& spec = p.spec;
  if (input.cols() != spec.input_width())
    throw ShapeError("MLP input width " + std::to_string(input.cols()) + ", expected " + std::to_string(spec.input_width()));
  Eigen::MatrixXd x = input;
  for (int l = 0; l < spec.layers(); ++l) {
    const Eigen::Map<const Eigen::MatrixXd> w(p.values.data() + spec.weight_offset(l), spec.widths[l], spec.widths[l + 1]);
    const Eigen::Map<const Eigen::RowVectorXd> b(p.values.data() + spec.bias_offset(l), spec.widths[l + 1]);
    Eigen::MatrixXd y = x * w;
    y.rowwise() += b;
    detail::apply_activation(y, spec.activations[l]);
    x = std::move(y);
  }
  return x;
}

inline Eigen::VectorXd forward(const ParamBlock& p, const Eigen::VectorXd& input) {
  return forward(p, Eigen::MatrixXd(input.transpose())).row(0).transpose();
}

/// Recorded forward pass; `flat` is a column-vector node holding the parameters.
inline ad::Var forward(const MlpSpec& spec, ad::Var flat, ad::Var input) {
  if (input.tape->value(input).cols() != spec.input_width()) throw ShapeError("MLP input width mismatch");
  ad::Var x = input;
  for (int l = 0; l < spec.layers(); ++l) {
    const ad::Var w = ad::view(flat, spec.weight_offset(l), spec.widths[l], spec.widths[l + 1]);
    const ad::Var b = ad::view(flat, spec.bias_offset(l), 1, spec.widths[l + 1]);
    x = detail::apply_activation(ad::add_row(ad::matmul(x, w), b), spec.activations[l]);
  }
  return x;
}

}  // namespace trussvae
