#pragma once

// Built-in multilayer perceptron: enough of a model to produce neuron
// outputs and predictions without an external framework.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "nlc/accum.hpp"
#include "nlc/criteria.hpp"
#include "nlc/error.hpp"
#include "nlc/image.hpp"

namespace nlc {

enum class Activation { relu, tanh, sigmoid, none };

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::none: return "none";
  }
  return "none";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "none" || s == "linear" || s == "identity") return Activation::none;
  fail(Errc::invalid_argument, "unknown nonlinearity '" + std::string(s) + "'");
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::none: return x;
  }
  return x;
}

struct DenseLayer {
  std::string name;
  RowMatrix weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::none;

  std::size_t in() const { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Prediction plus every layer's post-nonlinearity outputs, in layer order.
struct RunResult {
  std::uint32_t label = 0;
  std::vector<std::vector<double>> activations;

  bool operator==(const RunResult&) const = default;
};

/// Index of the largest element; the lowest index wins ties.
inline std::uint32_t argmax(std::span<const double> v) {
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct ModelInfo {
  LayerList layers;
  std::array<std::size_t, 3> input_shape{};  // H, W, C
  std::size_t classes = 0;

  std::size_t input_dim() const { return input_shape[0] * input_shape[1] * input_shape[2]; }
  bool operator==(const ModelInfo&) const = default;
};

class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::size_t input_dim, std::vector<DenseLayer> layers, std::array<std::size_t, 3> input_shape = {})
      : input_dim_(input_dim), layers_(std::move(layers)), input_shape_(input_shape) {
    if (input_shape_[0] == 0) input_shape_ = {1, 1, input_dim_};
    validate();
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t classes() const { return layers_.empty() ? 0 : layers_.back().out(); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
  std::array<std::size_t, 3> input_shape() const noexcept { return input_shape_; }

  ModelInfo info() const {
    ModelInfo mi;
    for (const auto& l : layers_) mi.layers.push_back({l.name, l.out()});
    mi.input_shape = input_shape_;
    mi.classes = classes();
    return mi;
  }

  /// Affine-then-nonlinearity chain; activations are recorded after each
  /// nonlinearity, and the prediction is the argmax of the last layer.
  RunResult forward(std::span<const double> input) const {
    if (input.size() != input_dim_) {
      fail(Errc::shape_mismatch,
           "input has " + std::to_string(input.size()) + " values, model expects " + std::to_string(input_dim_));
    }
    RunResult r;
    Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
    for (const auto& layer : layers_) {
      Eigen::VectorXd z = layer.weights * h + layer.bias;
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(layer.activation, z[i]);
      r.activations.emplace_back(z.data(), z.data() + z.size());
      h = std::move(z);
    }
    r.label = argmax(r.activations.back());
    return r;
  }

  RunResult forward(const ImageTensor& image) const { return forward(image.flatten()); }

  /// Forward pass for n inputs at once (rows of `inputs`); returns per-layer
  /// n x m_l matrices ready for criterion updates.
  std::vector<RowMatrix> forward_batch(const Eigen::Ref<const RowMatrix>& inputs) const {
    if (static_cast<std::size_t>(inputs.cols()) != input_dim_) fail(Errc::shape_mismatch, "batch input width mismatch");
    std::vector<RowMatrix> out;
    RowMatrix h = inputs;
    for (const auto& layer : layers_) {
      RowMatrix z = (h * layer.weights.transpose()).rowwise() + layer.bias.transpose();
      z = z.unaryExpr([a = layer.activation](double x) { return activate(a, x); });
      out.push_back(z);
      h = std::move(z);
    }
    return out;
  }

 private:
  void validate() const {
    if (layers_.empty()) fail(Errc::invalid_argument, "model has no layers");
    if (input_dim_ == 0) fail(Errc::invalid_argument, "model input dimension is zero");
    if (input_shape_[0] * input_shape_[1] * input_shape_[2] != input_dim_) {
      fail(Errc::invalid_argument, "input shape does not multiply out to the input dimension");
    }
    std::size_t prev = input_dim_;
    std::string prev_name = "input";
    for (const auto& l : layers_) {
      if (l.in() != prev) {
        fail(Errc::invalid_argument, "dimension chain break: '" + prev_name + "' emits " + std::to_string(prev) +
                                         " values but '" + l.name + "' expects " + std::to_string(l.in()));
      }
      if (static_cast<std::size_t>(l.bias.size()) != l.out()) {
        fail(Errc::invalid_argument, "layer '" + l.name + "' bias length differs from its output width");
      }
      if (l.out() == 0) fail(Errc::invalid_argument, "layer '" + l.name + "' has zero outputs");
      prev = l.out();
      prev_name = l.name;
    }
    LayerList names;
    for (const auto& l : layers_) names.push_back({l.name, l.out()});
    validate_layers(names);
  }

  std::size_t input_dim_ = 0;
  std::vector<DenseLayer> layers_;
  std::array<std::size_t, 3> input_shape_{};
};

// Model JSON:
// {
//   "input_dim": 4, "input_shape": [1, 1, 4], "classes": 2,
//   "layers": [ {"name": "dense_0", "in": 4, "out": 2, "activation": "relu",
//                "weights": [row-major out*in reals], "bias": [out reals]} ]
// }

inline nlohmann::json mlp_to_json(const MlpModel& model) {
  nlohmann::json j;
  j["input_dim"] = model.input_dim();
  j["input_shape"] = model.input_shape();
  j["classes"] = model.classes();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : model.layers()) {
    std::vector<double> w(l.weights.data(), l.weights.data() + l.weights.size());
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"name", l.name},
                      {"in", l.in()},
                      {"out", l.out()},
                      {"activation", activation_name(l.activation)},
                      {"weights", w},
                      {"bias", b}});
  }
  return j;
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
  try {
    const auto input_dim = j.at("input_dim").get<std::size_t>();
    std::array<std::size_t, 3> shape{1, 1, input_dim};
    if (j.contains("input_shape")) shape = j.at("input_shape").get<std::array<std::size_t, 3>>();
    std::vector<DenseLayer> layers;
    std::size_t idx = 0;
    for (const auto& jl : j.at("layers")) {
      DenseLayer l;
      l.name = jl.value("name", "dense_" + std::to_string(idx));
      const auto in = jl.at("in").get<std::size_t>();
      const auto out = jl.at("out").get<std::size_t>();
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (w.size() != in * out) {
        fail(Errc::invalid_argument, "layer '" + l.name + "' weight array has " + std::to_string(w.size()) +
                                         " values, expected " + std::to_string(in * out));
      }
      l.weights = Eigen::Map<const RowMatrix>(w.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
      l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
      l.activation = parse_activation(jl.at("activation").get<std::string>());
      layers.push_back(std::move(l));
      ++idx;
    }
    MlpModel model(input_dim, std::move(layers), shape);
    if (j.contains("classes") && j.at("classes").get<std::size_t>() != model.classes()) {
      fail(Errc::invalid_argument, "final layer width differs from declared class count");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("malformed model JSON: ") + e.what());
  }
}

inline MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open model '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "model '" + path + "' is not valid JSON: " + e.what());
  }
  return mlp_from_json(j);
}

inline void save_mlp(const std::string& path, const MlpModel& model) {
  std::ofstream out(path);
  if (!out) fail(Errc::io, "cannot open '" + path + "' for writing");
  out << mlp_to_json(model).dump(1) << '\n';
  if (!out) fail(Errc::io, "failed writing '" + path + "'");
}

}  // namespace nlc
