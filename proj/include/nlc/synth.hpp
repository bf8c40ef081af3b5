#pragma once

// Deterministic toy data, toy models, and noisy dataset variants.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nlc/accum.hpp"
#include "nlc/error.hpp"
#include "nlc/image.hpp"
#include "nlc/mlp.hpp"
#include "nlc/random.hpp"

namespace nlc {

enum class Variant { base, times1, times10 };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::times1: return "x1";
    case Variant::times10: return "x10";
  }
  return "base";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "base") return Variant::base;
  if (s == "x1" || s == "times1") return Variant::times1;
  if (s == "x10" || s == "times10") return Variant::times10;
  fail(Errc::invalid_argument, "unknown dataset variant '" + std::string(s) + "'");
}

struct DatasetScheme {
  Variant variant = Variant::base;
  double bound = 0.1;        // noise is uniform in [-bound, bound]
  std::size_t sources = 100; // inputs picked for mutation

  std::size_t output_size(std::size_t base) const { return variant == Variant::times10 ? 10 * base : base; }
};

struct VariantSet {
  RowMatrix x;
  std::vector<std::size_t> origin;  // base row each output row came from
};

/// Base returns the inputs unchanged. The noisy variants pick `sources`
/// distinct rows, then emit output_size rows cycling through them with fresh
/// uniform noise per value, clamped to [0, 1].
inline VariantSet make_variant_set(const Eigen::Ref<const RowMatrix>& base, const DatasetScheme& scheme,
                                   std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(base.rows());
  VariantSet out;
  if (scheme.variant == Variant::base) {
    out.x = base;
    out.origin.resize(n);
    std::iota(out.origin.begin(), out.origin.end(), std::size_t{0});
    return out;
  }
  if (!(scheme.bound >= 0.0)) fail(Errc::invalid_argument, "noise bound must be >= 0");
  if (scheme.sources == 0) fail(Errc::invalid_argument, "need at least one source input");
  if (n < scheme.sources) {
    fail(Errc::invalid_argument, "base set has " + std::to_string(n) + " inputs, scheme needs " +
                                     std::to_string(scheme.sources) + " sources");
  }
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < scheme.sources; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  const std::size_t out_n = scheme.output_size(n);
  out.x.resize(static_cast<Eigen::Index>(out_n), base.cols());
  out.origin.resize(out_n);
  for (std::size_t r = 0; r < out_n; ++r) {
    out.origin[r] = idx[r % scheme.sources];
    const auto src = static_cast<Eigen::Index>(out.origin[r]);
    for (Eigen::Index c = 0; c < base.cols(); ++c) {
      const double noise = scheme.bound > 0.0 ? rng.uniform(-scheme.bound, scheme.bound) : 0.0;
      out.x(static_cast<Eigen::Index>(r), c) = std::clamp(base(src, c) + noise, 0.0, 1.0);
    }
  }
  return out;
}

inline RowMatrix make_variant(const Eigen::Ref<const RowMatrix>& base, const DatasetScheme& scheme, std::uint64_t seed) {
  return make_variant_set(base, scheme, seed).x;
}

struct LabeledData {
  RowMatrix x;  // one input per row
  std::vector<std::uint32_t> y;
  std::size_t classes = 0;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
};

/// Isotropic Gaussian blobs inside the unit cube. Class centers sit at
/// 0.5 + 0.25 u_k for random unit vectors u_k; sigma is the smallest center
/// distance divided by `separation`, so separation is in units of sigma.
/// Values are clamped to [0, 1]. Rows are grouped by class.
inline LabeledData make_gaussian_classifier_data(std::size_t classes, std::size_t per_class, std::size_t dim,
                                                 double separation, Rng& rng) {
  if (classes < 2) fail(Errc::invalid_argument, "need at least 2 classes");
  if (per_class == 0 || dim == 0) fail(Errc::invalid_argument, "per_class and dim must be >= 1");
  if (!(separation > 0.0)) fail(Errc::invalid_argument, "separation must be positive");
  const auto d = static_cast<Eigen::Index>(dim);
  std::vector<Eigen::VectorXd> centers;
  for (std::size_t k = 0; k < classes; ++k) {
    Eigen::VectorXd u(d);
    do {
      for (Eigen::Index i = 0; i < d; ++i) u[i] = rng.normal();
    } while (u.norm() < 1e-9);
    // Antipodal pair when there are only two classes.
    if (classes == 2 && k == 1) u = (Eigen::VectorXd::Constant(d, 0.5) - centers[0]);
    centers.push_back(Eigen::VectorXd::Constant(d, 0.5) + 0.25 * u / u.norm());
  }
  double min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = a + 1; b < classes; ++b) min_dist = std::min(min_dist, (centers[a] - centers[b]).norm());
  }
  if (!(min_dist > 0.0)) fail(Errc::invalid_argument, "class centers coincide; raise dim");
  const double sigma = min_dist / separation;

  LabeledData data;
  data.classes = classes;
  data.x.resize(static_cast<Eigen::Index>(classes * per_class), d);
  data.y.resize(classes * per_class);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto r = static_cast<Eigen::Index>(k * per_class + i);
      for (Eigen::Index c = 0; c < d; ++c) data.x(r, c) = std::clamp(centers[k][c] + sigma * rng.normal(), 0.0, 1.0);
      data.y[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(k);
    }
  }
  return data;
}

struct TrainConfig {
  std::vector<std::size_t> hidden{32};
  std::size_t epochs = 2000;
  double lr = 0.5;
  double target_accuracy = 0.95;
  std::uint64_t seed = 0;
};

inline double accuracy(const MlpModel& model, const LabeledData& data) {
  if (data.size() == 0) return 0.0;
  const auto out = model.forward_batch(data.x);
  const auto& logits = out.back();
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(r, c) > logits(r, best)) best = c;
    }
    if (static_cast<std::uint32_t>(best) == data.y[static_cast<std::size_t>(r)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// ReLU hidden layers plus a linear output layer, trained by full-batch
/// gradient descent on softmax cross-entropy. Stops once the training
/// accuracy reaches the target; fails if the epoch cap comes first.
inline MlpModel train_toy_mlp(const LabeledData& data, const TrainConfig& cfg,
                              std::array<std::size_t, 3> input_shape = {}) {
  if (data.size() == 0) fail(Errc::empty_input, "no training data");
  if (data.classes < 2) fail(Errc::invalid_argument, "need at least 2 classes");
  if (static_cast<std::size_t>(data.x.rows()) != data.size()) fail(Errc::shape_mismatch, "label count differs from input count");
  if (input_shape[0] != 0 && input_shape[0] * input_shape[1] * input_shape[2] != data.dim()) {
    fail(Errc::shape_mismatch, "input shape does not match the data dimension");
  }
  for (auto y : data.y) {
    if (y >= data.classes) fail(Errc::invalid_argument, "label out of range");
  }

  Rng rng(cfg.seed);
  std::vector<DenseLayer> layers;
  std::size_t prev = data.dim();
  auto add_layer = [&](std::string name, std::size_t out, Activation act) {
    DenseLayer l;
    l.name = std::move(name);
    l.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(prev));
    const double scale = std::sqrt(2.0 / static_cast<double>(prev));
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = scale * rng.normal();
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
    l.activation = act;
    layers.push_back(std::move(l));
    prev = out;
  };
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) add_layer("hidden_" + std::to_string(i), cfg.hidden[i], Activation::relu);
  add_layer("logits", data.classes, Activation::none);
  MlpModel model(data.dim(), std::move(layers), input_shape);

  const auto n = static_cast<Eigen::Index>(data.size());
  RowMatrix onehot = RowMatrix::Zero(n, static_cast<Eigen::Index>(data.classes));
  for (Eigen::Index r = 0; r < n; ++r) onehot(r, data.y[static_cast<std::size_t>(r)]) = 1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto acts = model.forward_batch(data.x);
    RowMatrix logits = acts.back();
    // Softmax, shifted for stability.
    for (Eigen::Index r = 0; r < n; ++r) {
      logits.row(r).array() -= logits.row(r).maxCoeff();
      logits.row(r) = logits.row(r).array().exp().matrix();
      logits.row(r) /= logits.row(r).sum();
    }
    std::size_t hits = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      Eigen::Index best = 0;
      acts.back().row(r).maxCoeff(&best);
      if (static_cast<std::uint32_t>(best) == data.y[static_cast<std::size_t>(r)]) ++hits;
    }
    if (static_cast<double>(hits) >= cfg.target_accuracy * static_cast<double>(n)) return model;

    RowMatrix delta = (logits - onehot) / static_cast<double>(n);
    auto& ls = model.mutable_layers();
    for (std::size_t l = ls.size(); l-- > 0;) {
      const RowMatrix& input = l == 0 ? static_cast<const RowMatrix&>(data.x) : acts[l - 1];
      RowMatrix grad_w = delta.transpose() * input;
      Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
      if (l > 0) {
        delta = (delta * ls[l].weights).cwiseProduct((acts[l - 1].array() > 0.0).cast<double>().matrix());
      }
      ls[l].weights -= cfg.lr * grad_w;
      ls[l].bias -= cfg.lr * grad_b;
    }
  }
  if (accuracy(model, data) >= cfg.target_accuracy) return model;
  fail(Errc::training, "training accuracy stayed below " + std::to_string(cfg.target_accuracy) +
                           " after " + std::to_string(cfg.epochs) + " epochs; raise separation or epochs");
}

// ---------------------------------------------------------------------------
// Two-class 8x8 grayscale toy with a planted blind spot.
//
// Class 0 images are brighter on the left half, class 1 on the right. A
// trained ReLU net separates them; an extra hidden unit then fires on mean
// intensity above `threshold` and pushes hard toward class 1. Training
// images have mean intensity near 0.45, so the unit is silent on them, but a
// brightness shift of about +0.1 on a class 0 image flips its prediction.

struct BlindSpotToy {
  MlpModel model;
  LabeledData train;  // 200 images
  LabeledData seeds;  // held-out images for fuzzing
  double threshold = 0.56;
};

inline constexpr std::size_t kToySide = 8;

inline LabeledData make_halves_data(std::size_t per_class, Rng& rng) {
  constexpr std::size_t dim = kToySide * kToySide;
  LabeledData d;
  d.classes = 2;
  d.x.resize(static_cast<Eigen::Index>(2 * per_class), dim);
  d.y.resize(2 * per_class);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const auto r = static_cast<Eigen::Index>(k * per_class + i);
      for (std::size_t y = 0; y < kToySide; ++y) {
        for (std::size_t x = 0; x < kToySide; ++x) {
          const bool left = x < kToySide / 2;
          const double mean = (left == (k == 0)) ? 0.55 : 0.35;
          d.x(r, static_cast<Eigen::Index>(y * kToySide + x)) = std::clamp(mean + 0.05 * rng.normal(), 0.0, 1.0);
        }
      }
      d.y[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(k);
    }
  }
  return d;
}

inline BlindSpotToy make_blind_spot_toy(std::uint64_t seed = 7) {
  Rng rng(seed);
  BlindSpotToy toy;
  toy.train = make_halves_data(100, rng);
  toy.seeds = make_halves_data(20, rng);
  TrainConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 5000;
  cfg.lr = 0.5;
  cfg.target_accuracy = 1.0;
  cfg.seed = seed;
  MlpModel trained = train_toy_mlp(toy.train, cfg, {kToySide, kToySide, 1});

  auto layers = trained.layers();
  auto& hidden = layers[0];
  auto& out = layers[1];
  constexpr double gain = 1000.0;
  constexpr double push = 10.0;
  const auto in = hidden.weights.cols();
  const auto h = hidden.weights.rows();
  hidden.weights.conservativeResize(h + 1, in);
  hidden.weights.row(h).setConstant(gain / static_cast<double>(in));
  hidden.bias.conservativeResize(h + 1);
  hidden.bias[h] = -gain * toy.threshold;
  out.weights.conservativeResize(out.weights.rows(), h + 1);
  out.weights(0, h) = -push;
  out.weights(1, h) = push;
  toy.model = MlpModel(trained.input_dim(), std::move(layers), trained.input_shape());
  return toy;
}

inline ImageTensor row_to_image(const Eigen::Ref<const RowMatrix>& x, Eigen::Index row, std::array<std::size_t, 3> shape) {
  ImageTensor img(shape[0], shape[1], shape[2]);
  if (static_cast<std::size_t>(x.cols()) != img.size()) fail(Errc::shape_mismatch, "row width differs from the image shape");
  for (Eigen::Index c = 0; c < x.cols(); ++c) img.data[static_cast<std::size_t>(c)] = static_cast<float>(x(row, c));
  return img;
}

}  // namespace nlc
