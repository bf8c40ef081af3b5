#pragma once

// Image mutation operators (pixel-level, affine, texture-level) and the
// validity predicate that gates fuzzing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nlc/error.hpp"
#include "nlc/image.hpp"
#include "nlc/random.hpp"

namespace nlc {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double sample(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
  bool operator==(const Range&) const = default;
};

struct Contrast {
  Range factor{0.7, 1.3};
};
struct Brightness {
  Range delta{-0.15, 0.15};
};
struct Translate {
  double max_fraction = 0.1;  // of each dimension
};
struct Scale {
  Range factor{0.8, 1.2};
};
struct Rotate {
  double max_degrees = 15.0;
};
struct Blur {
  Range sigma{0.5, 2.0};
};

using MutationOp = std::variant<Contrast, Brightness, Translate, Scale, Rotate, Blur>;

inline std::string_view op_name(const MutationOp& op) {
  static constexpr std::string_view names[] = {"contrast", "brightness", "translate", "scale", "rotate", "blur"};
  return names[op.index()];
}

inline std::vector<MutationOp> default_ops() { return {Contrast{}, Brightness{}, Translate{}, Scale{}, Rotate{}, Blur{}}; }

inline MutationOp op_from_name(std::string_view name) {
  if (name == "contrast") return Contrast{};
  if (name == "brightness") return Brightness{};
  if (name == "translate") return Translate{};
  if (name == "scale") return Scale{};
  if (name == "rotate") return Rotate{};
  if (name == "blur") return Blur{};
  fail(Errc::invalid_argument, "unknown mutation operator '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Deterministic transforms with explicit parameters.

/// Scales each channel around its own mean.
inline ImageTensor adjust_contrast(const ImageTensor& in, double factor) {
  ImageTensor out = in;
  for (std::size_t c = 0; c < in.channels; ++c) {
    double mean = 0.0;
    for (std::size_t p = 0; p < in.pixels(); ++p) mean += in.data[p * in.channels + c];
    mean /= static_cast<double>(std::max<std::size_t>(in.pixels(), 1));
    for (std::size_t p = 0; p < in.pixels(); ++p) {
      auto& v = out.data[p * in.channels + c];
      v = static_cast<float>(mean + factor * (v - mean));
    }
  }
  out.clamp();
  return out;
}

inline ImageTensor adjust_brightness(const ImageTensor& in, double delta) {
  ImageTensor out = in;
  if (delta == 0.0) return out;
  for (auto& v : out.data) v = static_cast<float>(v + delta);
  out.clamp();
  return out;
}

/// Integer shift; vacated pixels are zero.
inline ImageTensor translate(const ImageTensor& in, long dx, long dy) {
  ImageTensor out(in.height, in.width, in.channels, 0.0f);
  const auto h = static_cast<long>(in.height);
  const auto w = static_cast<long>(in.width);
  for (long y = 0; y < h; ++y) {
    const long sy = y - dy;
    if (sy < 0 || sy >= h) continue;
    for (long x = 0; x < w; ++x) {
      const long sx = x - dx;
      if (sx < 0 || sx >= w) continue;
      for (std::size_t c = 0; c < in.channels; ++c) {
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
            in.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
      }
    }
  }
  return out;
}

/// Resamples through a 2x2 linear map about the image center. `inv` maps
/// output offsets to source offsets. Samples outside the frame read zero.
inline ImageTensor warp_about_center(const ImageTensor& in, double a, double b, double c, double d) {
  ImageTensor out(in.height, in.width, in.channels, 0.0f);
  const double cy = (static_cast<double>(in.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(in.width) - 1.0) / 2.0;
  const auto h = static_cast<long>(in.height);
  const auto w = static_cast<long>(in.width);
  auto fetch = [&](long y, long x, std::size_t ch) -> double {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
    return in.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch);
  };
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const double ox = static_cast<double>(x) - cx;
      const double oy = static_cast<double>(y) - cy;
      const double sx = a * ox + b * oy + cx;
      const double sy = c * ox + d * oy + cy;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double tx = sx - fx;
      const double ty = sy - fy;
      const auto x0 = static_cast<long>(fx);
      const auto y0 = static_cast<long>(fy);
      for (std::size_t ch = 0; ch < in.channels; ++ch) {
        const double v = (1 - ty) * ((1 - tx) * fetch(y0, x0, ch) + tx * fetch(y0, x0 + 1, ch)) +
                         ty * ((1 - tx) * fetch(y0 + 1, x0, ch) + tx * fetch(y0 + 1, x0 + 1, ch));
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch) = static_cast<float>(v);
      }
    }
  }
  out.clamp();
  return out;
}

inline ImageTensor scale(const ImageTensor& in, double factor) {
  if (!(factor > 0.0)) fail(Errc::invalid_argument, "scale factor must be positive");
  return warp_about_center(in, 1.0 / factor, 0.0, 0.0, 1.0 / factor);
}

/// Counter-clockwise rotation in image coordinates by `degrees`.
inline ImageTensor rotate(const ImageTensor& in, double degrees) {
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th);
  const double sn = std::sin(th);
  // Inverse rotation maps each output pixel back to its source.
  return warp_about_center(in, cs, sn, -sn, cs);
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur, kernel size 2*ceil(3 sigma)+1, edge-clamped.
inline ImageTensor blur(const ImageTensor& in, double sigma) {
  if (!(sigma > 0.0)) fail(Errc::invalid_argument, "blur sigma must be positive");
  const auto k = gaussian_kernel(sigma);
  const auto radius = static_cast<long>(k.size() / 2);
  const auto h = static_cast<long>(in.height);
  const auto w = static_cast<long>(in.width);
  std::vector<double> tmp(in.size());
  auto idx = [&](long y, long x, std::size_t c) { return (static_cast<std::size_t>(y) * in.width + static_cast<std::size_t>(x)) * in.channels + c; };
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          acc += k[static_cast<std::size_t>(i + radius)] * in.data[idx(y, std::clamp(x + i, 0L, w - 1), c)];
        }
        tmp[idx(y, x, c)] = acc;
      }
    }
  }
  ImageTensor out(in.height, in.width, in.channels);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i) {
          acc += k[static_cast<std::size_t>(i + radius)] * tmp[idx(std::clamp(y + i, 0L, h - 1), x, c)];
        }
        out.data[idx(y, x, c)] = static_cast<float>(acc);
      }
    }
  }
  out.clamp();
  return out;
}

/// Samples the operator's parameters from `rng` and applies it.
inline ImageTensor apply(const MutationOp& op, const ImageTensor& image, Rng& rng) {
  return std::visit(
      [&](const auto& o) -> ImageTensor {
        using O = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<O, Contrast>) {
          return adjust_contrast(image, o.factor.sample(rng));
        } else if constexpr (std::is_same_v<O, Brightness>) {
          return adjust_brightness(image, o.delta.sample(rng));
        } else if constexpr (std::is_same_v<O, Translate>) {
          const auto mx = static_cast<long>(std::ceil(o.max_fraction * static_cast<double>(image.width)));
          const auto my = static_cast<long>(std::ceil(o.max_fraction * static_cast<double>(image.height)));
          const long dx = static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * mx + 1))) - mx;
          const long dy = static_cast<long>(rng.below(static_cast<std::uint64_t>(2 * my + 1))) - my;
          return translate(image, dx, dy);
        } else if constexpr (std::is_same_v<O, Scale>) {
          return scale(image, o.factor.sample(rng));
        } else if constexpr (std::is_same_v<O, Rotate>) {
          return rotate(image, rng.uniform(-o.max_degrees, o.max_degrees));
        } else {
          return blur(image, o.sigma.sample(rng));
        }
      },
      op);
}

// ---------------------------------------------------------------------------

struct ValidityParams {
  double alpha = 0.2;  // fraction of pixels allowed to change
  double beta = 0.4;   // max per-value change, normalized units

  void check() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) fail(Errc::invalid_argument, "alpha must lie in (0, 1]");
    if (!(beta > 0.0 && beta <= 1.0)) fail(Errc::invalid_argument, "beta must lie in (0, 1]");
  }
};

inline constexpr double kChangedEpsilon = 1e-6;

/// A mutant is valid when few pixels changed (fewer than alpha * #pixels; a
/// pixel counts as changed if any channel moved by more than 1e-6) or when
/// every change is small (max |delta| < beta).
inline bool is_valid(const ImageTensor& original, const ImageTensor& mutated, const ValidityParams& params) {
  if (!original.same_shape(mutated)) fail(Errc::shape_mismatch, "validity check on differently shaped images");
  std::size_t changed = 0;
  double max_delta = 0.0;
  for (std::size_t p = 0; p < original.pixels(); ++p) {
    bool any = false;
    for (std::size_t c = 0; c < original.channels; ++c) {
      const double d = std::abs(static_cast<double>(mutated.data[p * original.channels + c]) -
                                static_cast<double>(original.data[p * original.channels + c]));
      max_delta = std::max(max_delta, d);
      if (d > kChangedEpsilon) any = true;
    }
    if (any) ++changed;
  }
  const bool few_changed = static_cast<double>(changed) < params.alpha * static_cast<double>(original.pixels());
  const bool small_changes = max_delta < params.beta;
  return few_changed || small_changes;
}

}  // namespace nlc
