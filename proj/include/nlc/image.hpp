#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "nlc/error.hpp"

namespace nlc {

/// Height x width x channels image, interleaved (HWC), values in [0, 1].
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> data;

  ImageTensor() = default;
  ImageTensor(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  std::size_t pixels() const noexcept { return height * width; }
  std::size_t size() const noexcept { return data.size(); }

  float& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * width + x) * channels + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * width + x) * channels + c]; }

  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  void clamp() {
    for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
  }

  std::vector<double> flatten() const { return {data.begin(), data.end()}; }

  bool operator==(const ImageTensor&) const = default;
};

inline ImageTensor image_from_flat(const std::vector<double>& flat, std::size_t h, std::size_t w, std::size_t c) {
  if (flat.size() != h * w * c) fail(Errc::shape_mismatch, "flat input does not match image shape");
  ImageTensor img(h, w, c);
  for (std::size_t i = 0; i < flat.size(); ++i) img.data[i] = static_cast<float>(flat[i]);
  img.clamp();
  return img;
}

}  // namespace nlc
