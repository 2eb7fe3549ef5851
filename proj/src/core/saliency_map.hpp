#pragma once

#include <cstddef>
#include <vector>

#include "error.hpp"

namespace xstab {

// Single-channel (height, width) map of doubles, C-order.
struct SaliencyMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  SaliencyMap() = default;
  SaliencyMap(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), data(h * w, fill) {
    if (h == 0 || w == 0) fail(Err::EmptyInput, "map dims must be positive");
  }

  double& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
  std::size_t size() const { return data.size(); }
};

// Affine rescale onto [0,1]; a constant map becomes all zeros.
SaliencyMap minmax_normalize(const SaliencyMap& m);

// Divide by the sum so values add to 1. Rejects negative entries and zero mass.
SaliencyMap sum_normalize(const SaliencyMap& m);

// Bilinear resample to (out_h, out_w) using the pixel-center convention
// src = (dst + 0.5) * in/out - 0.5 with clamp-to-edge sampling.
SaliencyMap resize_bilinear(const SaliencyMap& m, std::size_t out_h, std::size_t out_w);

void check_finite(const SaliencyMap& m, const char* what);

}  // namespace xstab
