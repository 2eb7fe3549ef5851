#pragma once

#include <cstddef>
#include <vector>

#include "error.hpp"

namespace xstab {

// Dense (channels, height, width) tensor of doubles, C-order.
struct ActivationTensor {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  ActivationTensor() = default;
  ActivationTensor(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0) {
    if (c == 0 || h == 0 || w == 0) fail(Err::EmptyInput, "tensor dims must be positive");
  }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
};

}  // namespace xstab
