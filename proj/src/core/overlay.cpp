#include "core/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace xstab {

namespace {

std::uint8_t ramp_channel(double x) {
  return clamp_u8(std::round(255.0 * std::clamp(x, 0.0, 1.0)));
}

std::array<std::array<std::uint8_t, 3>, 256> build_ramp() {
  // Piecewise-linear jet-style gradient: blue -> cyan -> green -> yellow -> red.
  std::array<std::array<std::uint8_t, 3>, 256> lut{};
  for (int i = 0; i < 256; ++i) {
    const double t = static_cast<double>(i) / 255.0;
    lut[static_cast<std::size_t>(i)] = {
        ramp_channel(1.5 - std::abs(4.0 * t - 3.0)),
        ramp_channel(1.5 - std::abs(4.0 * t - 2.0)),
        ramp_channel(1.5 - std::abs(4.0 * t - 1.0)),
    };
  }
  return lut;
}

}  // namespace

const std::array<std::array<std::uint8_t, 3>, 256>& heatmap_ramp() {
  static const auto lut = build_ramp();
  return lut;
}

Image render_heatmap(const SaliencyMap& map) {
  const SaliencyMap norm = minmax_normalize(map);
  const auto& lut = heatmap_ramp();
  Image out(norm.height, norm.width);
  for (std::size_t y = 0; y < norm.height; ++y) {
    for (std::size_t x = 0; x < norm.width; ++x) {
      const auto idx = static_cast<std::size_t>(std::lround(norm.at(y, x) * 255.0));
      const auto& rgb = lut[std::min<std::size_t>(idx, 255)];
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = rgb[c];
    }
  }
  return out;
}

Image render_heatmap_overlay(const SaliencyMap& map, const Image& base) {
  const Image heat = render_heatmap(map);
  const Image bg = resize_image_bilinear(base, heat.height, heat.width);
  Image out(heat.height, heat.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = clamp_u8(
        std::round(0.5 * static_cast<double>(heat.pixels[i]) + 0.5 * static_cast<double>(bg.pixels[i])));
  }
  return out;
}

}  // namespace xstab
