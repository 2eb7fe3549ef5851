#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "core/image.hpp"
#include "core/saliency_map.hpp"

namespace xstab {

// Fixed 256-entry blue-cyan-green-yellow-red ramp used for all heat maps.
const std::array<std::array<std::uint8_t, 3>, 256>& heatmap_ramp();

// Renders the map through the ramp. Values are min-max normalized first.
Image render_heatmap(const SaliencyMap& map);

// Blends the rendered map at 50% alpha over the base image. The base is
// resampled to the map's resolution when the sizes differ.
Image render_heatmap_overlay(const SaliencyMap& map, const Image& base);

}  // namespace xstab
