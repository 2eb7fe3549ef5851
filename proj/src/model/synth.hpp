#pragma once

#include <cstdint>
#include <vector>

#include "model/toy_model.hpp"

namespace xstab {

// n labeled 64x64 images of {0: circle, 1: square, 2: triangle} in random
// colors and positions. Labels cycle 0,1,2,... so every prefix is balanced;
// everything else is drawn from the seeded stream.
std::vector<Sample> synth_dataset(std::size_t n, std::uint64_t seed);

}  // namespace xstab
