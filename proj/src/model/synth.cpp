#include "model/synth.hpp"

#include <cmath>

#include "core/rng.hpp"

namespace xstab {

namespace {

constexpr std::size_t kSide = 64;

void fill_background(Image& img, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
}

}  // namespace

std::vector<Sample> synth_dataset(std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(Err::InvalidParameter, "synth_dataset: n must be >= 1");
  SplitMix64 rng(seed);
  auto pick = [&rng](std::uint64_t lo, std::uint64_t hi) {  // inclusive range
    return lo + rng.next() % (hi - lo + 1);
  };

  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.label = i % 3;
    s.image = Image(kSide, kSide);
    // Dark background, bright shape: keeps the classes separable by form.
    fill_background(s.image, static_cast<std::uint8_t>(pick(0, 80)),
                    static_cast<std::uint8_t>(pick(0, 80)),
                    static_cast<std::uint8_t>(pick(0, 80)));
    const std::uint8_t fr = static_cast<std::uint8_t>(pick(140, 255));
    const std::uint8_t fg = static_cast<std::uint8_t>(pick(140, 255));
    const std::uint8_t fb = static_cast<std::uint8_t>(pick(140, 255));

    const std::size_t r = pick(8, 16);
    const std::size_t cx = pick(r + 2, kSide - 2 - r);
    const std::size_t cy = pick(r + 2, kSide - 2 - r);

    auto put = [&](std::size_t y, std::size_t x) {
      s.image.at(y, x, 0) = fr;
      s.image.at(y, x, 1) = fg;
      s.image.at(y, x, 2) = fb;
    };
    for (std::size_t y = cy - r; y <= cy + r; ++y) {
      for (std::size_t x = cx - r; x <= cx + r; ++x) {
        const double dx = static_cast<double>(x) - static_cast<double>(cx);
        const double dy = static_cast<double>(y) - static_cast<double>(cy);
        bool inside = false;
        switch (s.label) {
          case 0:
            inside = dx * dx + dy * dy <= static_cast<double>(r) * static_cast<double>(r);
            break;
          case 1:
            inside = true;  // the loop bounds already describe the square
            break;
          case 2:
            // Upward triangle: apex (cx, cy-r), base across the bottom row.
            inside = std::abs(dx) <= (dy + static_cast<double>(r)) / 2.0;
            break;
        }
        if (inside) put(y, x);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace xstab
