#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "error.hpp"

namespace xstab {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // height*width*3

  Image() = default;
  Image(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(h * w * 3, fill) {
    if (h == 0 || w == 0) fail(Err::EmptyInput, "image dims must be positive");
  }

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

// Loads PNG or binary PPM (P6); the format is detected from the file's magic
// bytes. Any PNG color type is converted to 8-bit RGB; 16-bit PNG is rejected.
Image load_image(const std::filesystem::path& path);

// Saves as PNG or PPM depending on the file extension (.png / .ppm).
void save_image(const Image& img, const std::filesystem::path& path);

// Pixel-center bilinear resampling to out_h x out_w.
Image resize_image_bilinear(const Image& img, std::size_t out_h, std::size_t out_w);

inline std::uint8_t clamp_u8(double v) {
  if (v < 0.0) return 0;
  if (v > 255.0) return 255;
  return static_cast<std::uint8_t>(v);
}

}  // namespace xstab
