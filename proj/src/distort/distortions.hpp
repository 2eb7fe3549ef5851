#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "core/image.hpp"
#include "core/rng.hpp"

namespace xstab {

enum class Family { GaussianNoise, GaussianBlur, Brightness, Perspective };
enum class Orientation { Top, Bottom, Left, Right };

const char* family_name(Family f);
Family family_from_name(std::string_view s);
const char* orientation_name(Orientation o);
Orientation orientation_from_name(std::string_view s);

// One distortion campaign for one family. `levels` is the severity axis
// (k, sigma, beta, or l). The variant axis is M seeded draws for the
// stochastic families, the mask-size list for blur, and the orientation list
// for perspective.
struct DistortionSpec {
  Family family = Family::GaussianNoise;
  std::vector<double> levels;
  std::size_t variants_per_level = 5;                // noise / brightness
  std::vector<int> mask_sizes = {5, 7, 9, 11};       // blur
  std::vector<Orientation> orientations = {Orientation::Top, Orientation::Bottom,
                                           Orientation::Left, Orientation::Right};
  std::uint64_t seed = 0;

  std::size_t variant_count() const;
  void validate() const;
};

// Zero-mean Gaussian draw with sigma = k/2, redrawn until |alpha| <= k.
double truncated_gaussian_shift(double k, SplitMix64& rng);

// One shared shift per pixel across the three channels, rounded and clamped.
Image add_gaussian_noise(const Image& img, double k, std::uint64_t seed);

// size x size kernel ~ exp(-(u^2+v^2)/(2 sigma^2)), normalized to sum 1.
std::vector<double> gaussian_kernel(int size, double sigma);

// Per-channel convolution with reflected borders; rounded and clamped.
Image gaussian_blur(const Image& img, int size, double sigma);

// One scalar truncated-Gaussian shift applied to every pixel and channel.
Image brightness_shift(const Image& img, double beta, std::uint64_t seed);

// Warps the image onto a trapezoid whose narrow side sits on `orientation`;
// corner inset is round(l*W/40) px (l*H/40 for left/right). l = 0 copies the
// input bit-exactly; samples falling outside the source are black.
Image perspective_distort(const Image& img, Orientation orientation, double l);

struct DistortedVariant {
  std::size_t level_index = 0;
  std::size_t variant_index = 0;
  double level = 0.0;
  int mask_size = 0;               // blur only
  Orientation orientation = Orientation::Top;  // perspective only
  bool seeded = false;
  std::uint64_t seed = 0;          // stochastic families only
  Image image;
};

// Materializes the full |levels| x M grid for one source image; bit-identical
// across re-runs for the same (spec, image_id, image).
std::vector<DistortedVariant> generate_distortion_set(const Image& img,
                                                      std::string_view image_id,
                                                      const DistortionSpec& spec);

}  // namespace xstab
