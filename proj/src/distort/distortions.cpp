#include "distort/distortions.hpp"

#include <algorithm>
#include <cmath>

#include "distort/homography.hpp"

namespace xstab {

const char* family_name(Family f) {
  switch (f) {
    case Family::GaussianNoise: return "gaussian_noise";
    case Family::GaussianBlur: return "gaussian_blur";
    case Family::Brightness: return "brightness";
    case Family::Perspective: return "perspective";
  }
  fail(Err::InvalidParameter, "unknown family");
}

Family family_from_name(std::string_view s) {
  if (s == "gaussian_noise") return Family::GaussianNoise;
  if (s == "gaussian_blur") return Family::GaussianBlur;
  if (s == "brightness") return Family::Brightness;
  if (s == "perspective") return Family::Perspective;
  fail(Err::InvalidParameter, "unknown distortion family: " + std::string(s));
}

const char* orientation_name(Orientation o) {
  switch (o) {
    case Orientation::Top: return "top";
    case Orientation::Bottom: return "bottom";
    case Orientation::Left: return "left";
    case Orientation::Right: return "right";
  }
  fail(Err::InvalidParameter, "unknown orientation");
}

Orientation orientation_from_name(std::string_view s) {
  if (s == "top") return Orientation::Top;
  if (s == "bottom") return Orientation::Bottom;
  if (s == "left") return Orientation::Left;
  if (s == "right") return Orientation::Right;
  fail(Err::InvalidParameter, "unknown orientation: " + std::string(s));
}

std::size_t DistortionSpec::variant_count() const {
  switch (family) {
    case Family::GaussianBlur: return mask_sizes.size();
    case Family::Perspective: return orientations.size();
    default: return variants_per_level;
  }
}

void DistortionSpec::validate() const {
  if (levels.empty()) fail(Err::InvalidParameter, "distortion spec has no levels");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1]))
      fail(Err::InvalidParameter, "levels must be strictly increasing");
  if (variant_count() == 0) fail(Err::InvalidParameter, "spec needs at least one variant");
  switch (family) {
    case Family::GaussianNoise:
    case Family::Brightness:
      for (double k : levels)
        if (!(k > 0.0 && k <= 255.0))
          fail(Err::InvalidParameter, "shift levels must lie in (0,255]");
      break;
    case Family::GaussianBlur:
      for (double s : levels)
        if (!(s > 0.0)) fail(Err::InvalidParameter, "blur sigma must be positive");
      for (int m : mask_sizes)
        if (m < 3 || m % 2 == 0)
          fail(Err::InvalidParameter, "blur mask sizes must be odd and >= 3");
      break;
    case Family::Perspective:
      for (double l : levels)
        if (!(l >= 0.0)) fail(Err::InvalidParameter, "zoom level must be >= 0");
      break;
  }
}

double truncated_gaussian_shift(double k, SplitMix64& rng) {
  if (!(k > 0.0 && k <= 255.0))
    fail(Err::InvalidParameter, "truncated_gaussian_shift: k must lie in (0,255]");
  const double sigma = k / 2.0;
  for (;;) {
    const double alpha = sigma * normal_quantile(rng.next_open01());
    if (std::abs(alpha) <= k) return alpha;
  }
}

Image add_gaussian_noise(const Image& img, double k, std::uint64_t seed) {
  if (img.pixels.empty()) fail(Err::EmptyInput, "add_gaussian_noise: empty image");
  SplitMix64 rng(seed);
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double alpha = truncated_gaussian_shift(k, rng);
      for (std::size_t c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp_u8(std::round(static_cast<double>(img.at(y, x, c)) + alpha));
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 3 || size % 2 == 0)
    fail(Err::InvalidParameter, "gaussian_kernel: size must be odd and >= 3");
  if (!(sigma > 0.0)) fail(Err::InvalidParameter, "gaussian_kernel: sigma must be positive");
  const int half = size / 2;
  std::vector<double> k(static_cast<std::size_t>(size) * size);
  double sum = 0.0;
  for (int v = -half; v <= half; ++v)
    for (int u = -half; u <= half; ++u) {
      const double g = std::exp(-(static_cast<double>(u) * u + static_cast<double>(v) * v) /
                                (2.0 * sigma * sigma));
      k[static_cast<std::size_t>(v + half) * size + (u + half)] = g;
      sum += g;
    }
  for (double& g : k) g /= sum;
  return k;
}

namespace {

// Half-sample symmetric reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

Image gaussian_blur(const Image& img, int size, double sigma) {
  if (img.pixels.empty()) fail(Err::EmptyInput, "gaussian_blur: empty image");
  const std::vector<double> k = gaussian_kernel(size, sigma);
  const int half = size / 2;
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  Image out(img.height, img.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (int v = -half; v <= half; ++v) {
        const std::ptrdiff_t sy = reflect(y + v, h);
        for (int u = -half; u <= half; ++u) {
          const std::ptrdiff_t sx = reflect(x + u, w);
          const double g = k[static_cast<std::size_t>(v + half) * size + (u + half)];
          for (int c = 0; c < 3; ++c)
            acc[c] += g * static_cast<double>(img.at(static_cast<std::size_t>(sy),
                                                     static_cast<std::size_t>(sx),
                                                     static_cast<std::size_t>(c)));
        }
      }
      for (int c = 0; c < 3; ++c)
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x),
               static_cast<std::size_t>(c)) = clamp_u8(std::round(acc[c]));
    }
  }
  return out;
}

Image brightness_shift(const Image& img, double beta, std::uint64_t seed) {
  if (img.pixels.empty()) fail(Err::EmptyInput, "brightness_shift: empty image");
  SplitMix64 rng(seed);
  const double alpha = truncated_gaussian_shift(beta, rng);
  Image out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = clamp_u8(std::round(static_cast<double>(img.pixels[i]) + alpha));
  return out;
}

Image perspective_distort(const Image& img, Orientation orientation, double l) {
  if (img.pixels.empty()) fail(Err::EmptyInput, "perspective_distort: empty image");
  if (!(l >= 0.0)) fail(Err::InvalidParameter, "perspective_distort: l must be >= 0");
  const double W = static_cast<double>(img.width);
  const double H = static_cast<double>(img.height);
  const bool horizontal = orientation == Orientation::Top || orientation == Orientation::Bottom;
  const double d = std::round(l * (horizontal ? W : H) / 40.0);
  if (d == 0.0) return img;  // identity warp
  const double edge = horizontal ? W - 1.0 : H - 1.0;
  if (2.0 * d >= edge)
    fail(Err::DegenerateQuad, "perspective_distort: inset collapses the narrow side");

  const std::array<Vec2, 4> src = {
      Vec2{0.0, 0.0}, Vec2{W - 1.0, 0.0}, Vec2{W - 1.0, H - 1.0}, Vec2{0.0, H - 1.0}};
  std::array<Vec2, 4> dst = src;
  switch (orientation) {
    case Orientation::Top:
      dst[0].u += d;
      dst[1].u -= d;
      break;
    case Orientation::Bottom:
      dst[3].u += d;
      dst[2].u -= d;
      break;
    case Orientation::Left:
      dst[0].v += d;
      dst[3].v -= d;
      break;
    case Orientation::Right:
      dst[1].v += d;
      dst[2].v -= d;
      break;
  }

  // Pull pixels through the inverse map so every output pixel gets a value.
  const Homography inv = solve_homography(dst, src);
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      Vec2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      // Tolerance keeps exact corner/edge correspondences inside despite
      // round-off in the solved homography.
      constexpr double eps = 1e-9;
      if (s.u < -eps || s.u > W - 1.0 + eps || s.v < -eps || s.v > H - 1.0 + eps)
        continue;  // black
      s.u = std::clamp(s.u, 0.0, W - 1.0);
      s.v = std::clamp(s.v, 0.0, H - 1.0);
      const std::size_t x0 = static_cast<std::size_t>(s.u);
      const std::size_t y0 = static_cast<std::size_t>(s.v);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const std::size_t y1 = std::min(y0 + 1, img.height - 1);
      const double fu = s.u - static_cast<double>(x0);
      const double fv = s.v - static_cast<double>(y0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - fu) + img.at(y0, x1, c) * fu;
        const double bot = img.at(y1, x0, c) * (1.0 - fu) + img.at(y1, x1, c) * fu;
        out.at(y, x, c) = clamp_u8(std::round(top * (1.0 - fv) + bot * fv));
      }
    }
  }
  return out;
}

std::vector<DistortedVariant> generate_distortion_set(const Image& img,
                                                      std::string_view image_id,
                                                      const DistortionSpec& spec) {
  spec.validate();
  if (img.pixels.empty()) fail(Err::EmptyInput, "generate_distortion_set: empty image");
  std::vector<DistortedVariant> out;
  out.reserve(spec.levels.size() * spec.variant_count());
  for (std::size_t li = 0; li < spec.levels.size(); ++li) {
    const double level = spec.levels[li];
    for (std::size_t vi = 0; vi < spec.variant_count(); ++vi) {
      DistortedVariant dv;
      dv.level_index = li;
      dv.variant_index = vi;
      dv.level = level;
      switch (spec.family) {
        case Family::GaussianNoise:
          dv.seeded = true;
          dv.seed = derive_seed(spec.seed, image_id, li, vi);
          dv.image = add_gaussian_noise(img, level, dv.seed);
          break;
        case Family::Brightness:
          dv.seeded = true;
          dv.seed = derive_seed(spec.seed, image_id, li, vi);
          dv.image = brightness_shift(img, level, dv.seed);
          break;
        case Family::GaussianBlur:
          dv.mask_size = spec.mask_sizes[vi];
          dv.image = gaussian_blur(img, dv.mask_size, level);
          break;
        case Family::Perspective:
          dv.orientation = spec.orientations[vi];
          dv.image = perspective_distort(img, dv.orientation, level);
          break;
      }
      out.push_back(std::move(dv));
    }
  }
  return out;
}

}  // namespace xstab
