#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "core/rng.hpp"
#include "distort/corpus.hpp"
#include "distort/distortions.hpp"
#include "distort/homography.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace xstab;
namespace fs = std::filesystem;

namespace {

Err thrown_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Err::Io;
}

fs::path temp_dir(const char* leaf) {
  fs::path p = fs::temp_directory_path() / "xstab_test_distort" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Image mid_gray(std::size_t h, std::size_t w) { return Image(h, w, 128); }

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed, int lo = 0, int hi = 255) {
  Image img(h, w);
  SplitMix64 g(seed);
  for (auto& px : img.pixels)
    px = static_cast<std::uint8_t>(lo + static_cast<int>(g.next() % (hi - lo + 1)));
  return img;
}

Image rotate_cw(const Image& in) {
  Image out(in.width, in.height);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out.at(x, in.height - 1 - y, c) = in.at(y, x, c);
  return out;
}

int linf(const Image& a, const Image& b) {
  REQUIRE(a.height == b.height);
  REQUIRE(a.width == b.width);
  int m = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    m = std::max(m, std::abs(static_cast<int>(a.pixels[i]) - static_cast<int>(b.pixels[i])));
  return m;
}

}  // namespace

TEST_CASE("truncated_gaussian_shift respects the bound and the seed") {
  SplitMix64 a(5), b(5), c(6);
  std::vector<double> sa, sb;
  for (int i = 0; i < 1000; ++i) {
    const double va = truncated_gaussian_shift(50.0, a);
    sa.push_back(va);
    sb.push_back(truncated_gaussian_shift(50.0, b));
    REQUIRE(std::abs(va) <= 50.0);
  }
  CHECK(sa == sb);
  CHECK(truncated_gaussian_shift(50.0, c) != sa[0]);
}

TEST_CASE("truncated_gaussian_shift empirical std matches the truncated sigma") {
  // Zero-mean Gaussian truncated at two sigma: Var = sigma^2 (1 - 4 phi(2)/(Phi(2)-Phi(-2))).
  const double k = 100.0, sigma = 50.0;
  const double phi2 = std::exp(-2.0) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(2.0 / std::sqrt(2.0));
  const double want_std = sigma * std::sqrt(1.0 - 4.0 * phi2 / mass);
  SplitMix64 g(777);
  double s = 0, s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = truncated_gaussian_shift(k, g);
    s += x;
    s2 += x * x;
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(std::sqrt(var) == doctest::Approx(want_std).epsilon(0.03));
}

TEST_CASE("truncated_gaussian_shift rejects k outside (0,255]") {
  SplitMix64 g(1);
  CHECK(thrown_code([&] { truncated_gaussian_shift(0.0, g); }) == Err::InvalidParameter);
  CHECK(thrown_code([&] { truncated_gaussian_shift(-3.0, g); }) == Err::InvalidParameter);
  CHECK(thrown_code([&] { truncated_gaussian_shift(256.0, g); }) == Err::InvalidParameter);
}

TEST_CASE("add_gaussian_noise is deterministic per seed") {
  Image img = random_image(16, 16, 11);
  Image a = add_gaussian_noise(img, 75.0, 99);
  Image b = add_gaussian_noise(img, 75.0, 99);
  Image c = add_gaussian_noise(img, 75.0, 100);
  CHECK(a.pixels == b.pixels);
  CHECK(a.pixels != c.pixels);
  CHECK(a.height == img.height);
  CHECK(a.width == img.width);
}

TEST_CASE("add_gaussian_noise deviations are bounded on mid-gray") {
  Image img = mid_gray(32, 32);
  Image out = add_gaussian_noise(img, 25.0, 4242);
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    REQUIRE(std::abs(static_cast<int>(out.pixels[i]) - 128) <= 25);
}

TEST_CASE("add_gaussian_noise shares the shift across channels") {
  Image img(8, 8);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      img.at(y, x, 0) = 100;
      img.at(y, x, 1) = 120;
      img.at(y, x, 2) = 140;
    }
  Image out = add_gaussian_noise(img, 25.0, 7);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      const int d0 = static_cast<int>(out.at(y, x, 0)) - 100;
      const int d1 = static_cast<int>(out.at(y, x, 1)) - 120;
      const int d2 = static_cast<int>(out.at(y, x, 2)) - 140;
      REQUIRE(d0 == d1);
      REQUIRE(d1 == d2);
    }
}

TEST_CASE("add_gaussian_noise mean absolute deviation matches the truncated-Gaussian value") {
  // E|shift| = sigma sqrt(2/pi) (1 - exp(-2)) / (Phi(2) - Phi(-2)), sigma = 50.
  const double expect =
      50.0 * std::sqrt(2.0 / M_PI) * (1.0 - std::exp(-2.0)) / std::erf(2.0 / std::sqrt(2.0));
  Image img = mid_gray(64, 64);
  Image out = add_gaussian_noise(img, 100.0, 314159);
  double mad = 0.0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      mad += std::abs(static_cast<int>(out.at(y, x, 0)) - 128);
  mad /= 64.0 * 64.0;
  CHECK(mad == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("gaussian_kernel normalization, symmetry, and center ratio") {
  for (auto [s, sigma] : {std::pair<int, double>{3, 1.0}, {5, 1.25}, {11, 6.0}}) {
    auto k = gaussian_kernel(s, sigma);
    double sum = 0;
    for (double v : k) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int v = 0; v < s; ++v)
      for (int u = 0; u < s; ++u) {
        CHECK(k[v * s + u] == doctest::Approx(k[v * s + (s - 1 - u)]).epsilon(1e-12));
        CHECK(k[v * s + u] == doctest::Approx(k[(s - 1 - v) * s + u]).epsilon(1e-12));
      }
  }
  auto k3 = gaussian_kernel(3, 1.0);
  CHECK(k3[1 * 3 + 1] / k3[1 * 3 + 0] == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian_kernel parameter validation") {
  CHECK(thrown_code([] { gaussian_kernel(4, 1.0); }) == Err::InvalidParameter);
  CHECK(thrown_code([] { gaussian_kernel(1, 1.0); }) == Err::InvalidParameter);
  CHECK(thrown_code([] { gaussian_kernel(5, 0.0); }) == Err::InvalidParameter);
}

TEST_CASE("gaussian_blur keeps constant images fixed") {
  Image img(10, 14, 77);
  Image out = gaussian_blur(img, 7, 2.0);
  CHECK(out.pixels == img.pixels);
}

TEST_CASE("gaussian_blur impulse response equals the kernel") {
  const int s = 5;
  const double sigma = 1.2;
  Image img(15, 15, 0);
  for (std::size_t c = 0; c < 3; ++c) img.at(7, 7, c) = 255;
  Image out = gaussian_blur(img, s, sigma);

  // Independent kernel straight from the formula.
  double raw[s][s], sum = 0;
  for (int v = -2; v <= 2; ++v)
    for (int u = -2; u <= 2; ++u) {
      raw[v + 2][u + 2] = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
      sum += raw[v + 2][u + 2];
    }
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x) {
      const int dy = y - 7, dx = x - 7;
      const int want = (std::abs(dy) <= 2 && std::abs(dx) <= 2)
                           ? static_cast<int>(std::round(255.0 * raw[dy + 2][dx + 2] / sum))
                           : 0;
      REQUIRE(static_cast<int>(out.at(y, x, 0)) == want);
    }
}

TEST_CASE("gaussian_blur composes like Gaussians") {
  Image img = random_image(24, 24, 17);
  Image twice = gaussian_blur(gaussian_blur(img, 11, 1.5), 11, 1.5);
  Image once = gaussian_blur(img, 21, 1.5 * std::sqrt(2.0));
  CHECK(linf(twice, once) <= 2);
}

TEST_CASE("brightness_shift applies one constant shift") {
  Image img = random_image(12, 12, 23, 50, 200);
  Image out = brightness_shift(img, 10.0, 55);
  const int d = static_cast<int>(out.pixels[0]) - static_cast<int>(img.pixels[0]);
  CHECK(std::abs(d) <= 10);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    REQUIRE(static_cast<int>(out.pixels[i]) - static_cast<int>(img.pixels[i]) == d);
  CHECK(brightness_shift(img, 10.0, 55).pixels == out.pixels);
}

TEST_CASE("brightness_shift clamps at the channel range") {
  Image img(2, 2);
  img.at(0, 0, 0) = 0;
  img.at(0, 0, 1) = 100;
  img.at(0, 0, 2) = 255;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL, 6ULL, 7ULL, 8ULL}) {
    Image out = brightness_shift(img, 25.0, seed);
    const int sh = static_cast<int>(out.at(0, 0, 1)) - 100;  // never clamps
    CHECK(out.at(0, 0, 0) == static_cast<std::uint8_t>(std::max(0, sh)));
    CHECK(out.at(0, 0, 2) == static_cast<std::uint8_t>(std::min(255, 255 + sh)));
  }
}

TEST_CASE("solve_homography identity, scale, translation") {
  const std::array<Vec2, 4> sq = {Vec2{0, 0}, Vec2{1, 0}, Vec2{1, 1}, Vec2{0, 1}};
  Homography id = solve_homography(sq, sq);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(id.h[r][c] == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-12));

  std::array<Vec2, 4> dbl = sq;
  for (auto& p : dbl) {
    p.u *= 2;
    p.v *= 2;
  }
  Homography sc = solve_homography(sq, dbl);
  CHECK(sc.h[0][0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sc.h[1][1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sc.h[2][2] == 1.0);
  CHECK(sc.h[0][1] == doctest::Approx(0.0).epsilon(1e-12));

  std::array<Vec2, 4> tr = sq;
  for (auto& p : tr) {
    p.u += 3;
    p.v += 4;
  }
  Homography t = solve_homography(sq, tr);
  CHECK(t.h[0][2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(t.h[1][2] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("solve_homography maps corners with tiny residuals on random quads") {
  SplitMix64 g(2024);
  for (int t = 0; t < 25; ++t) {
    auto jitter = [&](double base_u, double base_v) {
      return Vec2{base_u + g.next_open01() * 20 - 10, base_v + g.next_open01() * 20 - 10};
    };
    const std::array<Vec2, 4> src = {jitter(0, 0), jitter(100, 0), jitter(100, 100),
                                     jitter(0, 100)};
    const std::array<Vec2, 4> dst = {jitter(0, 0), jitter(100, 0), jitter(100, 100),
                                     jitter(0, 100)};
    Homography H = solve_homography(src, dst);
    for (int i = 0; i < 4; ++i) {
      Vec2 m = H.apply(src[i]);
      REQUIRE(std::abs(m.u - dst[i].u) < 1e-6);
      REQUIRE(std::abs(m.v - dst[i].v) < 1e-6);
    }
    // Composing with the reverse solve recovers the identity.
    Homography R = solve_homography(dst, src);
    for (int i = 0; i < 4; ++i) {
      Vec2 back = R.apply(H.apply(src[i]));
      REQUIRE(std::abs(back.u - src[i].u) < 1e-6);
      REQUIRE(std::abs(back.v - src[i].v) < 1e-6);
    }
  }
}

TEST_CASE("solve_homography rejects collinear corners") {
  const std::array<Vec2, 4> bad = {Vec2{0, 0}, Vec2{1, 0}, Vec2{2, 0}, Vec2{0, 1}};
  const std::array<Vec2, 4> sq = {Vec2{0, 0}, Vec2{1, 0}, Vec2{1, 1}, Vec2{0, 1}};
  CHECK(thrown_code([&] { solve_homography(bad, sq); }) == Err::DegenerateQuad);
}

TEST_CASE("perspective_distort with l = 0 copies the input") {
  Image img = random_image(20, 30, 5);
  for (Orientation o :
       {Orientation::Top, Orientation::Bottom, Orientation::Left, Orientation::Right}) {
    Image out = perspective_distort(img, o, 0.0);
    CHECK(out.pixels == img.pixels);
  }
}

TEST_CASE("perspective_distort narrows the oriented edge and letterboxes in black") {
  // l = 10 on a 400-wide image insets the top corners by 100 px each.
  Image img(8, 400, 255);
  Image out = perspective_distort(img, Orientation::Top, 10.0);
  CHECK(out.height == img.height);
  CHECK(out.width == img.width);
  for (std::size_t x = 0; x < 400; ++x) {
    const bool inside = x >= 100 && x <= 299;
    REQUIRE(static_cast<int>(out.at(0, x, 0)) == (inside ? 255 : 0));
  }
  // Bottom row keeps its full extent.
  CHECK(out.at(7, 0, 0) == 255);
  CHECK(out.at(7, 399, 0) == 255);
}

TEST_CASE("perspective_distort is equivariant under 90-degree rotation") {
  Image img = random_image(32, 32, 77);
  Image a = rotate_cw(perspective_distort(img, Orientation::Top, 6.0));
  Image b = perspective_distort(rotate_cw(img), Orientation::Right, 6.0);
  CHECK(linf(a, b) <= 1);
}

TEST_CASE("perspective_distort parameter errors") {
  Image img(20, 20, 9);
  CHECK(thrown_code([&] { perspective_distort(img, Orientation::Top, -1.0); }) ==
        Err::InvalidParameter);
  // Inset of half the edge collapses the narrow side.
  CHECK(thrown_code([&] { perspective_distort(img, Orientation::Top, 40.0); }) ==
        Err::DegenerateQuad);
}

TEST_CASE("generate_distortion_set produces the level-by-variant grid") {
  Image img = random_image(16, 16, 3);

  DistortionSpec noise;
  noise.family = Family::GaussianNoise;
  noise.levels = {25, 50, 75, 100, 125, 150, 175, 200};
  noise.variants_per_level = 5;
  noise.seed = 42;
  auto set = generate_distortion_set(img, "img_a", noise);
  CHECK(set.size() == 40);
  CHECK(set[0].level_index == 0);
  CHECK(set[0].variant_index == 0);
  CHECK(set[5].level_index == 1);
  CHECK(set[0].seeded);
  CHECK(set[0].seed == derive_seed(42, "img_a", 0, 0));
  CHECK(set[6].seed == derive_seed(42, "img_a", 1, 1));

  DistortionSpec blur;
  blur.family = Family::GaussianBlur;
  blur.levels = {1.25, 1.5, 1.75, 2, 2.5, 3, 3.5, 4, 5, 6};
  auto bset = generate_distortion_set(img, "img_a", blur);
  CHECK(bset.size() == 40);  // 10 sigmas x 4 masks
  CHECK(bset[1].mask_size == 7);
  CHECK_FALSE(bset[0].seeded);

  DistortionSpec one;
  one.family = Family::Brightness;
  one.levels = {30};
  one.variants_per_level = 1;
  CHECK(generate_distortion_set(img, "img_a", one).size() == 1);
}

TEST_CASE("generate_distortion_set is bit-reproducible") {
  Image img = random_image(12, 12, 8);
  DistortionSpec spec;
  spec.family = Family::GaussianNoise;
  spec.levels = {50, 100};
  spec.variants_per_level = 3;
  spec.seed = 7;
  auto a = generate_distortion_set(img, "x", spec);
  auto b = generate_distortion_set(img, "x", spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].image.pixels == b[i].image.pixels);
  // Different image id shifts every stream.
  auto c = generate_distortion_set(img, "y", spec);
  CHECK(a[0].image.pixels != c[0].image.pixels);
}

TEST_CASE("distortion spec validation") {
  Image img = random_image(8, 8, 1);
  DistortionSpec s;
  s.family = Family::GaussianNoise;
  s.levels = {};
  CHECK(thrown_code([&] { generate_distortion_set(img, "i", s); }) == Err::InvalidParameter);
  s.levels = {50, 50};
  CHECK(thrown_code([&] { generate_distortion_set(img, "i", s); }) == Err::InvalidParameter);
  s.levels = {50, 300};
  CHECK(thrown_code([&] { generate_distortion_set(img, "i", s); }) == Err::InvalidParameter);
  s.levels = {50};
  s.variants_per_level = 0;
  CHECK(thrown_code([&] { generate_distortion_set(img, "i", s); }) == Err::InvalidParameter);

  DistortionSpec b;
  b.family = Family::GaussianBlur;
  b.levels = {1.5};
  b.mask_sizes = {4};
  CHECK(thrown_code([&] { generate_distortion_set(img, "i", b); }) == Err::InvalidParameter);
}

TEST_CASE("corpus writer lays out files and a faithful manifest") {
  fs::path out = temp_dir("corpus");
  std::vector<std::pair<std::string, Image>> images = {
      {"img_a", random_image(12, 12, 100)},
      {"img_b", random_image(12, 12, 200)},
  };
  DistortionSpec noise;
  noise.family = Family::GaussianNoise;
  noise.levels = {25, 50};
  noise.variants_per_level = 2;
  noise.seed = 9;
  DistortionSpec blur;
  blur.family = Family::GaussianBlur;
  blur.levels = {1.5};
  blur.mask_sizes = {5, 7};

  auto manifest = write_corpus(images, {noise, blur}, out);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(fs::exists(out / "img_a" / "gaussian_noise" / "25" / "0.png"));
  CHECK(fs::exists(out / "img_a" / "gaussian_noise" / "50" / "1.png"));
  CHECK(fs::exists(out / "img_b" / "gaussian_blur" / "1.5" / "1.png"));
  CHECK(manifest["entries"].size() == 2 * (2 * 2 + 1 * 2));

  // Manifest seeds follow the derivation contract.
  const auto& e0 = manifest["entries"][0];
  CHECK(e0["image_id"] == "img_a");
  CHECK(e0["seed"].get<std::uint64_t>() == derive_seed(9, "img_a", 0, 0));

  // Loading a written PNG reproduces the in-memory variant bit-exactly.
  auto set = generate_distortion_set(images[0].second, "img_a", noise);
  Image reread = load_image(out / "img_a" / "gaussian_noise" / "25" / "0.png");
  CHECK(reread.pixels == set[0].image.pixels);

  // A second run is bit-identical, including hashes.
  fs::path out2 = temp_dir("corpus2");
  auto manifest2 = write_corpus(images, {noise, blur}, out2);
  CHECK(manifest["entries"] == manifest2["entries"]);
}

TEST_CASE("distortion spec json round trip") {
  DistortionSpec p;
  p.family = Family::Perspective;
  p.levels = {1, 2, 3};
  p.orientations = {Orientation::Top, Orientation::Left};
  auto j = spec_to_json(p);
  DistortionSpec q = spec_from_json(j);
  CHECK(q.family == Family::Perspective);
  CHECK(q.levels == p.levels);
  CHECK(q.orientations == p.orientations);

  nlohmann::json bad = {{"family", "gaussian_noise"}};
  CHECK(thrown_code([&] { spec_from_json(bad); }) == Err::Config);
}
