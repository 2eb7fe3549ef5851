#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "core/rng.hpp"
#include "doctest.h"
#include "metrics/metrics.hpp"

using namespace xstab;

namespace {

SaliencyMap map_of(std::size_t h, std::size_t w, std::vector<double> v) {
  SaliencyMap m(h, w);
  m.data = std::move(v);
  return m;
}

// Deliberately naive transcriptions used as oracles: double loops, textbook
// formulas, no shared code with the library implementations.
double naive_pcc(const SaliencyMap& x, const SaliencyMap& y) {
  double mx = 0, my = 0;
  for (std::size_t u = 0; u < x.height; ++u)
    for (std::size_t v = 0; v < x.width; ++v) {
      mx += x.at(u, v);
      my += y.at(u, v);
    }
  const double n = static_cast<double>(x.size());
  mx /= n;
  my /= n;
  double num = 0, dx = 0, dy = 0;
  for (std::size_t u = 0; u < x.height; ++u)
    for (std::size_t v = 0; v < x.width; ++v) {
      num += (x.at(u, v) - mx) * (y.at(u, v) - my);
      dx += (x.at(u, v) - mx) * (x.at(u, v) - mx);
      dy += (y.at(u, v) - my) * (y.at(u, v) - my);
    }
  return num / (std::sqrt(dx) * std::sqrt(dy));
}

double naive_sim(const SaliencyMap& x, const SaliencyMap& y) {
  double sx = 0, sy = 0;
  for (std::size_t u = 0; u < x.height; ++u)
    for (std::size_t v = 0; v < x.width; ++v) {
      sx += x.at(u, v);
      sy += y.at(u, v);
    }
  double s = 0;
  for (std::size_t u = 0; u < x.height; ++u)
    for (std::size_t v = 0; v < x.width; ++v)
      s += std::min(x.at(u, v) / sx, y.at(u, v) / sy);
  return s;
}

Err thrown_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Err::Io;
}

}  // namespace

TEST_CASE("pcc on hand-checked pairs") {
  auto m = map_of(2, 2, {1, 5, 2, 7});
  CHECK(pcc(m, m) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pcc(map_of(1, 2, {1, 2}), map_of(1, 2, {2, 1})) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pcc(map_of(1, 3, {1, 2, 3}), map_of(1, 3, {1, 3, 2})) ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("pcc is symmetric and affine-invariant") {
  SplitMix64 g(3);
  SaliencyMap a(4, 4), b(4, 4);
  for (auto& v : a.data) v = g.next_open01();
  for (auto& v : b.data) v = g.next_open01();
  CHECK(pcc(a, b) == doctest::Approx(pcc(b, a)).epsilon(1e-15));
  SaliencyMap a2 = a;
  for (auto& v : a2.data) v = 3.5 * v + 11.0;
  CHECK(pcc(a2, b) == doctest::Approx(pcc(a, b)).epsilon(1e-12));
  CHECK(pcc(a, b) >= -1.0);
  CHECK(pcc(a, b) <= 1.0);
}

TEST_CASE("pcc error cases") {
  CHECK(thrown_code([] { pcc(map_of(1, 2, {1, 2}), map_of(2, 1, {1, 2})); }) ==
        Err::ShapeMismatch);
  CHECK(thrown_code([] { pcc(map_of(1, 2, {3, 3}), map_of(1, 2, {1, 2})); }) ==
        Err::ZeroVariance);
  CHECK(thrown_code([] { pcc(map_of(1, 2, {1, 2}), map_of(1, 2, {4, 4})); }) ==
        Err::ZeroVariance);
}

TEST_CASE("sim on hand-checked pairs") {
  auto m = map_of(2, 2, {0.1, 0.2, 0.3, 0.4});
  CHECK(sim(m, m) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sim(map_of(1, 2, {1, 0}), map_of(1, 2, {0, 1})) == 0.0);
  CHECK(sim(map_of(1, 2, {0.7, 0.3}), map_of(1, 2, {0.4, 0.6})) ==
        doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("sim is symmetric, normalized internally, in [0,1]") {
  auto a = map_of(2, 2, {1, 2, 3, 4});
  auto b = map_of(2, 2, {4, 0, 1, 5});
  CHECK(sim(a, b) == doctest::Approx(sim(b, a)).epsilon(1e-15));
  auto a_scaled = map_of(2, 2, {10, 20, 30, 40});
  CHECK(sim(a_scaled, b) == doctest::Approx(sim(a, b)).epsilon(1e-12));
  CHECK(sim(a, b) >= 0.0);
  CHECK(sim(a, b) <= 1.0);
}

TEST_CASE("sim error cases") {
  CHECK(thrown_code([] { sim(map_of(1, 2, {1, 0}), map_of(2, 1, {1, 0})); }) ==
        Err::ShapeMismatch);
  CHECK(thrown_code([] { sim(map_of(1, 2, {0, 0}), map_of(1, 2, {1, 0})); }) == Err::ZeroMass);
  CHECK(thrown_code([] { sim(map_of(1, 2, {1, -1}), map_of(1, 2, {1, 0})); }) ==
        Err::NegativeValue);
}

TEST_CASE("image_distance hand-checked cases") {
  Image x(2, 2, 100);
  CHECK(image_distance(x, x) == 0.0);
  Image y = x;
  y.at(1, 0, 2) = 103;
  CHECK(image_distance(x, y) == doctest::Approx(3.0).epsilon(1e-15));
  Image z = x;
  z.at(0, 1, 0) = 103;
  z.at(0, 1, 1) = 104;
  CHECK(image_distance(x, z) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(thrown_code([&] { image_distance(x, Image(2, 3)); }) == Err::ShapeMismatch);
}

TEST_CASE("map_distance hand-checked and triangle inequality") {
  CHECK(map_distance(map_of(1, 2, {0, 0}), map_of(1, 2, {3, 4})) ==
        doctest::Approx(5.0).epsilon(1e-15));
  SplitMix64 g(8);
  for (int t = 0; t < 20; ++t) {
    SaliencyMap a(3, 3), b(3, 3), c(3, 3);
    for (auto& v : a.data) v = g.next_open01() * 4 - 2;
    for (auto& v : b.data) v = g.next_open01() * 4 - 2;
    for (auto& v : c.data) v = g.next_open01() * 4 - 2;
    CHECK(map_distance(a, c) <= map_distance(a, b) + map_distance(b, c) + 1e-12);
  }
}

TEST_CASE("lipschitz_ratio hand-checked instance") {
  Image x(1, 1, 10);
  Image xp = x;
  xp.at(0, 0, 0) = 13;  // distance 3
  auto e = map_of(1, 1, {0.0});
  auto ep = map_of(1, 1, {6.0});  // distance 6
  CHECK(lipschitz_ratio(x, xp, e, ep) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(lipschitz_ratio(x, xp, e, e) == 0.0);
  CHECK(thrown_code([&] { lipschitz_ratio(x, x, e, ep); }) == Err::IdenticalInputs);
}

TEST_CASE("lipschitz_at_level takes the max, skips identical variants") {
  Image x(1, 1, 10);
  Image xp = x;
  xp.at(0, 0, 0) = 12;  // distance 2
  auto e = map_of(1, 1, {0.0});
  auto m1 = map_of(1, 1, {1.0});   // ratio 0.5
  auto m2 = map_of(1, 1, {4.0});   // ratio 2.0
  auto m3 = map_of(1, 1, {2.0});   // ratio 1.0
  std::vector<std::pair<const Image*, const SaliencyMap*>> vs = {
      {&xp, &m1}, {&xp, &m2}, {&xp, &m3}};
  CHECK(lipschitz_at_level(x, e, vs) == doctest::Approx(2.0).epsilon(1e-15));

  std::vector<std::pair<const Image*, const SaliencyMap*>> one = {{&xp, &m3}};
  CHECK(lipschitz_at_level(x, e, one) == doctest::Approx(1.0).epsilon(1e-15));

  std::size_t skipped = 0;
  std::vector<std::pair<const Image*, const SaliencyMap*>> with_dup = {
      {&x, &m2}, {&xp, &m1}};
  CHECK(lipschitz_at_level(x, e, with_dup, &skipped) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(skipped == 1);

  std::vector<std::pair<const Image*, const SaliencyMap*>> all_dup = {{&x, &m1}, {&x, &m2}};
  CHECK(thrown_code([&] { lipschitz_at_level(x, e, all_dup); }) == Err::NoValidVariants);
}

TEST_CASE("constant-map explainer gives zero lipschitz at any level") {
  Image x(2, 2, 50);
  Image xp(2, 2, 60);
  auto e = map_of(2, 2, {0.5, 0.5, 0.5, 0.5});
  std::vector<std::pair<const Image*, const SaliencyMap*>> vs = {{&xp, &e}};
  CHECK(lipschitz_at_level(x, e, vs) == 0.0);
}

TEST_CASE("theoretical_radius formula") {
  CHECK(theoretical_radius(1, 1, 3, 255.0) == doctest::Approx(255.0 * std::sqrt(3.0)).epsilon(1e-15));
  CHECK(theoretical_radius(8, 8, 3, 0.0) == 0.0);
  CHECK(theoretical_radius(16, 16, 3, 100.0) ==
        doctest::Approx(2.0 * theoretical_radius(8, 8, 3, 100.0)).epsilon(1e-12));
  CHECK(thrown_code([] { theoretical_radius(0, 4, 3, 1.0); }) == Err::InvalidParameter);
  CHECK(thrown_code([] { theoretical_radius(4, 4, 3, -1.0); }) == Err::InvalidParameter);
}

TEST_CASE("stability_series hand-checked") {
  auto s = stability_series({10.0, 9.0});
  REQUIRE(s.size() == 1);
  CHECK(s[0] == doctest::Approx(10.0).epsilon(1e-15));

  auto flat = stability_series({4.2, 4.2, 4.2});
  CHECK(flat == std::vector<double>{0.0, 0.0});

  auto zeros = stability_series({0.0, 0.0, 0.0});
  CHECK(zeros == std::vector<double>{0.0, 0.0});

  CHECK(thrown_code([] { stability_series({0.0, 1.0}); }) == Err::ZeroBaseline);
  CHECK(thrown_code([] { stability_series({7.0}); }) == Err::InvalidParameter);
}

TEST_CASE("consensus hand-checked") {
  std::vector<double> a = {1, 2, 4, 3};
  CHECK(consensus(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> na = {-1, -2, -4, -3};
  CHECK(consensus(a, na) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(thrown_code([&] { consensus(a, {1, 2}); }) == Err::LengthMismatch);
  CHECK(thrown_code([&] { consensus({1, 1, 1}, {1, 2, 3}); }) == Err::ZeroVariance);
  CHECK(thrown_code([&] { consensus({1}, {2}); }) == Err::InvalidParameter);
}

TEST_CASE("pcc and sim agree with brute-force oracles on random maps") {
  SplitMix64 g(20240613);
  for (int t = 0; t < 50; ++t) {
    SaliencyMap a(8, 8), b(8, 8);
    for (auto& v : a.data) v = g.next_open01();
    for (auto& v : b.data) v = g.next_open01();
    CHECK(std::abs(pcc(a, b) - naive_pcc(a, b)) <= 1e-12);
    CHECK(std::abs(sim(a, b) - naive_sim(a, b)) <= 1e-12);
  }
}
