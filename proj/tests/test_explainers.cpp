#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "core/rng.hpp"
#include "error.hpp"
#include "core/saliency_map.hpp"
#include "core/tensor.hpp"
#include "explain/explainers.hpp"
#include "model/toy_model.hpp"

using namespace xstab;

namespace {

ActivationTensor random_tensor(std::uint64_t seed, std::size_t c, std::size_t h, std::size_t w) {
  SplitMix64 rng(seed);
  ActivationTensor t(c, h, w);
  for (double& v : t.data) v = rng.next_open01() * 10.0;
  return t;
}

// Straight-line re-statement of the thresholding rule, kept deliberately naive.
struct NaiveFem {
  std::vector<std::uint8_t> binary;
  SaliencyMap map;
};

NaiveFem naive_fem(const ActivationTensor& act, double k) {
  const std::size_t n = act.height * act.width;
  NaiveFem out{std::vector<std::uint8_t>(act.channels * n, 0), SaliencyMap(act.height, act.width)};
  for (std::size_t c = 0; c < act.channels; ++c) {
    double mean = 0.0;
    for (std::size_t y = 0; y < act.height; ++y)
      for (std::size_t x = 0; x < act.width; ++x) mean += act.at(c, y, x);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t y = 0; y < act.height; ++y)
      for (std::size_t x = 0; x < act.width; ++x) {
        const double d = act.at(c, y, x) - mean;
        var += d * d;
      }
    const double sigma = std::sqrt(var / static_cast<double>(n));
    const double threshold = mean + k * sigma;
    for (std::size_t y = 0; y < act.height; ++y)
      for (std::size_t x = 0; x < act.width; ++x) {
        if (act.at(c, y, x) >= threshold) {
          out.binary[(c * act.height + y) * act.width + x] = 1;
          out.map.at(y, x) += mean;
        }
      }
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : out.map.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double& v : out.map.data) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return out;
}

ActivationTensor worked_example() {
  // Channel 0 rises to 5 in one corner; channel 1 is flat.
  ActivationTensor act(2, 2, 2);
  act.data = {1, 1, 1, 5, 2, 2, 2, 2};
  return act;
}

}  // namespace

TEST_CASE("fem channel stats use the population deviation") {
  const auto stats = fem_channel_stats(worked_example());
  REQUIRE(stats.size() == 2);
  CHECK(stats[0].first == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(stats[0].second == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(stats[1].first == 2.0);
  CHECK(stats[1].second == 0.0);
}

TEST_CASE("fem worked example marks the outlier and every flat cell") {
  const ActivationTensor act = worked_example();
  const auto bin = fem_binary_maps(act, FemParams{});
  CHECK(bin == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 1, 1, 1});
  const SaliencyMap m = fem(act, FemParams{}, 2, 2);
  CHECK(m.data == std::vector<double>{0.0, 0.0, 0.0, 1.0});
}

TEST_CASE("fem flat tensor yields the all-zero map") {
  ActivationTensor act(3, 2, 2);
  for (double& v : act.data) v = 4.5;
  const SaliencyMap m = fem(act, FemParams{}, 2, 2);
  for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("fem zero multiplier thresholds at the mean") {
  ActivationTensor act(1, 1, 4);
  act.data = {1, 2, 3, 4};  // mean 2.5
  const auto bin = fem_binary_maps(act, FemParams{0.0});
  CHECK(bin == std::vector<std::uint8_t>{0, 0, 1, 1});
}

TEST_CASE("fem matches the naive restatement on random tensors") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ActivationTensor act = random_tensor(900 + seed, 8, 4, 4);
    const NaiveFem ref = naive_fem(act, 1.0);
    CHECK(fem_binary_maps(act, FemParams{}) == ref.binary);
    const SaliencyMap m = fem(act, FemParams{}, 4, 4);
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      CHECK(std::abs(m.data[i] - ref.map.data[i]) <= 1e-12);
    }
  }
}

TEST_CASE("fem is invariant under positive rescaling of the activations") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ActivationTensor act = random_tensor(7000 + seed, 6, 5, 5);
    const auto base_bin = fem_binary_maps(act, FemParams{});
    const SaliencyMap base = fem(act, FemParams{}, 5, 5);
    for (double lambda : {0.5, 3.0, 100.0}) {
      ActivationTensor scaled = act;
      for (double& v : scaled.data) v *= lambda;
      CHECK(fem_binary_maps(scaled, FemParams{}) == base_bin);
      const SaliencyMap m = fem(scaled, FemParams{}, 5, 5);
      if (lambda == 0.5) {
        CHECK(m.data == base.data);  // power-of-two scaling is exact
      } else {
        for (std::size_t i = 0; i < m.data.size(); ++i) {
          CHECK(std::abs(m.data[i] - base.data[i]) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("fem resizes after normalizing") {
  const ActivationTensor act = random_tensor(321, 4, 4, 4);
  const NaiveFem ref = naive_fem(act, 1.0);
  const SaliencyMap expect = resize_bilinear(ref.map, 8, 8);
  const SaliencyMap got = fem(act, FemParams{}, 8, 8);
  REQUIRE(got.height == 8);
  REQUIRE(got.width == 8);
  for (std::size_t i = 0; i < got.data.size(); ++i) {
    CHECK(std::abs(got.data[i] - expect.data[i]) <= 1e-12);
  }
}

TEST_CASE("fem rejects invalid multipliers and non-finite activations") {
  const ActivationTensor act = worked_example();
  CHECK_THROWS_AS(fem(act, FemParams{-1.0}, 2, 2), Error);
  ActivationTensor bad = act;
  bad.data[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fem(bad, FemParams{}, 2, 2), Error);
}

TEST_CASE("gradcam zero gradient yields the all-zero map") {
  const ActivationTensor act = random_tensor(11, 3, 4, 4);
  const ActivationTensor grad(3, 4, 4);
  const SaliencyMap m = gradcam(act, grad, 4, 4);
  for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("gradcam unit gradient on one channel reduces to the normalized activation") {
  SplitMix64 rng(55);
  ActivationTensor act(1, 3, 3);
  for (double& v : act.data) v = rng.next_open01() * 4.0;  // non-negative
  ActivationTensor grad(1, 3, 3);
  for (double& v : grad.data) v = 1.0;
  const SaliencyMap m = gradcam(act, grad, 3, 3);
  SaliencyMap expect(3, 3);
  expect.data = act.data;
  expect = minmax_normalize(expect);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    CHECK(m.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-14));
  }
}

TEST_CASE("gradcam clips the negatively weighted channel") {
  ActivationTensor act(2, 2, 2);
  act.data = {4, 0, 0, 0, 0, 2, 0, 0};
  ActivationTensor grad(2, 2, 2);
  grad.data = {1, 1, 1, 1, -1, -1, -1, -1};
  const SaliencyMap m = gradcam(act, grad, 2, 2);
  CHECK(m.data == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("gradcam rejects mismatched shapes") {
  CHECK_THROWS_AS(gradcam(random_tensor(1, 2, 3, 3), random_tensor(2, 2, 3, 4), 3, 3), Error);
}

TEST_CASE("layer maps follow the cached activations in depth order") {
  const ToyModel model = make_toy_model(5, 3, {4, 8}, 16, 16);
  SplitMix64 rng(77);
  Image img(16, 16);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next() % 256);
  const ForwardCache cache = forward(model, img);
  const auto maps = mlfem_layer_maps(cache, FemParams{}, 16, 16);
  REQUIRE(maps.size() == cache.activations.size());
  for (std::size_t l = 0; l < maps.size(); ++l) {
    const SaliencyMap expect = fem(cache.activations[l], FemParams{}, 16, 16);
    CHECK(maps[l].data == expect.data);
  }
  CHECK_THROWS_AS(mlfem_layer_maps(ForwardCache{}, FemParams{}, 16, 16), Error);
}

namespace {

SaliencyMap map2x2(double a, double b, double c, double d) {
  SaliencyMap m(2, 2);
  m.data = {a, b, c, d};
  return m;
}

}  // namespace

TEST_CASE("fusion recovers the mixing weights of a constructed reference") {
  const SaliencyMap m0 = map2x2(1, 0, 1, 0);
  const SaliencyMap m1 = map2x2(0, 1, 1, 0);
  const SaliencyMap ref = map2x2(0.25, 0.75, 1.0, 0.0);
  std::vector<double> trace;
  const FusionWeights w = fit_fusion_weights({{m0, m1}}, {ref}, &trace);
  REQUIRE(w.w.size() == 2);
  CHECK(std::abs(w.w[0] - 0.25) <= 1e-6);
  CHECK(std::abs(w.w[1] - 0.75) <= 1e-6);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] <= trace[i - 1] + 1e-12 * std::max(1.0, std::abs(trace[i - 1])));
  }
  CHECK(trace.back() <= 1e-10);
}

TEST_CASE("fusion of a single matching layer yields unit weight") {
  const SaliencyMap m = map2x2(0.2, 0.9, 0.4, 0.1);
  const FusionWeights w = fit_fusion_weights({{m}}, {m});
  REQUIRE(w.w.size() == 1);
  CHECK(std::abs(w.w[0] - 1.0) <= 1e-6);
}

TEST_CASE("fusion falls back to uniform weights when the fit collapses") {
  const SaliencyMap m0 = map2x2(1, 0, 0, 0);
  const SaliencyMap m1 = map2x2(0, 1, 0, 0);
  const SaliencyMap ref = map2x2(0, 0, 0, 1);  // orthogonal to both layers
  const FusionWeights w = fit_fusion_weights({{m0, m1}}, {ref});
  CHECK(w.w == std::vector<double>{0.5, 0.5});

  // All-zero layer maps leave nothing to fit either.
  const SaliencyMap z = map2x2(0, 0, 0, 0);
  const FusionWeights wz = fit_fusion_weights({{z, z}}, {ref});
  CHECK(wz.w == std::vector<double>{0.5, 0.5});
}

TEST_CASE("fusion accumulates the fit over several images") {
  const SaliencyMap a0 = map2x2(1, 0, 0, 0);
  const SaliencyMap a1 = map2x2(0, 1, 0, 0);
  const SaliencyMap b0 = map2x2(0, 0, 1, 0);
  const SaliencyMap b1 = map2x2(0, 0, 0, 1);
  const SaliencyMap ref_a = map2x2(0.6, 0.4, 0, 0);
  const SaliencyMap ref_b = map2x2(0, 0, 0.6, 0.4);
  const FusionWeights w = fit_fusion_weights({{a0, a1}, {b0, b1}}, {ref_a, ref_b});
  CHECK(std::abs(w.w[0] - 0.6) <= 1e-6);
  CHECK(std::abs(w.w[1] - 0.4) <= 1e-6);
}

TEST_CASE("fusion validates its inputs") {
  const SaliencyMap m = map2x2(1, 0, 0, 0);
  CHECK_THROWS_AS(fit_fusion_weights({}, {}), Error);
  CHECK_THROWS_AS(fit_fusion_weights({{m}}, {m, m}), Error);
  CHECK_THROWS_AS(fit_fusion_weights({{m}, {m, m}}, {m, m}), Error);
  SaliencyMap wide(2, 3);
  CHECK_THROWS_AS(fit_fusion_weights({{wide}}, {m}), Error);
}

TEST_CASE("mlfem blends layer maps with the fitted weights") {
  const SaliencyMap m0 = map2x2(1, 0, 1, 0);
  const SaliencyMap m1 = map2x2(0, 1, 1, 0);
  FusionWeights w;
  w.w = {0.25, 0.75};
  const SaliencyMap m = mlfem({m0, m1}, w);
  CHECK(m.data == std::vector<double>{0.25, 0.75, 1.0, 0.0});
}

TEST_CASE("mlfem rejects inconsistent inputs") {
  const SaliencyMap m = map2x2(1, 0, 0, 0);
  FusionWeights w;
  w.w = {1.0};
  CHECK_THROWS_AS(mlfem({}, w), Error);
  CHECK_THROWS_AS(mlfem({m, m}, w), Error);
  SaliencyMap wide(2, 3);
  w.w = {0.5, 0.5};
  CHECK_THROWS_AS(mlfem({m, wide}, w), Error);
}
