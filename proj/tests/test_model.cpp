#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "core/rng.hpp"
#include "doctest.h"
#include "model/synth.hpp"
#include "model/toy_model.hpp"

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

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Image img(h, w);
  SplitMix64 g(seed);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(g.next() & 0xff);
  return img;
}

ToyModel small_model(std::uint64_t seed = 5) {
  return make_toy_model(seed, 3, {4, 8}, 16, 16);
}

}  // namespace

TEST_CASE("model construction is deterministic and validated") {
  ToyModel a = make_toy_model(7, 3, {8, 16, 32});
  ToyModel b = make_toy_model(7, 3, {8, 16, 32});
  CHECK(a.conv[0].w == b.conv[0].w);
  CHECK(a.conv[2].w == b.conv[2].w);
  CHECK(a.fc_w == b.fc_w);
  ToyModel c = make_toy_model(8, 3, {8, 16, 32});
  CHECK(a.conv[0].w != c.conv[0].w);

  CHECK(thrown_code([] { make_toy_model(0, 3, {8}); }) == Err::InvalidParameter);
  CHECK(thrown_code([] { make_toy_model(0, 1, {8, 16}); }) == Err::InvalidParameter);
  CHECK(thrown_code([] { make_toy_model(0, 3, {8, 16}, 6, 6); }) == Err::InvalidParameter);
}

TEST_CASE("forward caches activations and normalizes softmax") {
  ToyModel m = small_model();
  Image img = random_image(16, 16, 1);
  ForwardCache cache = forward(m, img);
  REQUIRE(cache.activations.size() == 2);
  CHECK(cache.activations[0].channels == 4);
  CHECK(cache.activations[0].height == 16);
  CHECK(cache.activations[1].channels == 8);
  CHECK(cache.activations[1].height == 8);
  for (const auto& act : cache.activations)
    for (double v : act.data) REQUIRE(v >= 0.0);
  double s = 0.0;
  for (double v : cache.softmax) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(cache.score == cache.softmax[cache.label]);

  ForwardCache again = forward(m, img);
  CHECK(again.logits == cache.logits);
  CHECK(again.activations[1].data == cache.activations[1].data);

  CHECK(thrown_code([&] { forward(m, Image(8, 8)); }) == Err::ShapeMismatch);
}

TEST_CASE("all-zero weights tie every logit and break toward class 0") {
  ToyModel m = small_model();
  for (auto& layer : m.conv) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  std::fill(m.fc_w.begin(), m.fc_w.end(), 0.0);
  std::fill(m.fc_b.begin(), m.fc_b.end(), 0.0);
  ForwardCache cache = forward(m, random_image(16, 16, 2));
  for (double v : cache.logits) CHECK(v == 0.0);
  CHECK(cache.label == 0);
}

TEST_CASE("gradient matches central finite differences") {
  ToyModel m = small_model(11);
  Image img = random_image(16, 16, 3);
  ForwardCache cache = forward(m, img);
  const std::size_t cls = cache.label;
  const double h = 1e-4;

  for (std::size_t layer = 0; layer < 2; ++layer) {
    ActivationTensor grad = grad_wrt_activation(m, cache, cls, layer);
    const ActivationTensor& act = cache.activations[layer];
    REQUIRE(grad.data.size() == act.data.size());

    SplitMix64 pick(layer + 100);
    int checked = 0;
    for (int t = 0; t < 200 && checked < 40; ++t) {
      const std::size_t i = pick.next() % act.data.size();
      if (act.data[i] <= 0.0) continue;  // masked positions handled below
      ActivationTensor up = act, dn = act;
      up.data[i] += h;
      dn.data[i] -= h;
      const double f_up = logits_from_activation(m, layer, up)[cls];
      const double f_dn = logits_from_activation(m, layer, dn)[cls];
      const double fd = (f_up - f_dn) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(grad.data[i]), 1e-6});
      REQUIRE(std::abs(grad.data[i] - fd) / scale <= 1e-4);
      ++checked;
    }
    REQUIRE(checked == 40);

    for (std::size_t i = 0; i < act.data.size(); ++i)
      if (act.data[i] <= 0.0) REQUIRE(grad.data[i] == 0.0);
  }
}

TEST_CASE("zero head weights give a zero gradient") {
  ToyModel m = small_model();
  std::fill(m.fc_w.begin(), m.fc_w.end(), 0.0);
  ForwardCache cache = forward(m, random_image(16, 16, 4));
  for (std::size_t layer = 0; layer < 2; ++layer) {
    ActivationTensor grad = grad_wrt_activation(m, cache, 1, layer);
    for (double v : grad.data) REQUIRE(v == 0.0);
  }
}

TEST_CASE("grad_wrt_activation rejects bad indices") {
  ToyModel m = small_model();
  ForwardCache cache = forward(m, random_image(16, 16, 5));
  CHECK(thrown_code([&] { grad_wrt_activation(m, cache, 0, 2); }) == Err::InvalidLayer);
  CHECK(thrown_code([&] { grad_wrt_activation(m, cache, 9, 0); }) == Err::InvalidParameter);
  CHECK(thrown_code([&] { logits_from_activation(m, 7, cache.activations[0]); }) ==
        Err::InvalidLayer);
}

TEST_CASE("training with lr 0 leaves weights unchanged") {
  ToyModel m = make_toy_model(3, 3, {4, 8});
  auto data = synth_dataset(6, 1);
  ToyModel t = train(m, data, 2, 0.0, 9);
  CHECK(t.fc_w == m.fc_w);
  for (std::size_t l = 0; l < m.conv.size(); ++l) {
    CHECK(t.conv[l].w == m.conv[l].w);
    CHECK(t.conv[l].b == m.conv[l].b);
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  ToyModel m = make_toy_model(3, 3, {4, 8});
  auto data = synth_dataset(30, 2);
  std::vector<double> loss1, loss2;
  ToyModel t1 = train(m, data, 5, 0.05, 7, &loss1);
  ToyModel t2 = train(m, data, 5, 0.05, 7, &loss2);
  CHECK(t1.fc_w == t2.fc_w);
  CHECK(t1.conv[1].w == t2.conv[1].w);
  CHECK(loss1 == loss2);
  REQUIRE(loss1.size() == 5);
  CHECK(loss1.back() < loss1.front());

  CHECK(thrown_code([&] { train(m, {}, 1, 0.1, 0); }) == Err::EmptyDataset);
}

TEST_CASE("synth_dataset is reproducible with cycling labels") {
  auto a = synth_dataset(3, 42);
  auto b = synth_dataset(3, 42);
  REQUIRE(a.size() == 3);
  CHECK(a[0].label == 0);
  CHECK(a[1].label == 1);
  CHECK(a[2].label == 2);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a[i].image.pixels == b[i].image.pixels);
    CHECK(a[i].image.height == 64);
    CHECK(a[i].image.width == 64);
  }
  auto c = synth_dataset(3, 43);
  CHECK(a[0].image.pixels != c[0].image.pixels);

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& s : synth_dataset(300, 4)) ++counts[s.label];
  CHECK(counts[0] == 100);
  CHECK(counts[1] == 100);
  CHECK(counts[2] == 100);

  CHECK(thrown_code([] { synth_dataset(0, 1); }) == Err::InvalidParameter);
}

TEST_CASE("model serialization round-trips bit-exactly") {
  fs::path dir = fs::temp_directory_path() / "xstab_test_model" / "m1";
  fs::remove_all(dir);
  ToyModel m = make_toy_model(21, 3, {4, 8}, 16, 16);
  auto data = synth_dataset(6, 3);
  // A briefly trained model exercises nonzero biases too.
  std::vector<Sample> resized;
  for (auto& s : data) {
    Sample r;
    r.label = s.label;
    r.image = Image(16, 16);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        for (std::size_t c = 0; c < 3; ++c) r.image.at(y, x, c) = s.image.at(y * 4, x * 4, c);
    resized.push_back(std::move(r));
  }
  m = train(m, resized, 1, 0.05, 1);
  save_model(m, dir);
  CHECK(fs::exists(dir / "model.json"));
  CHECK(fs::exists(dir / "w_conv1.npy"));
  CHECK(fs::exists(dir / "b_conv2.npy"));
  CHECK(fs::exists(dir / "w_fc.npy"));

  ToyModel r = load_model(dir);
  CHECK(r.input_h == 16);
  CHECK(r.n_classes == 3);
  REQUIRE(r.conv.size() == 2);
  CHECK(r.conv[0].w == m.conv[0].w);
  CHECK(r.conv[1].b == m.conv[1].b);
  CHECK(r.fc_w == m.fc_w);
  CHECK(r.fc_b == m.fc_b);

  Image img = random_image(16, 16, 6);
  CHECK(forward(r, img).logits == forward(m, img).logits);

  CHECK(thrown_code([] { load_model(fs::temp_directory_path() / "no_such_model"); }) ==
        Err::Io);
  fs::path broken = fs::temp_directory_path() / "xstab_test_model" / "broken";
  fs::create_directories(broken);
  std::ofstream(broken / "model.json") << "{not json";
  CHECK(thrown_code([&] { load_model(broken); }) == Err::Format);
}
