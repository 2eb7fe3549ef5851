#include "model/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "core/npy.hpp"
#include "core/rng.hpp"
#include "json.hpp"

namespace xstab {

namespace {

constexpr std::size_t kPoolWin = 2;

void conv3x3(const ConvLayer& layer, const ActivationTensor& in, ActivationTensor& out) {
  const std::size_t h = in.height, w = in.width;
  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = layer.b[o];
        for (std::size_t i = 0; i < layer.in_ch; ++i) {
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += layer.wt(o, i, ky, kx) *
                     in.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
        }
        out.at(o, y, x) = acc;
      }
    }
  }
}

// 2x2 stride-2 max-pool; ties pick the first cell in row-major window order.
void maxpool(const ActivationTensor& in, ActivationTensor& out,
             std::vector<std::size_t>& argmax) {
  const std::size_t oh = in.height / kPoolWin, ow = in.width / kPoolWin;
  argmax.assign(in.channels * oh * ow, 0);
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t dy = 0; dy < kPoolWin; ++dy) {
          for (std::size_t dx = 0; dx < kPoolWin; ++dx) {
            const std::size_t sy = y * kPoolWin + dy, sx = x * kPoolWin + dx;
            const double v = in.at(c, sy, sx);
            if (v > best) {
              best = v;
              best_idx = (c * in.height + sy) * in.width + sx;
            }
          }
        }
        out.at(c, y, x) = best;
        argmax[(c * oh + y) * ow + x] = best_idx;
      }
    }
  }
}

// Gradient w.r.t. conv input given gradient w.r.t. conv (pre-ReLU) output.
void conv3x3_backward_input(const ConvLayer& layer, const ActivationTensor& gout,
                            ActivationTensor& gin) {
  const std::size_t h = gout.height, w = gout.width;
  std::fill(gin.data.begin(), gin.data.end(), 0.0);
  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double g = gout.at(o, y, x);
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < layer.in_ch; ++i) {
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              gin.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) +=
                  layer.wt(o, i, ky, kx) * g;
            }
          }
        }
      }
    }
  }
}

void conv3x3_backward_weights(const ConvLayer& layer, const ActivationTensor& in,
                              const ActivationTensor& gout, std::vector<double>& gw,
                              std::vector<double>& gb) {
  const std::size_t h = gout.height, w = gout.width;
  for (std::size_t o = 0; o < layer.out_ch; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double g = gout.at(o, y, x);
        if (g == 0.0) continue;
        gb[o] += g;
        for (std::size_t i = 0; i < layer.in_ch; ++i) {
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
              if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
              gw[((o * layer.in_ch + i) * 3 + ky) * 3 + kx] +=
                  g * in.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
          }
        }
      }
    }
  }
}

void unpool(const ActivationTensor& gpooled, const std::vector<std::size_t>& argmax,
            ActivationTensor& gact) {
  std::fill(gact.data.begin(), gact.data.end(), 0.0);
  for (std::size_t i = 0; i < gpooled.data.size(); ++i)
    gact.data[argmax[i]] += gpooled.data[i];
}

std::vector<double> softmax_of(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

// Shared forward over conv blocks starting from `input` at block `first`.
void run_blocks(const ToyModel& m, std::size_t first, const ActivationTensor& input,
                ForwardCache& cache) {
  const ActivationTensor* cur = &input;
  for (std::size_t l = first; l < m.conv.size(); ++l) {
    const ConvLayer& layer = m.conv[l];
    ActivationTensor z(layer.out_ch, cur->height, cur->width);
    conv3x3(layer, *cur, z);
    for (double& v : z.data) v = std::max(v, 0.0);
    cache.activations.push_back(std::move(z));
    const ActivationTensor& act = cache.activations.back();
    if (layer.pool) {
      if (act.height % kPoolWin != 0 || act.width % kPoolWin != 0)
        fail(Err::ShapeMismatch, "activation size not divisible by the pool window");
      ActivationTensor p(layer.out_ch, act.height / kPoolWin, act.width / kPoolWin);
      std::vector<std::size_t> amax;
      maxpool(act, p, amax);
      cache.pooled.push_back(std::move(p));
      cache.pool_argmax.push_back(std::move(amax));
    } else {
      cache.pooled.push_back(act);
      cache.pool_argmax.emplace_back();
    }
    cur = &cache.pooled.back();
  }
}

void run_head(const ToyModel& m, ForwardCache& cache) {
  const ActivationTensor& last = cache.pooled.back();
  const double inv_n = 1.0 / static_cast<double>(last.height * last.width);
  cache.features.assign(last.channels, 0.0);
  for (std::size_t c = 0; c < last.channels; ++c) {
    double s = 0.0;
    for (std::size_t y = 0; y < last.height; ++y)
      for (std::size_t x = 0; x < last.width; ++x) s += last.at(c, y, x);
    cache.features[c] = s * inv_n;
  }
  cache.logits.assign(m.n_classes, 0.0);
  for (std::size_t k = 0; k < m.n_classes; ++k) {
    double s = m.fc_b[k];
    for (std::size_t c = 0; c < cache.features.size(); ++c)
      s += m.fc_w[k * cache.features.size() + c] * cache.features[c];
    cache.logits[k] = s;
  }
  cache.softmax = softmax_of(cache.logits);
  cache.label = 0;
  for (std::size_t k = 1; k < m.n_classes; ++k)
    if (cache.logits[k] > cache.logits[cache.label]) cache.label = k;
  cache.score = cache.softmax[cache.label];
}

}  // namespace

ToyModel make_toy_model(std::uint64_t seed, std::size_t n_classes,
                        const std::vector<std::size_t>& channels, std::size_t input_h,
                        std::size_t input_w) {
  if (channels.size() < 2) fail(Err::InvalidParameter, "model needs at least two conv blocks");
  if (n_classes < 2) fail(Err::InvalidParameter, "model needs at least two classes");
  std::size_t h = input_h, w = input_w;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (h % kPoolWin != 0 || w % kPoolWin != 0)
      fail(Err::InvalidParameter, "input size must be divisible by 2 at every pool");
    h /= kPoolWin;
    w /= kPoolWin;
  }

  ToyModel m;
  m.input_h = input_h;
  m.input_w = input_w;
  m.n_classes = n_classes;
  m.init_seed = seed;
  SplitMix64 rng(seed);
  auto gauss = [&rng](double stddev) { return stddev * normal_quantile(rng.next_open01()); };

  std::size_t in_ch = 3;
  for (std::size_t out_ch : channels) {
    ConvLayer layer;
    layer.in_ch = in_ch;
    layer.out_ch = out_ch;
    layer.w.resize(out_ch * in_ch * 9);
    layer.b.assign(out_ch, 0.0);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in_ch * 9));
    for (double& v : layer.w) v = gauss(std_dev);
    m.conv.push_back(std::move(layer));
    in_ch = out_ch;
  }
  m.fc_w.resize(n_classes * in_ch);
  m.fc_b.assign(n_classes, 0.0);
  const double fc_std = std::sqrt(2.0 / static_cast<double>(in_ch));
  for (double& v : m.fc_w) v = gauss(fc_std);
  return m;
}

ActivationTensor image_to_tensor(const Image& img) {
  ActivationTensor t(3, img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        t.at(c, y, x) = static_cast<double>(img.at(y, x, c)) / 255.0;
  return t;
}

ForwardCache forward(const ToyModel& m, const Image& img) {
  if (img.height != m.input_h || img.width != m.input_w)
    fail(Err::ShapeMismatch, "forward: image does not match the model input size");
  ForwardCache cache;
  run_blocks(m, 0, image_to_tensor(img), cache);
  run_head(m, cache);
  return cache;
}

std::vector<double> logits_from_activation(const ToyModel& m, std::size_t layer,
                                           const ActivationTensor& act) {
  if (layer >= m.conv.size()) fail(Err::InvalidLayer, "logits_from_activation: no such layer");
  ForwardCache cache;
  // Seed the cache with `act` standing in for the given layer's activation.
  cache.activations.push_back(act);
  const ConvLayer& lay = m.conv[layer];
  if (lay.pool) {
    ActivationTensor p(act.channels, act.height / kPoolWin, act.width / kPoolWin);
    std::vector<std::size_t> amax;
    maxpool(act, p, amax);
    cache.pooled.push_back(std::move(p));
    cache.pool_argmax.push_back(std::move(amax));
  } else {
    cache.pooled.push_back(act);
    cache.pool_argmax.emplace_back();
  }
  run_blocks(m, layer + 1, cache.pooled.back(), cache);
  run_head(m, cache);
  return cache.logits;
}

ActivationTensor grad_wrt_activation(const ToyModel& m, const ForwardCache& cache,
                                     std::size_t cls, std::size_t layer) {
  if (layer >= m.conv.size()) fail(Err::InvalidLayer, "grad_wrt_activation: no such layer");
  if (cls >= m.n_classes) fail(Err::InvalidParameter, "grad_wrt_activation: no such class");
  if (cache.activations.size() != m.conv.size())
    fail(Err::ShapeMismatch, "grad_wrt_activation: cache does not match the model");

  // d logit / d pooled(last): fc weight spread uniformly by the average pool.
  const ActivationTensor& plast = cache.pooled.back();
  ActivationTensor gpooled(plast.channels, plast.height, plast.width);
  const double inv_n = 1.0 / static_cast<double>(plast.height * plast.width);
  for (std::size_t c = 0; c < plast.channels; ++c) {
    const double g = m.fc_w[cls * plast.channels + c] * inv_n;
    for (std::size_t y = 0; y < plast.height; ++y)
      for (std::size_t x = 0; x < plast.width; ++x) gpooled.at(c, y, x) = g;
  }

  for (std::size_t l = m.conv.size(); l-- > layer + 1;) {
    const ActivationTensor& act = cache.activations[l];
    ActivationTensor gact(act.channels, act.height, act.width);
    if (m.conv[l].pool)
      unpool(gpooled, cache.pool_argmax[l], gact);
    else
      gact = gpooled;
    // This layer's ReLU gate, then through its conv onto the layer below.
    for (std::size_t i = 0; i < gact.data.size(); ++i)
      if (act.data[i] <= 0.0) gact.data[i] = 0.0;
    const ActivationTensor& below = cache.pooled[l - 1];
    ActivationTensor gin(below.channels, below.height, below.width);
    conv3x3_backward_input(m.conv[l], gact, gin);
    gpooled = std::move(gin);
  }

  const ActivationTensor& act = cache.activations[layer];
  ActivationTensor grad(act.channels, act.height, act.width);
  if (m.conv[layer].pool)
    unpool(gpooled, cache.pool_argmax[layer], grad);
  else
    grad = gpooled;
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (act.data[i] <= 0.0) grad.data[i] = 0.0;
  return grad;
}

ToyModel train(const ToyModel& model, const std::vector<Sample>& dataset, std::size_t epochs,
               double lr, std::uint64_t seed, std::vector<double>* epoch_loss) {
  if (dataset.empty()) fail(Err::EmptyDataset, "train: empty dataset");
  for (const Sample& s : dataset)
    if (s.label >= model.n_classes) fail(Err::InvalidParameter, "train: label out of range");
  ToyModel m = model;
  if (epoch_loss) epoch_loss->clear();

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t e = 0; e < epochs; ++e) {
    SplitMix64 shuffle_rng(mix_seed(seed, e));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.next() % i]);

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Sample& s = dataset[idx];
      ForwardCache cache = forward(m, s.image);
      loss_sum += -std::log(std::max(cache.softmax[s.label], 1e-300));

      // d loss / d logit = softmax - onehot.
      std::vector<double> dlogit = cache.softmax;
      dlogit[s.label] -= 1.0;

      const std::size_t feat_n = cache.features.size();
      std::vector<double> dfeat(feat_n, 0.0);
      std::vector<double> dfc_w(m.fc_w.size(), 0.0), dfc_b(m.n_classes, 0.0);
      for (std::size_t k = 0; k < m.n_classes; ++k) {
        dfc_b[k] = dlogit[k];
        for (std::size_t c = 0; c < feat_n; ++c) {
          dfc_w[k * feat_n + c] = dlogit[k] * cache.features[c];
          dfeat[c] += m.fc_w[k * feat_n + c] * dlogit[k];
        }
      }

      const ActivationTensor& plast = cache.pooled.back();
      ActivationTensor gpooled(plast.channels, plast.height, plast.width);
      const double inv_n = 1.0 / static_cast<double>(plast.height * plast.width);
      for (std::size_t c = 0; c < plast.channels; ++c)
        for (std::size_t y = 0; y < plast.height; ++y)
          for (std::size_t x = 0; x < plast.width; ++x)
            gpooled.at(c, y, x) = dfeat[c] * inv_n;

      const ActivationTensor input = image_to_tensor(s.image);
      std::vector<std::vector<double>> gws(m.conv.size()), gbs(m.conv.size());
      for (std::size_t l = m.conv.size(); l-- > 0;) {
        const ActivationTensor& act = cache.activations[l];
        ActivationTensor gact(act.channels, act.height, act.width);
        if (m.conv[l].pool)
          unpool(gpooled, cache.pool_argmax[l], gact);
        else
          gact = gpooled;
        for (std::size_t i = 0; i < gact.data.size(); ++i)
          if (act.data[i] <= 0.0) gact.data[i] = 0.0;

        const ActivationTensor& below = (l == 0) ? input : cache.pooled[l - 1];
        gws[l].assign(m.conv[l].w.size(), 0.0);
        gbs[l].assign(m.conv[l].b.size(), 0.0);
        conv3x3_backward_weights(m.conv[l], below, gact, gws[l], gbs[l]);
        if (l > 0) {
          ActivationTensor gin(below.channels, below.height, below.width);
          conv3x3_backward_input(m.conv[l], gact, gin);
          gpooled = std::move(gin);
        }
      }

      for (std::size_t i = 0; i < m.fc_w.size(); ++i) m.fc_w[i] -= lr * dfc_w[i];
      for (std::size_t i = 0; i < m.fc_b.size(); ++i) m.fc_b[i] -= lr * dfc_b[i];
      for (std::size_t l = 0; l < m.conv.size(); ++l) {
        for (std::size_t i = 0; i < m.conv[l].w.size(); ++i) m.conv[l].w[i] -= lr * gws[l][i];
        for (std::size_t i = 0; i < m.conv[l].b.size(); ++i) m.conv[l].b[i] -= lr * gbs[l][i];
      }
    }
    if (epoch_loss) epoch_loss->push_back(loss_sum / static_cast<double>(dataset.size()));
  }
  return m;
}

void save_model(const ToyModel& m, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["input"] = {m.input_h, m.input_w};
  j["n_classes"] = m.n_classes;
  j["init_seed"] = m.init_seed;
  j["layers"] = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < m.conv.size(); ++l) {
    nlohmann::ordered_json lj;
    lj["name"] = "conv" + std::to_string(l + 1);
    lj["in_ch"] = m.conv[l].in_ch;
    lj["out_ch"] = m.conv[l].out_ch;
    lj["pool"] = m.conv[l].pool;
    j["layers"].push_back(lj);
    save_npy(dir / ("w_conv" + std::to_string(l + 1) + ".npy"),
             {m.conv[l].out_ch, m.conv[l].in_ch, 3, 3}, m.conv[l].w);
    save_npy(dir / ("b_conv" + std::to_string(l + 1) + ".npy"), {m.conv[l].out_ch},
             m.conv[l].b);
  }
  save_npy(dir / "w_fc.npy", {m.n_classes, m.feature_count()}, m.fc_w);
  save_npy(dir / "b_fc.npy", {m.n_classes}, m.fc_b);
  std::ofstream out(dir / "model.json");
  if (!out) fail(Err::Io, "cannot write model.json in " + dir.string());
  out << j.dump(2) << "\n";
}

ToyModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) fail(Err::Io, "cannot open " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::Format, "model.json: " + std::string(e.what()));
  }
  ToyModel m;
  try {
    m.input_h = j.at("input")[0].get<std::size_t>();
    m.input_w = j.at("input")[1].get<std::size_t>();
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.init_seed = j.value("init_seed", 0ULL);
    for (const auto& lj : j.at("layers")) {
      ConvLayer layer;
      layer.in_ch = lj.at("in_ch").get<std::size_t>();
      layer.out_ch = lj.at("out_ch").get<std::size_t>();
      layer.pool = lj.value("pool", true);
      const std::string name = lj.at("name").get<std::string>();
      NpyArray w = load_npy(dir / ("w_" + name + ".npy"));
      NpyArray b = load_npy(dir / ("b_" + name + ".npy"));
      if (w.dtype != "<f8" ||
          w.shape != std::vector<std::size_t>{layer.out_ch, layer.in_ch, 3, 3})
        fail(Err::Format, "bad weight tensor for " + name);
      if (b.dtype != "<f8" || b.shape != std::vector<std::size_t>{layer.out_ch})
        fail(Err::Format, "bad bias tensor for " + name);
      layer.w = std::move(w.f64);
      layer.b = std::move(b.f64);
      m.conv.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Err::Format, "model.json: " + std::string(e.what()));
  }
  if (m.conv.size() < 2) fail(Err::Format, "model must have at least two conv layers");
  NpyArray w = load_npy(dir / "w_fc.npy");
  NpyArray b = load_npy(dir / "b_fc.npy");
  if (w.dtype != "<f8" || w.shape != std::vector<std::size_t>{m.n_classes, m.feature_count()})
    fail(Err::Format, "bad head weight tensor");
  if (b.dtype != "<f8" || b.shape != std::vector<std::size_t>{m.n_classes})
    fail(Err::Format, "bad head bias tensor");
  m.fc_w = std::move(w.f64);
  m.fc_b = std::move(b.f64);
  return m;
}

}  // namespace xstab
