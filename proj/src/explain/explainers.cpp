#include "explain/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "error.hpp"

namespace xstab {

namespace {

void check_tensor_finite(const ActivationTensor& t, const char* what) {
  for (double v : t.data) {
    if (!std::isfinite(v)) fail(Err::NonFiniteInput, std::string(what) + ": non-finite value");
  }
}

}  // namespace

void FemParams::validate() const {
  if (!std::isfinite(k) || k < 0.0) {
    fail(Err::InvalidParameter, "fem: sigma multiplier must be finite and >= 0");
  }
}

std::vector<std::pair<double, double>> fem_channel_stats(const ActivationTensor& act) {
  check_tensor_finite(act, "fem_channel_stats");
  const std::size_t n = act.height * act.width;
  std::vector<std::pair<double, double>> stats(act.channels);
  for (std::size_t c = 0; c < act.channels; ++c) {
    const double* ch = act.data.data() + c * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += ch[i];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = ch[i] - mean;
      ss += d * d;
    }
    stats[c] = {mean, std::sqrt(ss / static_cast<double>(n))};
  }
  return stats;
}

std::vector<std::uint8_t> fem_binary_maps(const ActivationTensor& act, const FemParams& params) {
  params.validate();
  const auto stats = fem_channel_stats(act);
  const std::size_t n = act.height * act.width;
  std::vector<std::uint8_t> bin(act.channels * n, 0);
  for (std::size_t c = 0; c < act.channels; ++c) {
    const double threshold = stats[c].first + params.k * stats[c].second;
    const double* ch = act.data.data() + c * n;
    std::uint8_t* out = bin.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) out[i] = ch[i] >= threshold ? 1 : 0;
  }
  return bin;
}

SaliencyMap fem(const ActivationTensor& act, const FemParams& params, std::size_t out_w,
                std::size_t out_h) {
  const auto stats = fem_channel_stats(act);
  const auto bin = fem_binary_maps(act, params);
  const std::size_t n = act.height * act.width;
  SaliencyMap m(act.height, act.width);
  for (std::size_t c = 0; c < act.channels; ++c) {
    const double mean = stats[c].first;
    const std::uint8_t* b = bin.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (b[i]) m.data[i] += mean;
    }
  }
  return resize_bilinear(minmax_normalize(m), out_h, out_w);
}

SaliencyMap gradcam(const ActivationTensor& act, const ActivationTensor& grad,
                    std::size_t out_w, std::size_t out_h) {
  if (act.channels != grad.channels || act.height != grad.height || act.width != grad.width) {
    fail(Err::ShapeMismatch, "gradcam: activation and gradient shapes differ");
  }
  check_tensor_finite(act, "gradcam");
  check_tensor_finite(grad, "gradcam");
  const std::size_t n = act.height * act.width;
  SaliencyMap m(act.height, act.width);
  for (std::size_t c = 0; c < act.channels; ++c) {
    const double* g = grad.data.data() + c * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += g[i];
    const double alpha = sum / static_cast<double>(n);
    const double* a = act.data.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) m.data[i] += alpha * a[i];
  }
  for (double& v : m.data) v = std::max(0.0, v);
  return resize_bilinear(minmax_normalize(m), out_h, out_w);
}

std::vector<SaliencyMap> mlfem_layer_maps(const ForwardCache& cache, const FemParams& params,
                                          std::size_t out_w, std::size_t out_h) {
  if (cache.activations.empty()) {
    fail(Err::EmptyInput, "mlfem_layer_maps: forward cache holds no activations");
  }
  std::vector<SaliencyMap> maps;
  maps.reserve(cache.activations.size());
  for (const ActivationTensor& act : cache.activations) {
    maps.push_back(fem(act, params, out_w, out_h));
  }
  return maps;
}

FusionWeights fit_fusion_weights(const std::vector<std::vector<SaliencyMap>>& maps_per_image,
                                 const std::vector<SaliencyMap>& references,
                                 std::vector<double>* objective_trace) {
  if (references.empty()) {
    fail(Err::EmptyTrainingSet, "fit_fusion_weights: no training images");
  }
  if (maps_per_image.size() != references.size()) {
    fail(Err::ShapeMismatch, "fit_fusion_weights: map-set count differs from reference count");
  }
  const std::size_t n_layers = maps_per_image.front().size();
  if (n_layers == 0) {
    fail(Err::ShapeMismatch, "fit_fusion_weights: image holds no layer maps");
  }

  // Accumulate the quadratic form: objective(w) = w'Gw - 2 c'w + gg.
  std::vector<double> gram(n_layers * n_layers, 0.0);
  std::vector<double> cross(n_layers, 0.0);
  double gg = 0.0;
  for (std::size_t i = 0; i < maps_per_image.size(); ++i) {
    const auto& maps = maps_per_image[i];
    const SaliencyMap& ref = references[i];
    check_finite(ref, "fit_fusion_weights reference");
    if (maps.size() != n_layers) {
      fail(Err::ShapeMismatch, "fit_fusion_weights: layer count differs between images");
    }
    const std::size_t n = ref.height * ref.width;
    for (std::size_t a = 0; a < n_layers; ++a) {
      const SaliencyMap& ma = maps[a];
      check_finite(ma, "fit_fusion_weights layer map");
      if (ma.height != ref.height || ma.width != ref.width) {
        fail(Err::ShapeMismatch, "fit_fusion_weights: map shape differs from reference shape");
      }
      double dot_ref = 0.0;
      for (std::size_t p = 0; p < n; ++p) dot_ref += ma.data[p] * ref.data[p];
      cross[a] += dot_ref;
      for (std::size_t b = a; b < n_layers; ++b) {
        double dot = 0.0;
        for (std::size_t p = 0; p < n; ++p) dot += ma.data[p] * maps[b].data[p];
        gram[a * n_layers + b] += dot;
        if (b != a) gram[b * n_layers + a] += dot;
      }
    }
    for (std::size_t p = 0; p < n; ++p) gg += ref.data[p] * ref.data[p];
  }

  const double uniform = 1.0 / static_cast<double>(n_layers);
  FusionWeights fw;
  fw.w.assign(n_layers, uniform);

  // Gradient step bounded by 2 * ||G||_inf keeps projected gradient monotone.
  double row_sum_max = 0.0;
  for (std::size_t a = 0; a < n_layers; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < n_layers; ++b) row += std::abs(gram[a * n_layers + b]);
    row_sum_max = std::max(row_sum_max, row);
  }
  if (row_sum_max == 0.0) {
    // Every layer map is identically zero; nothing to fit.
    if (objective_trace) objective_trace->push_back(gg);
    return fw;
  }
  const double step = 1.0 / (2.0 * row_sum_max);

  auto objective = [&](const std::vector<double>& w) {
    double quad = 0.0;
    double lin = 0.0;
    for (std::size_t a = 0; a < n_layers; ++a) {
      double gw = 0.0;
      for (std::size_t b = 0; b < n_layers; ++b) gw += gram[a * n_layers + b] * w[b];
      quad += w[a] * gw;
      lin += cross[a] * w[a];
    }
    return quad - 2.0 * lin + gg;
  };

  if (objective_trace) objective_trace->push_back(objective(fw.w));
  std::vector<double> next(n_layers);
  for (int iter = 0; iter < 10000; ++iter) {
    double max_delta = 0.0;
    for (std::size_t a = 0; a < n_layers; ++a) {
      double gw = 0.0;
      for (std::size_t b = 0; b < n_layers; ++b) gw += gram[a * n_layers + b] * fw.w[b];
      const double grad = 2.0 * (gw - cross[a]);
      next[a] = std::max(0.0, fw.w[a] - step * grad);
      max_delta = std::max(max_delta, std::abs(next[a] - fw.w[a]));
    }
    fw.w.swap(next);
    if (objective_trace) objective_trace->push_back(objective(fw.w));
    if (max_delta <= 1e-8) break;
  }

  double w_max = 0.0;
  for (double w : fw.w) w_max = std::max(w_max, w);
  if (w_max <= 1e-6) fw.w.assign(n_layers, uniform);
  return fw;
}

SaliencyMap mlfem(const std::vector<SaliencyMap>& layer_maps, const FusionWeights& weights) {
  if (layer_maps.empty()) fail(Err::EmptyInput, "mlfem: no layer maps");
  if (layer_maps.size() != weights.w.size()) {
    fail(Err::ShapeMismatch, "mlfem: layer map count differs from weight count");
  }
  const SaliencyMap& first = layer_maps.front();
  SaliencyMap m(first.height, first.width);
  for (std::size_t l = 0; l < layer_maps.size(); ++l) {
    const SaliencyMap& lm = layer_maps[l];
    check_finite(lm, "mlfem layer map");
    if (lm.height != first.height || lm.width != first.width) {
      fail(Err::ShapeMismatch, "mlfem: layer map shapes differ");
    }
    const double w = weights.w[l];
    for (std::size_t p = 0; p < m.data.size(); ++p) m.data[p] += w * lm.data[p];
  }
  return minmax_normalize(m);
}

}  // namespace xstab
