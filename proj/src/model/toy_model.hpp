#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/tensor.hpp"

namespace xstab {

struct ConvLayer {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::vector<double> w;  // (out, in, 3, 3)
  std::vector<double> b;  // (out)
  bool pool = true;       // 2x2 max-pool after the ReLU

  double& wt(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return w[((o * in_ch + i) * 3 + ky) * 3 + kx];
  }
  double wt(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return w[((o * in_ch + i) * 3 + ky) * 3 + kx];
  }
};

// Small fixed-topology CNN: N conv blocks (3x3, stride 1, zero padding, ReLU,
// 2x2 max-pool), then global average pooling and a linear head.
struct ToyModel {
  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::size_t n_classes = 3;
  std::uint64_t init_seed = 0;
  std::vector<ConvLayer> conv;
  std::vector<double> fc_w;  // (n_classes, feat)
  std::vector<double> fc_b;  // (n_classes)

  std::size_t n_layers() const { return conv.size(); }
  std::size_t feature_count() const { return conv.back().out_ch; }
};

// He-style random initialization; channels.size() >= 2 blocks required.
ToyModel make_toy_model(std::uint64_t seed = 0, std::size_t n_classes = 3,
                        const std::vector<std::size_t>& channels = {8, 16, 32},
                        std::size_t input_h = 64, std::size_t input_w = 64);

struct ForwardCache {
  // Post-ReLU, pre-pool activation of every conv layer (depth order).
  std::vector<ActivationTensor> activations;
  // Pooled layer outputs (the next layer's input).
  std::vector<ActivationTensor> pooled;
  // Flat index into the pre-pool activation chosen by each pooled cell.
  std::vector<std::vector<std::size_t>> pool_argmax;
  std::vector<double> features;  // global average pool of the last output
  std::vector<double> logits;
  std::vector<double> softmax;
  std::size_t label = 0;
  double score = 0.0;
};

// (3, H, W) double tensor scaled to [0,1].
ActivationTensor image_to_tensor(const Image& img);

ForwardCache forward(const ToyModel& m, const Image& img);

// d(logit_cls) / d(activation of conv layer `layer`), including that layer's
// own ReLU mask (zero wherever the cached activation is zero).
ActivationTensor grad_wrt_activation(const ToyModel& m, const ForwardCache& cache,
                                     std::size_t cls, std::size_t layer);

// Forward pass of the network tail above `layer`, treating `act` as that
// layer's post-ReLU activation. Used by gradient checks.
std::vector<double> logits_from_activation(const ToyModel& m, std::size_t layer,
                                           const ActivationTensor& act);

struct Sample {
  Image image;
  std::size_t label = 0;
};

// Plain per-sample SGD on softmax cross-entropy; deterministic for a fixed
// seed. Returns the updated model; epoch_loss (if given) receives the mean
// loss of each epoch.
ToyModel train(const ToyModel& m, const std::vector<Sample>& dataset, std::size_t epochs,
               double lr, std::uint64_t seed, std::vector<double>* epoch_loss = nullptr);

// model.json plus one w_<name>.npy / b_<name>.npy pair per layer and the head.
void save_model(const ToyModel& m, const std::filesystem::path& dir);
ToyModel load_model(const std::filesystem::path& dir);

}  // namespace xstab
