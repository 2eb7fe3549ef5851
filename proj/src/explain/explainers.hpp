#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "core/saliency_map.hpp"
#include "core/tensor.hpp"
#include "model/toy_model.hpp"

namespace xstab {

struct FemParams {
  double k = 1.0;  // sigma multiplier of the thresholding rule
  void validate() const;
};

// Per-channel (mean, population standard deviation).
std::vector<std::pair<double, double>> fem_channel_stats(const ActivationTensor& act);

// 0/1 mask per channel cell: 1 iff x >= mu_c + k * sigma_c. Same layout as act.
std::vector<std::uint8_t> fem_binary_maps(const ActivationTensor& act, const FemParams& params);

// Sum of mu_c-weighted binary maps, min-max normalized, then resized.
SaliencyMap fem(const ActivationTensor& act, const FemParams& params, std::size_t out_w,
                std::size_t out_h);

// Channel-averaged gradient weights, ReLU of the weighted activation sum,
// min-max normalized, then resized.
SaliencyMap gradcam(const ActivationTensor& act, const ActivationTensor& grad,
                    std::size_t out_w, std::size_t out_h);

// fem() applied to every cached conv activation, in depth order.
std::vector<SaliencyMap> mlfem_layer_maps(const ForwardCache& cache, const FemParams& params,
                                          std::size_t out_w, std::size_t out_h);

struct FusionWeights {
  std::vector<double> w;  // one non-negative weight per conv layer
};

// Non-negative least squares of the per-layer maps against the reference maps
// (projected gradient, tol 1e-8 on the weight step, at most 1e4 iterations).
// Falls back to uniform weights when the fit drives every weight to zero.
FusionWeights fit_fusion_weights(const std::vector<std::vector<SaliencyMap>>& maps_per_image,
                                 const std::vector<SaliencyMap>& references,
                                 std::vector<double>* objective_trace = nullptr);

// Min-max normalized weighted sum of the layer maps.
SaliencyMap mlfem(const std::vector<SaliencyMap>& layer_maps, const FusionWeights& weights);

}  // namespace xstab
