#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "core/saliency_map.hpp"
#include "core/tensor.hpp"
#include "error.hpp"

namespace xstab {

// Minimal NPY v1.0 reader/writer: little-endian '<f8' and '|u1', C-order only.
struct NpyArray {
  std::string dtype;  // "<f8" or "|u1"
  std::vector<std::size_t> shape;
  std::vector<double> f64;
  std::vector<std::uint8_t> u8;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
};

NpyArray load_npy(const std::filesystem::path& path);
void save_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<double>& data);
void save_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint8_t>& data);

// Maps serialize as (height, width) float64.
SaliencyMap load_map_npy(const std::filesystem::path& path);
void save_map_npy(const SaliencyMap& m, const std::filesystem::path& path);

// Activation tensors serialize as (channels, height, width) float64.
ActivationTensor load_tensor_npy(const std::filesystem::path& path);
void save_tensor_npy(const ActivationTensor& t, const std::filesystem::path& path);

}  // namespace xstab
