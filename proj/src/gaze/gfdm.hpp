#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/saliency_map.hpp"

namespace xstab {

// Pooled gaze fixations for one stimulus image.
struct FixationSet {
  std::string image_id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::pair<double, double>> points;  // (u, v) pixel coordinates

  void validate() const;
};

// Sum of unit Gaussians centered on the fixations, divided by the maximum so
// the peak is exactly 1.
SaliencyMap gfdm(const FixationSet& fixations, double sigma_fov);

// Default foveal spread when the config gives none.
inline double default_sigma_fov(std::size_t width) { return static_cast<double>(width) / 20.0; }

// CSV with a required "image_id,u,v" header; may hold several image ids.
std::vector<FixationSet> load_fixations_csv(const std::filesystem::path& path,
                                            std::size_t width, std::size_t height);

// JSON: one object {"image_id": ..., "points": [[u,v],...]} or an array of them.
std::vector<FixationSet> load_fixations_json(const std::filesystem::path& path,
                                             std::size_t width, std::size_t height);

// Dispatches on the .csv / .json extension.
std::vector<FixationSet> load_fixations(const std::filesystem::path& path, std::size_t width,
                                        std::size_t height);

}  // namespace xstab
