#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/saliency_map.hpp"

namespace xstab {

// Pearson correlation between two equally shaped maps (centered cross-products).
// Affine-invariant per argument (positive scale), symmetric, clamped to [-1,1].
double pcc(const SaliencyMap& x, const SaliencyMap& y);

// Histogram similarity: both maps sum-normalized, then sum over cell-wise minima.
// 1 iff the normalized maps coincide, 0 for disjoint supports.
double sim(const SaliencyMap& x, const SaliencyMap& y);

// Euclidean norm of the difference, accumulated over pixels and RGB channels.
double image_distance(const Image& x, const Image& xp);

// Euclidean norm of the difference over map cells.
double map_distance(const SaliencyMap& e, const SaliencyMap& ep);

// map_distance / image_distance; throws IdenticalInputs on a zero denominator
// (the distortion reproduced the input exactly).
double lipschitz_ratio(const Image& x, const Image& xp, const SaliencyMap& e,
                       const SaliencyMap& ep);

// Max of lipschitz_ratio over a level's variants. Variants identical to x are
// skipped (counted into *skipped when given); throws NoValidVariants when none
// remain.
double lipschitz_at_level(
    const Image& x, const SaliencyMap& e,
    const std::vector<std::pair<const Image*, const SaliencyMap*>>& variants,
    std::size_t* skipped = nullptr);

// √n_channels · q · √(width·height): the radius of the distortion neighbourhood
// when every channel of every pixel moves by at most q.
double theoretical_radius(std::size_t width, std::size_t height, std::size_t n_channels,
                          double q);

// Relative jumps |L_j - L_{j+1}| / L_j · 100 between consecutive levels.
// Throws ZeroBaseline when some L_j is 0, InvalidParameter for < 2 levels.
std::vector<double> stability_series(const std::vector<double>& level_means);

// Pearson correlation of two per-level mean sequences.
double consensus(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace xstab
