#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace xstab {

namespace {

double pearson(const double* a, const double* b, std::size_t n) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) fail(Err::ZeroVariance, "pearson: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

double pcc(const SaliencyMap& x, const SaliencyMap& y) {
  if (x.height != y.height || x.width != y.width)
    fail(Err::ShapeMismatch, "pcc: map shapes differ");
  if (x.size() == 0) fail(Err::EmptyInput, "pcc: empty maps");
  check_finite(x, "pcc");
  check_finite(y, "pcc");
  return pearson(x.data.data(), y.data.data(), x.size());
}

double sim(const SaliencyMap& x, const SaliencyMap& y) {
  if (x.height != y.height || x.width != y.width)
    fail(Err::ShapeMismatch, "sim: map shapes differ");
  const SaliencyMap nx = sum_normalize(x);
  const SaliencyMap ny = sum_normalize(y);
  double s = 0.0;
  for (std::size_t i = 0; i < nx.size(); ++i) s += std::min(nx.data[i], ny.data[i]);
  return std::clamp(s, 0.0, 1.0);
}

double image_distance(const Image& x, const Image& xp) {
  if (x.height != xp.height || x.width != xp.width)
    fail(Err::ShapeMismatch, "image_distance: image shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = static_cast<double>(x.pixels[i]) - static_cast<double>(xp.pixels[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double map_distance(const SaliencyMap& e, const SaliencyMap& ep) {
  if (e.height != ep.height || e.width != ep.width)
    fail(Err::ShapeMismatch, "map_distance: map shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double d = e.data[i] - ep.data[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double lipschitz_ratio(const Image& x, const Image& xp, const SaliencyMap& e,
                       const SaliencyMap& ep) {
  const double den = image_distance(x, xp);
  if (den == 0.0) fail(Err::IdenticalInputs, "lipschitz_ratio: distorted image equals input");
  return map_distance(e, ep) / den;
}

double lipschitz_at_level(
    const Image& x, const SaliencyMap& e,
    const std::vector<std::pair<const Image*, const SaliencyMap*>>& variants,
    std::size_t* skipped) {
  double best = -1.0;
  std::size_t skip = 0;
  for (const auto& [img, map] : variants) {
    const double den = image_distance(x, *img);
    if (den == 0.0) {
      ++skip;
      continue;
    }
    best = std::max(best, map_distance(e, *map) / den);
  }
  if (skipped) *skipped = skip;
  if (best < 0.0) fail(Err::NoValidVariants, "lipschitz_at_level: every variant equals the input");
  return best;
}

double theoretical_radius(std::size_t width, std::size_t height, std::size_t n_channels,
                          double q) {
  if (width == 0 || height == 0 || n_channels == 0)
    fail(Err::InvalidParameter, "theoretical_radius: dimensions must be positive");
  if (q < 0.0 || !std::isfinite(q))
    fail(Err::InvalidParameter, "theoretical_radius: q must be finite and >= 0");
  return std::sqrt(static_cast<double>(n_channels)) * q *
         std::sqrt(static_cast<double>(width) * static_cast<double>(height));
}

std::vector<double> stability_series(const std::vector<double>& level_means) {
  if (level_means.size() < 2)
    fail(Err::InvalidParameter, "stability_series: need at least two levels");
  std::vector<double> s;
  s.reserve(level_means.size() - 1);
  for (std::size_t j = 0; j + 1 < level_means.size(); ++j) {
    const double base = level_means[j];
    const double next = level_means[j + 1];
    if (base == 0.0) {
      // A flat zero pair has no jump; only a jump off zero is undefined.
      if (next == 0.0) {
        s.push_back(0.0);
        continue;
      }
      fail(Err::ZeroBaseline, "stability_series: zero baseline level");
    }
    s.push_back(std::abs(base - next) / base * 100.0);
  }
  return s;
}

double consensus(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(Err::LengthMismatch, "consensus: series lengths differ");
  if (a.size() < 2) fail(Err::InvalidParameter, "consensus: need at least two points");
  return pearson(a.data(), b.data(), a.size());
}

}  // namespace xstab
