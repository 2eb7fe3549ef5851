#include "core/saliency_map.hpp"

#include <algorithm>
#include <cmath>

namespace xstab {

void check_finite(const SaliencyMap& m, const char* what) {
  for (double v : m.data) {
    if (!std::isfinite(v)) fail(Err::NonFiniteInput, std::string(what) + ": non-finite value");
  }
}

SaliencyMap minmax_normalize(const SaliencyMap& m) {
  if (m.size() == 0) fail(Err::EmptyInput, "minmax_normalize: empty map");
  check_finite(m, "minmax_normalize");
  const auto [lo_it, hi_it] = std::minmax_element(m.data.begin(), m.data.end());
  const double lo = *lo_it, hi = *hi_it;
  SaliencyMap out(m.height, m.width);
  if (hi == lo) return out;  // constant input -> all zeros
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = (m.data[i] - lo) * inv;
  return out;
}

SaliencyMap sum_normalize(const SaliencyMap& m) {
  if (m.size() == 0) fail(Err::EmptyInput, "sum_normalize: empty map");
  check_finite(m, "sum_normalize");
  double sum = 0.0;
  for (double v : m.data) {
    if (v < 0.0) fail(Err::NegativeValue, "sum_normalize: negative value");
    sum += v;
  }
  if (sum <= 0.0) fail(Err::ZeroMass, "sum_normalize: zero mass");
  SaliencyMap out(m.height, m.width);
  const double inv = 1.0 / sum;
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = m.data[i] * inv;
  return out;
}

SaliencyMap resize_bilinear(const SaliencyMap& m, std::size_t out_h, std::size_t out_w) {
  if (m.size() == 0) fail(Err::EmptyInput, "resize_bilinear: empty map");
  if (out_h == 0 || out_w == 0) fail(Err::InvalidParameter, "resize_bilinear: zero output dim");
  if (out_h == m.height && out_w == m.width) return m;  // identity, bit-exact

  SaliencyMap out(out_h, out_w);
  const double sy = static_cast<double>(m.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(m.width) / static_cast<double>(out_w);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const double cy = std::clamp(fy, 0.0, static_cast<double>(m.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(cy);
    const std::size_t y1 = std::min(y0 + 1, m.height - 1);
    const double wy = cy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const double cx = std::clamp(fx, 0.0, static_cast<double>(m.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(cx);
      const std::size_t x1 = std::min(x0 + 1, m.width - 1);
      const double wx = cx - static_cast<double>(x0);
      const double top = m.at(y0, x0) * (1.0 - wx) + m.at(y0, x1) * wx;
      const double bot = m.at(y1, x0) * (1.0 - wx) + m.at(y1, x1) * wx;
      out.at(oy, ox) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

}  // namespace xstab
