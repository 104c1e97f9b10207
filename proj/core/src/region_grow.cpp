// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>
#include <vector>

#include "homer/error.hpp"
#include "homer/oracles.hpp"

namespace homer::oracles {

namespace {

void check_points(Size size, std::span<const PixelPoint> pts, const char* kind) {
  for (const auto& p : pts) {
    if (!size.contains(p)) {
      fail(ErrorCode::invalid_prompt, std::string(kind) + " point (" + std::to_string(p.x) + ", " +
                                          std::to_string(p.y) + ") is outside the image");
    }
  }
}

}  // namespace

BinaryMask region_grow_segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                               std::span<const PixelPoint> background, double tol) {
  if (foreground.empty()) fail(ErrorCode::invalid_prompt, "region growing needs a foreground point");
  if (!(tol > 0.0)) fail(ErrorCode::invalid_argument, "region growing tolerance must be > 0");
  const Size size = image.size();
  check_points(size, foreground, "foreground");
  check_points(size, background, "background");

  BinaryMask blocked(size);
  for (const auto& b : background) blocked.set(b.x, b.y);
  for (const auto& f : foreground) {
    if (blocked.get(f.x, f.y)) {
      fail(ErrorCode::prompt_conflict, "foreground and background point coincide at (" +
                                           std::to_string(f.x) + ", " + std::to_string(f.y) + ")");
    }
  }

  BinaryMask result(size);
  const double tol2 = tol * tol;
  const std::size_t w = static_cast<std::size_t>(size.width);
  std::vector<std::uint32_t> seen(size.pixel_count(), 0);
  std::vector<std::size_t> queue;
  std::uint32_t stamp = 0;

  for (const auto& seed : foreground) {
    ++stamp;
    queue.clear();
    const std::size_t s = static_cast<std::size_t>(seed.y) * w + static_cast<std::size_t>(seed.x);
    seen[s] = stamp;
    queue.push_back(s);
    const auto* c0 = image.pixel(seed.x, seed.y);
    double sum[3] = {double(c0[0]), double(c0[1]), double(c0[2])};
    std::size_t count = 1;
    std::size_t head = 0;
    bool hit_background = false;
    while (head < queue.size() && !hit_background) {
      const std::size_t idx = queue[head++];
      const int x = static_cast<int>(idx % w);
      const int y = static_cast<int>(idx / w);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (!size.contains(nx[k], ny[k])) continue;
        const std::size_t n = static_cast<std::size_t>(ny[k]) * w + static_cast<std::size_t>(nx[k]);
        if (seen[n] == stamp) continue;
        seen[n] = stamp;
        const auto* c = image.pixel(nx[k], ny[k]);
        const double inv = 1.0 / static_cast<double>(count);
        const double d0 = c[0] - sum[0] * inv;
        const double d1 = c[1] - sum[1] * inv;
        const double d2 = c[2] - sum[2] * inv;
        if (d0 * d0 + d1 * d1 + d2 * d2 > tol2) continue;
        if (blocked.get(nx[k], ny[k])) {
          // Erode back: keep only what was admitted before this point.
          hit_background = true;
          break;
        }
        queue.push_back(n);
        sum[0] += c[0];
        sum[1] += c[1];
        sum[2] += c[2];
        ++count;
      }
    }
    for (auto idx : queue) result.bits()[idx] = 1;
  }
  return result;
}

}  // namespace homer::oracles
