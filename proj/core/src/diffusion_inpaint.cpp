// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "homer/error.hpp"
#include "homer/oracles.hpp"

namespace homer::oracles {

namespace {

constexpr std::int32_t kUnmasked = -1;

// One masked pixel in the linear system: fixed contribution from unmasked
// neighbours plus references to masked neighbours.
struct Node {
  std::array<double, 3> fixed_sum{0.0, 0.0, 0.0};
  std::array<std::int32_t, 4> masked{};
  int masked_count = 0;
  int neighbour_count = 0;
};

}  // namespace

RgbImage diffusion_inpaint(const RgbImage& image, const BinaryMask& mask, int iterations) {
  if (image.size() != mask.size()) {
    fail(ErrorCode::dimension_mismatch, "inpaint: mask " + std::to_string(mask.width()) + "x" +
                                            std::to_string(mask.height()) + " vs image " +
                                            std::to_string(image.width()) + "x" +
                                            std::to_string(image.height()));
  }
  if (iterations < 1) fail(ErrorCode::invalid_argument, "diffusion iterations must be >= 1");
  const std::size_t area = mask.area();
  if (area == 0) return image;
  if (area == image.size().pixel_count()) {
    fail(ErrorCode::full_frame_mask, "mask covers the whole frame; nothing to diffuse from");
  }

  const Size size = image.size();
  const std::size_t w = static_cast<std::size_t>(size.width);
  std::vector<std::int32_t> id(size.pixel_count(), kUnmasked);
  std::vector<std::size_t> pixels;
  pixels.reserve(area);
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (mask.bits()[i]) {
      id[i] = static_cast<std::int32_t>(pixels.size());
      pixels.push_back(i);
    }
  }

  std::vector<Node> nodes(pixels.size());
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    const int x = static_cast<int>(pixels[k] % w);
    const int y = static_cast<int>(pixels[k] / w);
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    Node& node = nodes[k];
    for (int j = 0; j < 4; ++j) {
      if (!size.contains(nx[j], ny[j])) continue;
      const std::size_t n = static_cast<std::size_t>(ny[j]) * w + static_cast<std::size_t>(nx[j]);
      ++node.neighbour_count;
      if (id[n] == kUnmasked) {
        const auto* c = image.pixel(nx[j], ny[j]);
        for (int ch = 0; ch < 3; ++ch) node.fixed_sum[ch] += c[ch];
      } else {
        node.masked[node.masked_count++] = id[n];
      }
    }
  }

  // Initial value: mean of the unmasked pixels bordering each component.
  std::vector<std::array<double, 3>> value(pixels.size());
  std::vector<std::int32_t> component(pixels.size(), -1);
  std::vector<std::int32_t> stack;
  std::int32_t next_component = 0;
  for (std::size_t start = 0; start < pixels.size(); ++start) {
    if (component[start] >= 0) continue;
    std::vector<std::int32_t> members;
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    std::size_t border = 0;
    component[start] = next_component;
    stack.assign(1, static_cast<std::int32_t>(start));
    std::vector<std::size_t> border_pixels;
    while (!stack.empty()) {
      const auto k = stack.back();
      stack.pop_back();
      members.push_back(k);
      const int x = static_cast<int>(pixels[static_cast<std::size_t>(k)] % w);
      const int y = static_cast<int>(pixels[static_cast<std::size_t>(k)] / w);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int j = 0; j < 4; ++j) {
        if (!size.contains(nx[j], ny[j])) continue;
        const std::size_t n = static_cast<std::size_t>(ny[j]) * w + static_cast<std::size_t>(nx[j]);
        if (id[n] == kUnmasked) {
          border_pixels.push_back(n);
        } else if (component[static_cast<std::size_t>(id[n])] < 0) {
          component[static_cast<std::size_t>(id[n])] = next_component;
          stack.push_back(id[n]);
        }
      }
    }
    std::sort(border_pixels.begin(), border_pixels.end());
    border_pixels.erase(std::unique(border_pixels.begin(), border_pixels.end()), border_pixels.end());
    for (auto n : border_pixels) {
      const auto* c = image.bytes().data() + n * 3;
      for (int ch = 0; ch < 3; ++ch) sum[ch] += c[ch];
      ++border;
    }
    std::array<double, 3> init{0.0, 0.0, 0.0};
    if (border > 0) {
      for (int ch = 0; ch < 3; ++ch) init[ch] = sum[ch] / static_cast<double>(border);
    }
    for (auto k : members) value[static_cast<std::size_t>(k)] = init;
    ++next_component;
  }

  std::vector<std::array<double, 3>> next(value.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const Node& node = nodes[k];
      std::array<double, 3> s = node.fixed_sum;
      for (int j = 0; j < node.masked_count; ++j) {
        const auto& v = value[static_cast<std::size_t>(node.masked[j])];
        s[0] += v[0];
        s[1] += v[1];
        s[2] += v[2];
      }
      const double inv = 1.0 / node.neighbour_count;
      next[k] = {s[0] * inv, s[1] * inv, s[2] * inv};
    }
    value.swap(next);
  }

  RgbImage out = image;
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    auto* dst = out.bytes().data() + pixels[k] * 3;
    for (int ch = 0; ch < 3; ++ch) {
      dst[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(value[k][ch]), 0L, 255L));
    }
  }
  return out;
}

}  // namespace homer::oracles
