// SPDX-License-Identifier: Apache-2.0
#include "homer/mask.hpp"

#include <string>

#include "homer/error.hpp"
#include "homer/random.hpp"

namespace homer::mask {

namespace {

void require_same_size(const BinaryMask& a, const BinaryMask& b, const char* op) {
  if (a.size() != b.size()) {
    fail(ErrorCode::dimension_mismatch,
         std::string(op) + ": mask sizes differ (" + std::to_string(a.width()) + "x" +
             std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
             std::to_string(b.height()) + ")");
  }
}

template <typename Op>
BinaryMask combine(const BinaryMask& a, const BinaryMask& b, const char* name, Op op) {
  require_same_size(a, b, name);
  BinaryMask out(a.size());
  auto o = out.bits();
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]) ? 1 : 0;
  return out;
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b, "iou");
  std::size_t inter = 0, uni = 0;
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    inter += static_cast<std::size_t>(x[i] & y[i]);
    uni += static_cast<std::size_t>(x[i] | y[i]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Point2 centroid(const BinaryMask& m) {
  double sx = 0.0, sy = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.get(x, y)) {
        sx += x;
        sy += y;
        ++count;
      }
    }
  }
  if (count == 0) fail(ErrorCode::empty_mask, "centroid of an empty mask");
  return {sx / static_cast<double>(count), sy / static_cast<double>(count)};
}

BinaryMask unite(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, "unite", [](auto p, auto q) { return p || q; });
}

BinaryMask intersect(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, "intersect", [](auto p, auto q) { return p && q; });
}

BinaryMask subtract(const BinaryMask& a, const BinaryMask& b) {
  return combine(a, b, "subtract", [](auto p, auto q) { return p && !q; });
}

BinaryMask unite_all(std::span<const BinaryMask> masks, Size size) {
  BinaryMask out(size);
  for (const auto& m : masks) out = unite(out, m);
  return out;
}

bool is_subset(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b, "is_subset");
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] && !y[i]) return false;
  }
  return true;
}

BinaryMask translate(const BinaryMask& m, int dx, int dy) {
  BinaryMask out(m.size());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.get(x, y) && m.size().contains(x + dx, y + dy)) out.set(x + dx, y + dy);
    }
  }
  return out;
}

std::vector<PixelPoint> boundary_pixels(const BinaryMask& m) {
  std::vector<PixelPoint> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.get(x, y)) continue;
      if (!m.get_or_zero(x - 1, y) || !m.get_or_zero(x + 1, y) || !m.get_or_zero(x, y - 1) ||
          !m.get_or_zero(x, y + 1)) {
        out.push_back({x, y});
      }
    }
  }
  return out;
}

std::vector<PixelPoint> boundary_points(const BinaryMask& m, std::size_t n, std::uint64_t seed) {
  if (n < 8) fail(ErrorCode::invalid_argument, "boundary_points needs n >= 8");
  auto all = boundary_pixels(m);
  if (all.empty()) fail(ErrorCode::empty_mask, "boundary of an empty mask");
  Rng rng(seed);
  const auto idx = rng.sample_indices(all.size(), n);
  std::vector<PixelPoint> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

}  // namespace homer::mask
