// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "homer/image.hpp"

namespace homer::mask {

/// |a ∩ b| / |a ∪ b|; 1.0 when both are empty. Throws on size mismatch.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Mean of set-pixel coordinates. Throws Error{empty_mask}.
Point2 centroid(const BinaryMask& m);

BinaryMask unite(const BinaryMask& a, const BinaryMask& b);
BinaryMask intersect(const BinaryMask& a, const BinaryMask& b);
/// a \ b
BinaryMask subtract(const BinaryMask& a, const BinaryMask& b);
BinaryMask unite_all(std::span<const BinaryMask> masks, Size size);
bool is_subset(const BinaryMask& a, const BinaryMask& b);
/// Integer shift; pixels moved out of frame are dropped.
BinaryMask translate(const BinaryMask& m, int dx, int dy);

/// Set pixels having at least one unset (or out-of-frame) 4-neighbour, in
/// row-major order.
std::vector<PixelPoint> boundary_pixels(const BinaryMask& m);

/// `n` boundary pixels drawn uniformly without replacement (all of them when
/// fewer exist), in draw order. Throws Error{empty_mask}; n must be >= 8.
std::vector<PixelPoint> boundary_points(const BinaryMask& m, std::size_t n, std::uint64_t seed);

}  // namespace homer::mask
