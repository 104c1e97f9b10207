// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "homer/image.hpp"

namespace homer::geometry {

inline constexpr double kDepthEpsilon = 1e-10;
inline constexpr double kDeterminantEpsilon = 1e-10;

/// 3x3 projective transform between two view planes.
///
/// Entries are stored row-major and always normalized to unit Frobenius norm
/// with h33 >= 0 (when h33 != 0). Construction rejects near-singular matrices.
class Homography {
 public:
  /// Identity transform.
  Homography();

  /// Normalizes `row_major`; throws Error{degenerate_homography} if
  /// |det| <= kDeterminantEpsilon after normalization.
  static Homography from_row_major(const std::array<double, 9>& row_major);
  static Homography identity() { return Homography{}; }
  static Homography translation(double dx, double dy);

  const std::array<double, 9>& row_major() const noexcept { return h_; }
  double operator()(int row, int col) const noexcept { return h_[row * 3 + col]; }
  double determinant() const noexcept;

  /// Throws Error{degenerate_point} when the projective depth is ~0.
  Point2 apply(Point2 p) const;
  std::optional<Point2> try_apply(Point2 p) const noexcept;

  Homography inverse() const;

  friend bool operator==(const Homography&, const Homography&) = default;

 private:
  explicit Homography(const std::array<double, 9>& normalized) : h_(normalized) {}

  std::array<double, 9> h_;
};

/// Composite mapping a -> c given a -> b and b -> c.
Homography chain(const Homography& h_ab, const Homography& h_bc);

/// Largest absolute entry difference after both are normalized; a cheap
/// "equal up to scale" check.
double max_entry_difference(const Homography& a, const Homography& b) noexcept;

struct Correspondence {
  Point2 p;        ///< source view
  Point2 p_prime;  ///< target view
  double confidence = 1.0;
};

double reprojection_error(const Homography& h, const Correspondence& c) noexcept;

/// Least-squares homography from >= 4 correspondences (normalized DLT).
Homography estimate_dlt(std::span<const Correspondence> correspondences);

struct RansacConfig {
  double inlier_threshold_px = 3.0;
  int max_iterations = 2000;
  double min_inlier_ratio = 0.15;
  std::uint64_t rng_seed = 0;
  /// Early-exit confidence for adaptive iteration count; 1.0 disables it.
  double confidence = 0.999;
};

void validate(const RansacConfig& cfg);

struct RansacResult {
  Homography homography;
  std::vector<std::size_t> inlier_indices;
  double mean_inlier_error_px = 0.0;
  int iterations_used = 0;

  friend bool operator==(const RansacResult&, const RansacResult&) = default;
};

RansacResult ransac_estimate(std::span<const Correspondence> correspondences,
                             const RansacConfig& cfg);

/// Nearest-neighbour backward warp; out-of-frame lookups produce 0.
BinaryMask warp_mask(const BinaryMask& mask, const Homography& h, Size target_size);

struct WarpedImage {
  RgbImage image;
  /// 1 where the full bilinear footprint of the lookup was inside the source.
  BinaryMask validity;
};

/// Bilinear backward warp. Invalid pixels are black.
WarpedImage warp_image(const RgbImage& image, const Homography& h, Size target_size);

}  // namespace homer::geometry
