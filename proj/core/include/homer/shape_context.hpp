// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "homer/image.hpp"

namespace homer::mask {

struct ShapeContextConfig {
  std::size_t boundary_samples = 100;
  int radial_bins = 5;
  int angular_bins = 12;
  /// Radii are fractions of the mask's mean pairwise boundary distance.
  double r_inner = 0.125;
  double r_outer = 2.0;
  std::uint64_t rng_seed = 0;
  /// Upper bound on the boundary points each histogram counts. Masks with a
  /// longer boundary use a seeded subsample.
  std::size_t population_cap = 512;
};

void validate(const ShapeContextConfig& cfg);

/// Log-polar histograms, one per sampled boundary point, each normalized to
/// unit mass.
struct ShapeDescriptor {
  std::vector<PixelPoint> centers;
  std::vector<double> histograms;  ///< centers.size() x bins, row-major
  int bins = 0;
  double scale = 1.0;  ///< mean pairwise boundary distance

  std::size_t size() const noexcept { return centers.size(); }
  const double* histogram(std::size_t i) const noexcept {
    return histograms.data() + i * static_cast<std::size_t>(bins);
  }
};

/// Throws Error{empty_mask}.
ShapeDescriptor describe_shape(const BinaryMask& m, const ShapeContextConfig& cfg);

/// ½·Σ (g−h)²/(g+h), with empty-bin pairs contributing 0.
double chi_squared(const double* g, const double* h, int bins) noexcept;

/// Mean χ² cost of a greedy minimum-cost one-to-one assignment between the
/// two descriptor sets.
double descriptor_distance(const ShapeDescriptor& a, const ShapeDescriptor& b);

/// Shape Context Distance between two masks. Deterministic given cfg.rng_seed.
double shape_context_distance(const BinaryMask& a, const BinaryMask& b,
                              const ShapeContextConfig& cfg);

}  // namespace homer::mask
