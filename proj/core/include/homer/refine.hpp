// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "homer/image.hpp"
#include "homer/oracles.hpp"
#include "homer/shape_context.hpp"

namespace homer::refine {

struct AnchorConfig {
  double alpha = 1.0;  ///< weight of (1 - IoU)
  double beta = 0.5;   ///< weight of the shape context distance
  int prompt_count = 8;
  double r_min_px = 2.0;
  /// Upper search bound; unset means 1.5 * sqrt(area(coarse) / pi).
  std::optional<double> r_max_px;
  int search_steps = 12;
  /// Best losses above this keep the coarse mask and flag the view degraded.
  double rejection_loss = 0.8;
  mask::ShapeContextConfig sc;
};
void validate(const AnchorConfig& cfg);

struct RefineOutcome {
  BinaryMask refined_mask;
  double radius = 0.0;
  /// Loss of refined_mask against the coarse mask.
  double loss = 0.0;
  /// Lowest loss among the segmenter candidates (equals `loss` unless the
  /// candidate was rejected).
  double best_candidate_loss = 0.0;
  int candidates_evaluated = 0;
  int segmenter_calls = 0;
  bool degraded = false;
};

/// Center (rounded) followed by `count` points at angles 2*pi*j/count on the
/// radius-r circle, clamped to the frame and deduplicated in order.
std::vector<PixelPoint> circle_prompts(Point2 center, double r, int count, Size image_size);

/// alpha * (1 - IoU(refined, coarse)) + beta * SC(refined, coarse).
/// Two empty masks cost 0; an empty mask against a nonempty one is +inf.
double refinement_loss(const BinaryMask& refined, const BinaryMask& coarse, const AnchorConfig& cfg);

/// Golden-section search for the anchor radius minimizing the loss, with
/// exactly cfg.search_steps radius evaluations. Candidates whose segmenter
/// call fails or returns an empty mask cost +inf. Throws
/// Error{segmenter_failed} when no candidate produced a mask.
RefineOutcome refine_mask(const RgbImage& view_image, const BinaryMask& coarse,
                          std::span<const PixelPoint> background, oracles::Segmenter& segmenter,
                          const AnchorConfig& cfg);

}  // namespace homer::refine
