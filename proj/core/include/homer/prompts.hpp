// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homer/image.hpp"
#include "homer/oracles.hpp"

namespace homer::prompts {

struct ForegroundPoint {
  int x = 0;
  int y = 0;
  int object_id = 1;
  friend bool operator==(const ForegroundPoint&, const ForegroundPoint&) = default;
};

/// Reserved; accepted and round-tripped but not consumed by the pipeline.
struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct PromptSet {
  std::size_t view_index = 0;
  std::vector<ForegroundPoint> foreground;
  std::vector<PixelPoint> background;
  std::optional<Rect> rect;

  /// Number of objects K (largest object id).
  int object_count() const noexcept;
  /// Foreground points of one object, in input order.
  std::vector<PixelPoint> points_for(int object_id) const;
  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

/// Checks coordinates against `image_size` and that object ids are exactly
/// 1..K. Throws Error{invalid_prompt}.
void validate(const PromptSet& prompts, Size image_size);

nlohmann::json to_json(const PromptSet& prompts);
/// Throws Error{parse_error} on schema violations.
PromptSet prompts_from_json(const nlohmann::json& j);

enum class InpaintMode { sequential, merged, automatic };

std::string to_string(InpaintMode mode);
/// Throws Error{parse_error}.
InpaintMode inpaint_mode_from_string(const std::string& s);

struct InteractionResult {
  std::vector<BinaryMask> masks;  ///< object id k at index k-1
  RgbImage inpainted_source;
  InpaintMode mode = InpaintMode::sequential;  ///< never automatic
};

/// One segmenter call per object, with that object's foreground points and
/// the shared background points. Validation runs before any call; segmenter
/// errors are rethrown with the object id in the message.
std::vector<BinaryMask> segment_objects(const RgbImage& image, const PromptSet& prompts,
                                        oracles::Segmenter& segmenter);

/// Folds the inpainter over the masks in order (exactly K calls).
RgbImage inpaint_sequential(const RgbImage& image, const std::vector<BinaryMask>& masks,
                            oracles::Inpainter& inpainter);
/// One inpainter call on the union of the masks; none if the union is empty.
RgbImage inpaint_merged(const RgbImage& image, const std::vector<BinaryMask>& masks,
                        oracles::Inpainter& inpainter);

/// Resolves `automatic`: merged when K >= 4 or any two masks overlap.
InpaintMode resolve_mode(InpaintMode requested, const std::vector<BinaryMask>& masks);

InteractionResult interact(const RgbImage& image, const PromptSet& prompts, oracles::Segmenter& segmenter,
                           oracles::Inpainter& inpainter, InpaintMode mode);

}  // namespace homer::prompts
