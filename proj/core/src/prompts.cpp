// SPDX-License-Identifier: Apache-2.0
#include "homer/prompts.hpp"

#include <algorithm>
#include <set>

#include "homer/error.hpp"
#include "homer/mask.hpp"

namespace homer::prompts {

using nlohmann::json;

int PromptSet::object_count() const noexcept {
  int k = 0;
  for (const auto& p : foreground) k = std::max(k, p.object_id);
  return k;
}

std::vector<PixelPoint> PromptSet::points_for(int object_id) const {
  std::vector<PixelPoint> out;
  for (const auto& p : foreground) {
    if (p.object_id == object_id) out.push_back({p.x, p.y});
  }
  return out;
}

void validate(const PromptSet& prompts, Size image_size) {
  if (prompts.foreground.empty()) fail(ErrorCode::invalid_prompt, "at least one foreground point is required");
  std::set<int> ids;
  for (const auto& p : prompts.foreground) {
    if (!image_size.contains(p.x, p.y)) {
      fail(ErrorCode::invalid_prompt, "foreground point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                          ") lies outside the " + std::to_string(image_size.width) + "x" +
                                          std::to_string(image_size.height) + " image");
    }
    if (p.object_id < 1) fail(ErrorCode::invalid_prompt, "object_id must be >= 1");
    ids.insert(p.object_id);
  }
  const int k = *ids.rbegin();
  if (static_cast<int>(ids.size()) != k) {
    for (int id = 1; id <= k; ++id) {
      if (!ids.count(id)) {
        fail(ErrorCode::invalid_prompt,
             "object ids must be contiguous 1.." + std::to_string(k) + "; id " + std::to_string(id) + " has no point");
      }
    }
  }
  for (const auto& p : prompts.background) {
    if (!image_size.contains(p)) {
      fail(ErrorCode::invalid_prompt, "background point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                          ") lies outside the image");
    }
  }
}

json to_json(const PromptSet& prompts) {
  json fg = json::array();
  for (const auto& p : prompts.foreground) fg.push_back({{"x", p.x}, {"y", p.y}, {"object_id", p.object_id}});
  json bg = json::array();
  for (const auto& p : prompts.background) bg.push_back({{"x", p.x}, {"y", p.y}});
  json j = {{"view_index", prompts.view_index}, {"foreground", fg}, {"background", bg}};
  if (prompts.rect) {
    j["rect"] = {{"x", prompts.rect->x}, {"y", prompts.rect->y}, {"width", prompts.rect->width},
                 {"height", prompts.rect->height}};
  }
  return j;
}

PromptSet prompts_from_json(const json& j) {
  try {
    PromptSet p;
    p.view_index = j.value("view_index", std::size_t{0});
    for (const auto& f : j.at("foreground")) {
      p.foreground.push_back({f.at("x").get<int>(), f.at("y").get<int>(), f.value("object_id", 1)});
    }
    if (j.contains("background")) {
      for (const auto& b : j["background"]) p.background.push_back({b.at("x").get<int>(), b.at("y").get<int>()});
    }
    if (j.contains("rect") && !j["rect"].is_null()) {
      const auto& r = j["rect"];
      p.rect = Rect{r.at("x").get<int>(), r.at("y").get<int>(), r.at("width").get<int>(), r.at("height").get<int>()};
    }
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("prompts: ") + e.what());
  }
}

std::string to_string(InpaintMode mode) {
  switch (mode) {
    case InpaintMode::sequential: return "sequential";
    case InpaintMode::merged: return "merged";
    case InpaintMode::automatic: return "auto";
  }
  return "auto";
}

InpaintMode inpaint_mode_from_string(const std::string& s) {
  if (s == "sequential") return InpaintMode::sequential;
  if (s == "merged") return InpaintMode::merged;
  if (s == "auto" || s == "automatic") return InpaintMode::automatic;
  fail(ErrorCode::parse_error, "unknown inpaint mode '" + s + "' (expected sequential, merged or auto)");
}

std::vector<BinaryMask> segment_objects(const RgbImage& image, const PromptSet& prompts,
                                        oracles::Segmenter& segmenter) {
  validate(prompts, image.size());
  const int k = prompts.object_count();
  std::vector<BinaryMask> masks;
  masks.reserve(static_cast<std::size_t>(k));
  for (int id = 1; id <= k; ++id) {
    const auto fg = prompts.points_for(id);
    try {
      masks.push_back(segmenter.segment(image, fg, prompts.background));
    } catch (const Error& e) {
      fail(e.code(), "object " + std::to_string(id) + ": " + e.what());
    }
  }
  return masks;
}

RgbImage inpaint_sequential(const RgbImage& image, const std::vector<BinaryMask>& masks,
                            oracles::Inpainter& inpainter) {
  RgbImage current = image;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].size() != image.size()) {
      fail(ErrorCode::dimension_mismatch, "mask " + std::to_string(i + 1) + " does not match the image size");
    }
    try {
      current = inpainter.inpaint(current, masks[i]);
    } catch (const Error& e) {
      fail(e.code(), "inpainting step " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return current;
}

RgbImage inpaint_merged(const RgbImage& image, const std::vector<BinaryMask>& masks,
                        oracles::Inpainter& inpainter) {
  const BinaryMask all = mask::unite_all(masks, image.size());
  if (all.empty()) return image;
  return inpainter.inpaint(image, all);
}

InpaintMode resolve_mode(InpaintMode requested, const std::vector<BinaryMask>& masks) {
  if (requested != InpaintMode::automatic) return requested;
  if (masks.size() >= 4) return InpaintMode::merged;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      if (!mask::intersect(masks[i], masks[j]).empty()) return InpaintMode::merged;
    }
  }
  return InpaintMode::sequential;
}

InteractionResult interact(const RgbImage& image, const PromptSet& prompts, oracles::Segmenter& segmenter,
                           oracles::Inpainter& inpainter, InpaintMode mode) {
  InteractionResult r;
  r.masks = segment_objects(image, prompts, segmenter);
  r.mode = resolve_mode(mode, r.masks);
  r.inpainted_source = r.mode == InpaintMode::merged ? inpaint_merged(image, r.masks, inpainter)
                                                     : inpaint_sequential(image, r.masks, inpainter);
  return r;
}

}  // namespace homer::prompts
