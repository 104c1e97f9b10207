// SPDX-License-Identifier: Apache-2.0
#include "homer/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

#include "homer/error.hpp"
#include "homer/mask.hpp"

namespace homer::refine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PointLess {
  bool operator()(const std::vector<PixelPoint>& a, const std::vector<PixelPoint>& b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](PixelPoint p, PixelPoint q) { return std::pair(p.y, p.x) < std::pair(q.y, q.x); });
  }
};

double loss_against(const BinaryMask& refined, const BinaryMask& coarse, const mask::ShapeDescriptor* coarse_desc,
                    const AnchorConfig& cfg) {
  const bool re = refined.empty(), ce = coarse.empty();
  if (re && ce) return 0.0;
  if (re || ce) return kInf;
  const double iou_term = cfg.alpha * (1.0 - mask::iou(refined, coarse));
  if (cfg.beta == 0.0) return iou_term;
  const auto rd = mask::describe_shape(refined, cfg.sc);
  const double sc = coarse_desc ? mask::descriptor_distance(rd, *coarse_desc)
                                : mask::descriptor_distance(rd, mask::describe_shape(coarse, cfg.sc));
  return iou_term + cfg.beta * sc;
}

}  // namespace

void validate(const AnchorConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0) || cfg.alpha + cfg.beta <= 0.0) {
    fail(ErrorCode::invalid_argument, "anchor: alpha and beta must be >= 0 with a positive sum");
  }
  if (cfg.prompt_count < 1) fail(ErrorCode::invalid_argument, "anchor: prompt_count must be >= 1");
  if (cfg.search_steps < 1) fail(ErrorCode::invalid_argument, "anchor: search_steps must be >= 1");
  if (!(cfg.r_min_px >= 0.0)) fail(ErrorCode::invalid_argument, "anchor: r_min_px must be >= 0");
  if (cfg.r_max_px && !(*cfg.r_max_px > cfg.r_min_px)) {
    fail(ErrorCode::invalid_argument, "anchor: r_max_px must exceed r_min_px");
  }
  if (!(cfg.rejection_loss >= 0.0)) fail(ErrorCode::invalid_argument, "anchor: rejection_loss must be >= 0");
  mask::validate(cfg.sc);
}

std::vector<PixelPoint> circle_prompts(Point2 center, double r, int count, Size image_size) {
  if (count < 1) fail(ErrorCode::invalid_argument, "circle_prompts: count must be >= 1");
  if (!(r >= 0.0)) fail(ErrorCode::invalid_argument, "circle_prompts: radius must be >= 0");
  if (image_size.width <= 0 || image_size.height <= 0) fail(ErrorCode::invalid_argument, "circle_prompts: empty frame");
  auto clamp_round = [&](double x, double y) {
    return PixelPoint{std::clamp(static_cast<int>(std::lround(x)), 0, image_size.width - 1),
                      std::clamp(static_cast<int>(std::lround(y)), 0, image_size.height - 1)};
  };
  std::vector<PixelPoint> out{clamp_round(center.x, center.y)};
  for (int j = 0; j < count; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / count;
    const PixelPoint p = clamp_round(center.x + r * std::cos(theta), center.y + r * std::sin(theta));
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

double refinement_loss(const BinaryMask& refined, const BinaryMask& coarse, const AnchorConfig& cfg) {
  return loss_against(refined, coarse, nullptr, cfg);
}

RefineOutcome refine_mask(const RgbImage& view_image, const BinaryMask& coarse,
                          std::span<const PixelPoint> background, oracles::Segmenter& segmenter,
                          const AnchorConfig& cfg) {
  validate(cfg);
  if (coarse.size() != view_image.size()) fail(ErrorCode::dimension_mismatch, "refine: coarse mask size");
  RefineOutcome out;
  if (coarse.empty()) {
    out.refined_mask = coarse;
    return out;
  }
  const Point2 center = mask::centroid(coarse);
  const double r_lo = cfg.r_min_px;
  const double r_auto = 1.5 * std::sqrt(static_cast<double>(coarse.area()) / std::numbers::pi);
  const double r_hi = cfg.r_max_px ? *cfg.r_max_px : std::max(r_auto, r_lo + 1.0);
  const auto coarse_desc = cfg.beta != 0.0 ? std::optional(mask::describe_shape(coarse, cfg.sc)) : std::nullopt;

  struct Segmented {
    std::optional<BinaryMask> mask;
    double loss = kInf;
  };
  std::map<std::vector<PixelPoint>, Segmented, PointLess> by_prompt;

  struct Candidate {
    double radius;
    double loss;
    const Segmented* result;
  };
  std::vector<Candidate> evaluated;

  auto evaluate = [&](double r) -> double {
    auto prompts = circle_prompts(center, r, cfg.prompt_count, view_image.size());
    auto it = by_prompt.find(prompts);
    if (it == by_prompt.end()) {
      Segmented s;
      ++out.segmenter_calls;
      try {
        BinaryMask m = segmenter.segment(view_image, prompts, background);
        if (m.size() == view_image.size() && !m.empty()) {
          s.loss = loss_against(m, coarse, coarse_desc ? &*coarse_desc : nullptr, cfg);
          s.mask = std::move(m);
        }
      } catch (const Error&) {
        // scored as +inf; SegmenterFailed is raised only if every candidate fails
      }
      it = by_prompt.emplace(std::move(prompts), std::move(s)).first;
    }
    evaluated.push_back({r, it->second.loss, &it->second});
    return it->second.loss;
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = r_lo, b = r_hi;
  if (cfg.search_steps == 1) {
    evaluate(0.5 * (a + b));
  } else {
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = evaluate(c);
    double fd = evaluate(d);
    for (int step = 2; step < cfg.search_steps; ++step) {
      // ties keep the lower interval so smaller radii are preferred
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = evaluate(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = evaluate(d);
      }
    }
  }
  out.candidates_evaluated = static_cast<int>(evaluated.size());

  const Candidate* best = nullptr;
  for (const auto& cand : evaluated) {
    if (!cand.result->mask) continue;
    if (!best || cand.loss < best->loss || (cand.loss == best->loss && cand.radius < best->radius)) best = &cand;
  }
  if (!best) {
    fail(ErrorCode::segmenter_failed,
         "refine: all " + std::to_string(evaluated.size()) + " anchor candidates failed to produce a mask");
  }
  out.best_candidate_loss = best->loss;
  out.radius = best->radius;
  if (!(best->loss <= cfg.rejection_loss)) {
    out.refined_mask = coarse;
    out.loss = refinement_loss(coarse, coarse, cfg);
    out.degraded = true;
    return out;
  }
  out.refined_mask = *best->result->mask;
  out.loss = best->loss;
  return out;
}

}  // namespace homer::refine
