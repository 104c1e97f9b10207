// SPDX-License-Identifier: Apache-2.0
#include "homer/oracles.hpp"

#include <string>

#include "homer/error.hpp"

namespace homer::oracles {

RegionGrowSegmenter::RegionGrowSegmenter(double tol) : tol_(tol) {
  if (!(tol > 0.0)) fail(ErrorCode::invalid_argument, "region growing tolerance must be > 0");
}

BinaryMask RegionGrowSegmenter::segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                                        std::span<const PixelPoint> background) {
  return region_grow_segment(image, foreground, background, tol_);
}

DiffusionInpainter::DiffusionInpainter(int iterations) : iterations_(iterations) {
  if (iterations < 1) fail(ErrorCode::invalid_argument, "diffusion iterations must be >= 1");
}

RgbImage DiffusionInpainter::inpaint(const RgbImage& image, const BinaryMask& mask) {
  return diffusion_inpaint(image, mask, iterations_);
}

CheckedInpainter::CheckedInpainter(std::shared_ptr<Inpainter> inner) : inner_(std::move(inner)) {}

RgbImage CheckedInpainter::inpaint(const RgbImage& image, const BinaryMask& mask) {
  if (image.size() != mask.size()) {
    fail(ErrorCode::dimension_mismatch, "inpaint: mask and image sizes differ");
  }
  RgbImage out = inner_->inpaint(image, mask);
  if (out.size() != image.size()) {
    fail(ErrorCode::invariant_violation, name() + " returned an image of the wrong size");
  }
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask.get(x, y)) continue;
      const auto* a = image.pixel(x, y);
      const auto* b = out.pixel(x, y);
      if (a[0] != b[0] || a[1] != b[1] || a[2] != b[2]) {
        fail(ErrorCode::invariant_violation,
             name() + " modified unmasked pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      }
    }
  }
  return out;
}

CheckedSegmenter::CheckedSegmenter(std::shared_ptr<Segmenter> inner) : inner_(std::move(inner)) {}

BinaryMask CheckedSegmenter::segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                                     std::span<const PixelPoint> background) {
  BinaryMask m = inner_->segment(image, foreground, background);
  if (m.size() != image.size()) {
    fail(ErrorCode::invariant_violation, name() + " returned a mask of the wrong size");
  }
  for (const auto& p : foreground) {
    if (image.size().contains(p) && !m.get(p.x, p.y)) {
      fail(ErrorCode::prompt_conflict, name() + " left foreground point (" + std::to_string(p.x) +
                                           ", " + std::to_string(p.y) + ") outside the mask");
    }
  }
  return m;
}

namespace {

class SerialSegmenter final : public Segmenter {
 public:
  explicit SerialSegmenter(std::shared_ptr<Segmenter> inner) : inner_(std::move(inner)) {}
  BinaryMask segment(const RgbImage& image, std::span<const PixelPoint> fg,
                     std::span<const PixelPoint> bg) override {
    std::lock_guard lock(mutex_);
    return inner_->segment(image, fg, bg);
  }
  bool concurrent_safe() const override { return true; }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Segmenter> inner_;
  std::mutex mutex_;
};

class SerialInpainter final : public Inpainter {
 public:
  explicit SerialInpainter(std::shared_ptr<Inpainter> inner) : inner_(std::move(inner)) {}
  RgbImage inpaint(const RgbImage& image, const BinaryMask& mask) override {
    std::lock_guard lock(mutex_);
    return inner_->inpaint(image, mask);
  }
  bool concurrent_safe() const override { return true; }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Inpainter> inner_;
  std::mutex mutex_;
};

class SerialMatcher final : public Matcher {
 public:
  explicit SerialMatcher(std::shared_ptr<Matcher> inner) : inner_(std::move(inner)) {}
  MatchResult match(const RgbImage& a, const RgbImage& b, ViewPair pair) override {
    std::lock_guard lock(mutex_);
    return inner_->match(a, b, pair);
  }
  bool concurrent_safe() const override { return true; }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Matcher> inner_;
  std::mutex mutex_;
};

}  // namespace

std::shared_ptr<Segmenter> serialized(std::shared_ptr<Segmenter> inner) {
  if (inner->concurrent_safe()) return inner;
  return std::make_shared<SerialSegmenter>(std::move(inner));
}

std::shared_ptr<Inpainter> serialized(std::shared_ptr<Inpainter> inner) {
  if (inner->concurrent_safe()) return inner;
  return std::make_shared<SerialInpainter>(std::move(inner));
}

std::shared_ptr<Matcher> serialized(std::shared_ptr<Matcher> inner) {
  if (inner->concurrent_safe()) return inner;
  return std::make_shared<SerialMatcher>(std::move(inner));
}

OracleSet builtin_oracles(double region_tolerance, int diffusion_iterations, HarrisConfig harris) {
  return {std::make_shared<HarrisNccMatcher>(harris),
          std::make_shared<RegionGrowSegmenter>(region_tolerance),
          std::make_shared<DiffusionInpainter>(diffusion_iterations)};
}

}  // namespace homer::oracles
