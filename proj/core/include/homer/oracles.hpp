// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "homer/geometry.hpp"
#include "homer/image.hpp"

namespace homer::oracles {

struct MatchResult {
  std::vector<geometry::Correspondence> correspondences;
  /// Fraction of mutually consistent matches in [0, 1]; 0 iff no matches.
  double similarity = 0.0;
};

/// Identifies the two views being matched, for matchers that key on view
/// identity (ground-truth oracles, per-view caches).
struct ViewPair {
  std::size_t from = 0;
  std::size_t to = 0;
};

/// Point-prompted segmentation model.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  /// Returns a mask of the image's size that contains every foreground point,
  /// or throws Error{prompt_conflict}.
  virtual BinaryMask segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                             std::span<const PixelPoint> background) = 0;
  virtual bool concurrent_safe() const { return true; }
  virtual std::string name() const = 0;
};

/// Mask-guided inpainting model. Pixels where the mask is 0 must come back
/// unchanged.
class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual RgbImage inpaint(const RgbImage& image, const BinaryMask& mask) = 0;
  virtual bool concurrent_safe() const { return true; }
  virtual std::string name() const = 0;
};

/// Two-view keypoint matcher. Coordinates lie inside the respective images.
class Matcher {
 public:
  virtual ~Matcher() = default;
  virtual MatchResult match(const RgbImage& a, const RgbImage& b, ViewPair pair) = 0;
  virtual bool concurrent_safe() const { return true; }
  virtual std::string name() const = 0;
};

// --- built-in classical implementations ------------------------------------

inline constexpr double kDefaultRegionTolerance = 12.0;
inline constexpr int kDefaultDiffusionIterations = 2000;

/// Region growing from each foreground seed: a 4-neighbour joins when its RGB
/// distance to the running region mean is <= tol. Growth of a seed stops
/// before it would cover a background point. Union over seeds.
BinaryMask region_grow_segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                               std::span<const PixelPoint> background,
                               double tol = kDefaultRegionTolerance);

/// Harmonic fill of masked pixels by Jacobi sweeps of the 4-neighbour mean.
/// Each masked component starts at the mean of its unmasked border pixels.
RgbImage diffusion_inpaint(const RgbImage& image, const BinaryMask& mask,
                           int iterations = kDefaultDiffusionIterations);

struct HarrisConfig {
  int max_points = 500;
  int nms_radius = 8;
  int patch_radius = 5;  ///< 11x11 NCC patches
  double harris_k = 0.04;
  double window_sigma = 1.5;
  /// Fraction of the strongest response a corner must exceed. Harris
  /// responses grow with contrast^4, so a nonzero value lets a few
  /// high-contrast edges hide all texture corners; 0 keeps the top max_points.
  double relative_threshold = 0.0;
  double min_ncc = 0.5;
  std::size_t min_corners = 8;
};

struct Corner {
  PixelPoint at;
  double response = 0.0;
};

/// Top `max_points` Harris corners after radius non-max suppression, strongest
/// first.
std::vector<Corner> detect_harris_corners(const RgbImage& image, const HarrisConfig& cfg);

/// Mutual-best NCC matching of Harris corners. Throws
/// Error{insufficient_texture} when either image has fewer than
/// cfg.min_corners corners.
MatchResult match_harris_ncc(const RgbImage& a, const RgbImage& b, const HarrisConfig& cfg = {});

class RegionGrowSegmenter final : public Segmenter {
 public:
  explicit RegionGrowSegmenter(double tol = kDefaultRegionTolerance);
  BinaryMask segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                     std::span<const PixelPoint> background) override;
  std::string name() const override { return "builtin-region-grow"; }

 private:
  double tol_;
};

class DiffusionInpainter final : public Inpainter {
 public:
  explicit DiffusionInpainter(int iterations = kDefaultDiffusionIterations);
  RgbImage inpaint(const RgbImage& image, const BinaryMask& mask) override;
  std::string name() const override { return "builtin-diffusion"; }

 private:
  int iterations_;
};

/// Harris/NCC matcher. Corner features are cached per view index for the
/// lifetime of the object, so one instance must not be reused across
/// different view sets.
class HarrisNccMatcher final : public Matcher {
 public:
  explicit HarrisNccMatcher(HarrisConfig cfg = {});
  ~HarrisNccMatcher() override;
  MatchResult match(const RgbImage& a, const RgbImage& b, ViewPair pair) override;
  std::string name() const override { return "builtin-harris-ncc"; }

  struct Features;

 private:
  std::shared_ptr<const Features> features_for(const RgbImage& image, std::size_t view);

  HarrisConfig cfg_;
  std::mutex mutex_;
  std::map<std::size_t, std::shared_ptr<const Features>> cache_;
};

// --- wrappers ---------------------------------------------------------------

/// Enforces the inpainter contract: output size matches and every mask=0 pixel
/// is bit-identical to the input. Violations throw Error{invariant_violation}.
class CheckedInpainter final : public Inpainter {
 public:
  explicit CheckedInpainter(std::shared_ptr<Inpainter> inner);
  RgbImage inpaint(const RgbImage& image, const BinaryMask& mask) override;
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Inpainter> inner_;
};

/// Enforces the segmenter contract (mask size, foreground coverage).
class CheckedSegmenter final : public Segmenter {
 public:
  explicit CheckedSegmenter(std::shared_ptr<Segmenter> inner);
  BinaryMask segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                     std::span<const PixelPoint> background) override;
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<Segmenter> inner_;
};

/// Serializes calls to oracles that declare themselves serial-only; returns
/// `inner` unchanged when it is already concurrent-safe.
std::shared_ptr<Segmenter> serialized(std::shared_ptr<Segmenter> inner);
std::shared_ptr<Inpainter> serialized(std::shared_ptr<Inpainter> inner);
std::shared_ptr<Matcher> serialized(std::shared_ptr<Matcher> inner);

/// Bundle consumed by the pipeline.
struct OracleSet {
  std::shared_ptr<Matcher> matcher;
  std::shared_ptr<Segmenter> segmenter;
  std::shared_ptr<Inpainter> inpainter;
};

/// Built-in classical oracles with default parameters.
OracleSet builtin_oracles(double region_tolerance = kDefaultRegionTolerance,
                          int diffusion_iterations = kDefaultDiffusionIterations,
                          HarrisConfig harris = {});

}  // namespace homer::oracles
