// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "homer/geometry.hpp"
#include "homer/image.hpp"
#include "homer/oracles.hpp"
#include "homer/prompts.hpp"

namespace homer::scenegen {

using geometry::Homography;

struct NoiseOctave {
  double period = 64.0;     ///< lattice spacing in plane pixels
  double amplitude = 20.0;  ///< peak deviation in 0..255 units
};

struct TextureSpec {
  enum class Kind { value_noise, checker };
  Kind kind = Kind::value_noise;
  Rgb base{128, 118, 104};
  std::vector<NoiseOctave> octaves{{128, 34}, {64, 22}, {32, 12}, {16, 7}, {8, 5}};
  double checker_cell = 32.0;
  Rgb checker_a{90, 90, 90};
  Rgb checker_b{170, 170, 170};
};

struct ObjectSpec {
  enum class Shape { disk, rectangle, polygon };
  Shape shape = Shape::disk;
  Rgb color{220, 30, 30};
  Point2 center;                ///< plane coordinates
  double radius = 20.0;         ///< disk
  Point2 half_size{20.0, 10.0}; ///< rectangle
  double angle_deg = 0.0;       ///< rectangle
  std::vector<Point2> vertices; ///< polygon, offsets from center, convex
};

/// Plane-to-image map T(c) * [[s R, t], [p^T, 1]] * T(-c) about the frame
/// center c.
struct CameraPose {
  double tx = 0.0;
  double ty = 0.0;
  double rotation_deg = 0.0;
  double scale = 1.0;
  double px = 0.0;
  double py = 0.0;
};

struct CameraBounds {
  double max_translation_frac = 0.15;  ///< of the frame width
  double max_rotation_deg = 20.0;
  double max_perspective = 1e-4;
  double min_scale = 0.92;
  double max_scale = 1.08;
};

struct SceneSpec {
  int width = 512;
  int height = 512;
  int n_views = 20;
  std::uint64_t seed = 0;
  TextureSpec texture;
  std::vector<ObjectSpec> objects;
  /// Explicit path endpoints; when unset both are drawn from `bounds`.
  std::optional<std::pair<CameraPose, CameraPose>> path;
  CameraBounds bounds;
  std::size_t source_index = 0;
};

void validate(const SceneSpec& spec);
nlohmann::json to_json(const SceneSpec& spec);
/// Throws Error{parse_error}.
SceneSpec scene_spec_from_json(const nlohmann::json& j);

/// Three objects (disk, rotated rectangle, convex polygon) in distinct
/// saturated colours over value noise, with a random camera path.
SceneSpec standard_scene_spec(std::uint64_t seed, int n_views = 20, Size size = {512, 512});

Homography pose_homography(const CameraPose& pose, Size size);

/// Geometry only: what the ground-truth matcher needs.
struct SceneGeometry {
  Size size;
  std::vector<Homography> view_from_plane;
  /// Maps view i to view j.
  Homography between(std::size_t i, std::size_t j) const;
  std::size_t view_count() const noexcept { return view_from_plane.size(); }
};

SceneGeometry scene_geometry(const SceneSpec& spec);

struct RenderedView {
  RgbImage image;
  RgbImage clean;
  std::vector<BinaryMask> masks;  ///< object k at index k-1
};

struct SyntheticScene {
  SceneSpec spec;
  SceneGeometry geometry;
  std::vector<RenderedView> views;
  /// view j -> view j+1
  std::vector<Homography> gt_adjacent;
};

RenderedView render_view(const SceneSpec& spec, const Homography& view_from_plane);
/// Renders every view; `threads` = 0 uses all cores.
SyntheticScene generate(const SceneSpec& spec, unsigned threads = 0);

/// One foreground point per object at its plane center mapped into `view`,
/// plus nothing in the background. Objects whose center leaves the frame
/// are skipped.
prompts::PromptSet default_prompts(const SyntheticScene& scene, std::size_t view);

/// Writes manifest.json, views/, gt/{clean,masks}/, gt/homographies.json,
/// scene.json and prompts.json under `dir`. Returns the manifest path.
std::filesystem::path write_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

struct PerturbConfig {
  std::size_t n_points = 100;
  double outlier_ratio = 0.0;
  double noise_px = 0.0;
  std::uint64_t seed = 0;
  /// Pairs (from, to) whose correspondences are all outliers.
  std::set<std::pair<std::size_t, std::size_t>> fault_pairs;
};

/// Samples points in view i whose ground-truth image in view j lies in frame,
/// adds Gaussian noise to the targets and replaces exactly
/// round(outlier_ratio * n) of them with uniform random targets.
oracles::MatchResult synthetic_exact_matcher(const SceneGeometry& scene, std::size_t i, std::size_t j,
                                             const PerturbConfig& cfg);

/// One MatchResult per adjacent pair (j, j+1).
std::vector<oracles::MatchResult> perturb(const SceneGeometry& scene, const PerturbConfig& cfg);

/// Matcher interface over synthetic_exact_matcher; keys on view indices.
class GroundTruthMatcher final : public oracles::Matcher {
 public:
  GroundTruthMatcher(SceneGeometry scene, PerturbConfig cfg) : scene_(std::move(scene)), cfg_(std::move(cfg)) {}
  oracles::MatchResult match(const RgbImage& a, const RgbImage& b, oracles::ViewPair pair) override;
  std::string name() const override { return "synthetic-ground-truth"; }

 private:
  SceneGeometry scene_;
  PerturbConfig cfg_;
};

}  // namespace homer::scenegen
