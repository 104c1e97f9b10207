// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homer/geometry.hpp"
#include "homer/image.hpp"
#include "homer/oracles.hpp"
#include "homer/prompts.hpp"
#include "homer/refine.hpp"

namespace homer::pipeline {

struct ViewSet {
  std::vector<RgbImage> views;
  /// Opaque per-view camera records, copied to the export manifest. Either
  /// empty or one entry per view (null allowed).
  std::vector<nlohmann::json> poses;
  std::size_t source_index = 0;
  /// Where each view was loaded from; empty for in-memory sets.
  std::vector<std::string> image_paths;

  Size size() const { return views.empty() ? Size{} : views.front().size(); }
};

/// N_v >= 2, equal dimensions, source_index in range. Throws
/// Error{invalid_view_set}.
void validate(const ViewSet& vs);

struct OracleConfig {
  /// Subprocess commands; unset selects the built-in implementation.
  std::optional<std::string> matcher_command;
  std::optional<std::string> segmenter_command;
  std::optional<std::string> inpainter_command;
  double region_tolerance = oracles::kDefaultRegionTolerance;
  int diffusion_iterations = oracles::kDefaultDiffusionIterations;
  oracles::HarrisConfig harris;
};

struct PipelineConfig {
  /// Key views every n hops from the source; unset means never.
  std::optional<int> key_view_interval = 10;
  geometry::RansacConfig ransac;
  refine::AnchorConfig anchor;
  bool refine_enabled = true;
  prompts::InpaintMode inpaint_mode = prompts::InpaintMode::automatic;
  double min_pair_similarity = 0.05;
  double empty_fill_threshold = 0.6;
  /// Worker threads for pair estimation and the two propagation chains;
  /// 0 uses all cores.
  unsigned threads = 0;
  /// Keep the warped (pre-refinement) masks in the result.
  bool keep_coarse_masks = true;
  OracleConfig oracles;
};
void validate(const PipelineConfig& cfg);

enum class Provenance { source, warped, key_view, degraded };
std::string to_string(Provenance p);

/// Adjacent pairs oriented outward from the source: the forward chain
/// (s, s+1), ..., then the backward chain (s, s-1), ...
std::vector<oracles::ViewPair> plan_pairs(std::size_t view_count, std::size_t source_index);

struct PairEstimate {
  oracles::ViewPair pair;
  bool reliable = false;
  double similarity = 0.0;
  std::size_t correspondences = 0;
  std::optional<geometry::RansacResult> ransac;
  /// Hop used for propagation: the estimate, or identity when unreliable.
  geometry::Homography homography;
  std::string error;  ///< why the pair is unreliable
};

/// Calls the matcher and RANSAC for every planned pair, in parallel when the
/// matcher allows. Per-pair failures mark the pair unreliable. Throws
/// Error{pipeline_abort} when no pair touching the source is reliable.
std::vector<PairEstimate> estimate_all(const ViewSet& vs, oracles::Matcher& matcher, const PipelineConfig& cfg);

struct ObjectResult {
  BinaryMask mask;
  BinaryMask coarse;  ///< empty-sized unless keep_coarse_masks
  double loss = 0.0;
  double best_candidate_loss = 0.0;
  double radius = 0.0;
  int candidates = 0;
  bool refined = false;  ///< refine_mask ran and its mask was kept
  bool degraded = false;
  std::string error;
};

struct ViewResult {
  std::vector<ObjectResult> objects;  ///< object id k at index k-1
  RgbImage inpainted;
  Provenance provenance = Provenance::warped;
  std::size_t distance = 0;  ///< hops from the source
  bool key_view = false;
  /// Set when an upstream pair was unreliable.
  bool chain_degraded = false;
  bool mask_degraded = false;
  bool inpaint_degraded = false;
  int inpainter_calls = 0;
  std::vector<std::string> warnings;

  BinaryMask mask_union() const;
};

struct Progress {
  std::string stage;
  std::size_t views_done = 0;
  std::size_t views_total = 0;
};
/// May be invoked from worker threads.
using ProgressFn = std::function<void(const Progress&)>;

struct Timings {
  double interaction_s = 0.0;
  double estimation_s = 0.0;
  double masks_s = 0.0;
  double inpaint_s = 0.0;
  double total_s = 0.0;
};

struct PropagationResult {
  std::size_t source_index = 0;
  prompts::InpaintMode mode = prompts::InpaintMode::sequential;
  std::vector<PairEstimate> pairs;
  std::vector<ViewResult> views;
  Timings timings;

  bool any_degraded() const;
  std::vector<std::size_t> degraded_views() const;
};

/// Per-view refined masks, walking each chain outward from the source.
/// `result.views` must already hold the source masks and the chain flags.
void propagate_masks(const ViewSet& vs, const std::vector<PairEstimate>& pairs, oracles::Segmenter& segmenter,
                     const PipelineConfig& cfg, PropagationResult& result, const ProgressFn& progress = {});

/// Per-view inpainted images: warped content from the previous view with
/// M_empty filling, and direct inpainting at key views.
void propagate_inpaint(const ViewSet& vs, const std::vector<PairEstimate>& pairs, oracles::Inpainter& inpainter,
                       const PipelineConfig& cfg, PropagationResult& result, const ProgressFn& progress = {});

/// Full flow: interaction on prompts.view_index, pair estimation, mask and
/// inpainting propagation. Oracles are wrapped with contract checks and
/// serialized when they are not concurrent-safe.
PropagationResult run(const ViewSet& vs, const prompts::PromptSet& prompts, const oracles::OracleSet& oracles,
                      const PipelineConfig& cfg, const ProgressFn& progress = {});

// --- I/O ---------------------------------------------------------------------

/// {views:[{image_path, pose?}], source_index}; relative paths resolve against
/// the manifest's directory. Throws Error{io_error|parse_error|invalid_view_set}.
ViewSet load_view_set(const std::filesystem::path& manifest);

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults. Throws Error{parse_error}.
PipelineConfig config_from_json(const nlohmann::json& j);

/// Built-in or subprocess oracles per `cfg`.
oracles::OracleSet make_oracles(const OracleConfig& cfg);

/// Deterministic run report (no timings).
nlohmann::json build_report(const PropagationResult& result, const ViewSet& vs, const PipelineConfig& cfg);

/// Writes masks/, inpainted/, report.json, timings.json and
/// export/manifest.json under `out_dir`.
void write_outputs(const PropagationResult& result, const ViewSet& vs, const PipelineConfig& cfg,
                   const std::filesystem::path& out_dir);

/// Report for a run that aborted before producing views.
void write_abort_report(const std::filesystem::path& out_dir, const std::string& code, const std::string& message);

}  // namespace homer::pipeline
