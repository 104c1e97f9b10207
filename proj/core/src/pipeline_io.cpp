// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "homer/error.hpp"
#include "homer/io.hpp"
#include "homer/mask.hpp"
#include "homer/pipeline.hpp"
#include "homer/subprocess_oracle.hpp"

namespace homer::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON has no infinity; non-finite values are written as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json ransac_json(const geometry::RansacConfig& c) {
  return {{"inlier_threshold_px", c.inlier_threshold_px}, {"max_iterations", c.max_iterations},
          {"min_inlier_ratio", c.min_inlier_ratio}, {"rng_seed", c.rng_seed}, {"confidence", c.confidence}};
}

json sc_json(const mask::ShapeContextConfig& c) {
  return {{"boundary_samples", c.boundary_samples}, {"radial_bins", c.radial_bins},
          {"angular_bins", c.angular_bins}, {"r_inner", c.r_inner}, {"r_outer", c.r_outer},
          {"rng_seed", c.rng_seed}, {"population_cap", c.population_cap}};
}

json anchor_json(const refine::AnchorConfig& c) {
  return {{"alpha", c.alpha}, {"beta", c.beta}, {"prompt_count", c.prompt_count}, {"r_min_px", c.r_min_px},
          {"r_max_px", c.r_max_px ? json(*c.r_max_px) : json(nullptr)}, {"search_steps", c.search_steps},
          {"rejection_loss", c.rejection_loss}, {"sc", sc_json(c.sc)}};
}

json harris_json(const oracles::HarrisConfig& c) {
  return {{"max_points", c.max_points}, {"nms_radius", c.nms_radius}, {"patch_radius", c.patch_radius},
          {"harris_k", c.harris_k}, {"window_sigma", c.window_sigma}, {"relative_threshold", c.relative_threshold},
          {"min_ncc", c.min_ncc}, {"min_corners", c.min_corners}};
}

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

void read_optional_string(const json& j, const char* key, std::optional<std::string>& out) {
  if (!j.contains(key)) return;
  if (j[key].is_null()) out.reset();
  else out = j[key].get<std::string>();
}

json pair_json(const PairEstimate& pe) {
  json j = {{"from", pe.pair.from},
            {"to", pe.pair.to},
            {"reliable", pe.reliable},
            {"similarity", number(pe.similarity)},
            {"correspondences", pe.correspondences},
            {"homography", pe.homography.row_major()}};
  if (pe.ransac) {
    j["inliers"] = pe.ransac->inlier_indices.size();
    j["mean_inlier_error_px"] = number(pe.ransac->mean_inlier_error_px);
    j["iterations_used"] = pe.ransac->iterations_used;
  }
  if (!pe.error.empty()) j["error"] = pe.error;
  return j;
}

}  // namespace

ViewSet load_view_set(const fs::path& manifest) {
  const json j = io::read_json(manifest);
  ViewSet vs;
  const fs::path base = manifest.parent_path();
  try {
    bool any_pose = false;
    for (const auto& v : j.at("views")) {
      fs::path p = v.at("image_path").get<std::string>();
      if (p.is_relative()) p = base / p;
      vs.image_paths.push_back(p.string());
      vs.views.push_back(io::read_png(p));
      if (v.contains("pose")) any_pose = true;
      vs.poses.push_back(v.contains("pose") ? v["pose"] : json(nullptr));
    }
    if (!any_pose) vs.poses.clear();
    vs.source_index = j.value("source_index", std::size_t{0});
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, manifest.string() + ": " + e.what());
  }
  validate(vs);
  return vs;
}

json to_json(const PipelineConfig& cfg) {
  return {{"key_view_interval", cfg.key_view_interval ? json(*cfg.key_view_interval) : json("inf")},
          {"ransac", ransac_json(cfg.ransac)},
          {"anchor", anchor_json(cfg.anchor)},
          {"refine", cfg.refine_enabled},
          {"inpaint_mode", prompts::to_string(cfg.inpaint_mode)},
          {"min_pair_similarity", cfg.min_pair_similarity},
          {"empty_fill_threshold", cfg.empty_fill_threshold},
          {"threads", cfg.threads},
          {"keep_coarse_masks", cfg.keep_coarse_masks},
          {"oracles",
           {{"matcher_command", optional_string(cfg.oracles.matcher_command)},
            {"segmenter_command", optional_string(cfg.oracles.segmenter_command)},
            {"inpainter_command", optional_string(cfg.oracles.inpainter_command)},
            {"region_tolerance", cfg.oracles.region_tolerance},
            {"diffusion_iterations", cfg.oracles.diffusion_iterations},
            {"harris", harris_json(cfg.oracles.harris)}}}};
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig cfg;
  try {
    if (!j.is_object()) fail(ErrorCode::parse_error, "config must be a JSON object");
    if (j.contains("key_view_interval")) {
      const auto& n = j["key_view_interval"];
      if (n.is_null() || (n.is_string() && (n == "inf" || n == "infinity"))) cfg.key_view_interval.reset();
      else cfg.key_view_interval = n.get<int>();
    }
    if (j.contains("ransac")) {
      const auto& r = j["ransac"];
      read_into(r, "inlier_threshold_px", cfg.ransac.inlier_threshold_px);
      read_into(r, "max_iterations", cfg.ransac.max_iterations);
      read_into(r, "min_inlier_ratio", cfg.ransac.min_inlier_ratio);
      read_into(r, "rng_seed", cfg.ransac.rng_seed);
      read_into(r, "confidence", cfg.ransac.confidence);
    }
    if (j.contains("anchor")) {
      const auto& a = j["anchor"];
      read_into(a, "alpha", cfg.anchor.alpha);
      read_into(a, "beta", cfg.anchor.beta);
      read_into(a, "prompt_count", cfg.anchor.prompt_count);
      read_into(a, "r_min_px", cfg.anchor.r_min_px);
      if (a.contains("r_max_px")) {
        if (a["r_max_px"].is_null()) cfg.anchor.r_max_px.reset();
        else cfg.anchor.r_max_px = a["r_max_px"].get<double>();
      }
      read_into(a, "search_steps", cfg.anchor.search_steps);
      read_into(a, "rejection_loss", cfg.anchor.rejection_loss);
      if (a.contains("sc")) {
        const auto& s = a["sc"];
        read_into(s, "boundary_samples", cfg.anchor.sc.boundary_samples);
        read_into(s, "radial_bins", cfg.anchor.sc.radial_bins);
        read_into(s, "angular_bins", cfg.anchor.sc.angular_bins);
        read_into(s, "r_inner", cfg.anchor.sc.r_inner);
        read_into(s, "r_outer", cfg.anchor.sc.r_outer);
        read_into(s, "rng_seed", cfg.anchor.sc.rng_seed);
        read_into(s, "population_cap", cfg.anchor.sc.population_cap);
      }
    }
    read_into(j, "refine", cfg.refine_enabled);
    if (j.contains("inpaint_mode")) cfg.inpaint_mode = prompts::inpaint_mode_from_string(j["inpaint_mode"].get<std::string>());
    read_into(j, "min_pair_similarity", cfg.min_pair_similarity);
    read_into(j, "empty_fill_threshold", cfg.empty_fill_threshold);
    read_into(j, "threads", cfg.threads);
    read_into(j, "keep_coarse_masks", cfg.keep_coarse_masks);
    if (j.contains("oracles")) {
      const auto& o = j["oracles"];
      read_optional_string(o, "matcher_command", cfg.oracles.matcher_command);
      read_optional_string(o, "segmenter_command", cfg.oracles.segmenter_command);
      read_optional_string(o, "inpainter_command", cfg.oracles.inpainter_command);
      read_into(o, "region_tolerance", cfg.oracles.region_tolerance);
      read_into(o, "diffusion_iterations", cfg.oracles.diffusion_iterations);
      if (o.contains("harris")) {
        const auto& h = o["harris"];
        auto& hc = cfg.oracles.harris;
        read_into(h, "max_points", hc.max_points);
        read_into(h, "nms_radius", hc.nms_radius);
        read_into(h, "patch_radius", hc.patch_radius);
        read_into(h, "harris_k", hc.harris_k);
        read_into(h, "window_sigma", hc.window_sigma);
        read_into(h, "relative_threshold", hc.relative_threshold);
        read_into(h, "min_ncc", hc.min_ncc);
        read_into(h, "min_corners", hc.min_corners);
      }
    }
    validate(cfg);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::parse_error) throw;
    fail(ErrorCode::parse_error, std::string("config: ") + e.what());
  }
  return cfg;
}

oracles::OracleSet make_oracles(const OracleConfig& cfg) {
  auto set = oracles::builtin_oracles(cfg.region_tolerance, cfg.diffusion_iterations, cfg.harris);
  if (cfg.matcher_command) set.matcher = std::make_shared<oracles::SubprocessMatcher>(*cfg.matcher_command);
  if (cfg.segmenter_command) set.segmenter = std::make_shared<oracles::SubprocessSegmenter>(*cfg.segmenter_command);
  if (cfg.inpainter_command) set.inpainter = std::make_shared<oracles::SubprocessInpainter>(*cfg.inpainter_command);
  return set;
}

json build_report(const PropagationResult& result, const ViewSet& vs, const PipelineConfig& cfg) {
  json pairs = json::array();
  for (const auto& pe : result.pairs) pairs.push_back(pair_json(pe));
  json views = json::array();
  json warnings = json::array();
  std::size_t inpainter_calls = 0;
  for (std::size_t j = 0; j < result.views.size(); ++j) {
    const auto& v = result.views[j];
    json objects = json::array();
    for (std::size_t k = 0; k < v.objects.size(); ++k) {
      const auto& o = v.objects[k];
      json oj = {{"object_id", k + 1},
                 {"area", o.mask.area()},
                 {"loss", number(o.loss)},
                 {"refined", o.refined},
                 {"degraded", o.degraded}};
      if (o.coarse.size().pixel_count() > 0) oj["coarse_area"] = o.coarse.area();
      if (o.refined || o.degraded) {
        oj["best_candidate_loss"] = number(o.best_candidate_loss);
        oj["radius"] = number(o.radius);
        oj["candidates"] = o.candidates;
      }
      if (!o.error.empty()) oj["error"] = o.error;
      objects.push_back(oj);
    }
    views.push_back({{"index", j},
                     {"provenance", to_string(v.provenance)},
                     {"distance", v.distance},
                     {"key_view", v.key_view},
                     {"inpainter_calls", v.inpainter_calls},
                     {"objects", objects},
                     {"warnings", v.warnings}});
    inpainter_calls += static_cast<std::size_t>(v.inpainter_calls);
    for (const auto& w : v.warnings) warnings.push_back("view " + std::to_string(j) + ": " + w);
  }
  return {{"status", result.any_degraded() ? "degraded" : "ok"},
          {"view_count", vs.views.size()},
          {"width", vs.size().width},
          {"height", vs.size().height},
          {"source_index", result.source_index},
          {"inpaint_mode", prompts::to_string(result.mode)},
          {"config", to_json(cfg)},
          {"pairs", pairs},
          {"views", views},
          {"degraded_views", result.degraded_views()},
          {"inpainter_calls", inpainter_calls},
          {"warnings", warnings}};
}

void write_outputs(const PropagationResult& result, const ViewSet& vs, const PipelineConfig& cfg,
                   const fs::path& out_dir) {
  json export_views = json::array();
  for (std::size_t j = 0; j < result.views.size(); ++j) {
    const auto& v = result.views[j];
    for (std::size_t k = 0; k < v.objects.size(); ++k) {
      const std::string name = "view_" + std::to_string(j) + "_obj_" + std::to_string(k + 1) + ".png";
      io::write_mask_png(out_dir / "masks" / name, v.objects[k].mask);
      if (cfg.keep_coarse_masks && v.objects[k].coarse.size().pixel_count() > 0) {
        io::write_mask_png(out_dir / "masks_coarse" / name, v.objects[k].coarse);
      }
    }
    const std::string image_name = "inpainted/view_" + std::to_string(j) + ".png";
    io::write_png(out_dir / image_name, v.inpainted);
    json ev = {{"index", j}, {"inpainted_path", "../" + image_name}, {"provenance", to_string(v.provenance)}};
    if (j < vs.image_paths.size()) ev["source_image_path"] = vs.image_paths[j];
    if (j < vs.poses.size() && !vs.poses[j].is_null()) ev["pose"] = vs.poses[j];
    export_views.push_back(ev);
  }
  io::write_json(out_dir / "report.json", build_report(result, vs, cfg));
  io::write_json(out_dir / "export" / "manifest.json",
                 {{"views", export_views}, {"source_index", result.source_index},
                  {"width", vs.size().width}, {"height", vs.size().height}});
  const auto& t = result.timings;
  io::write_json(out_dir / "timings.json", {{"interaction_s", t.interaction_s}, {"estimation_s", t.estimation_s},
                                            {"masks_s", t.masks_s}, {"inpaint_s", t.inpaint_s},
                                            {"total_s", t.total_s}});
}

void write_abort_report(const fs::path& out_dir, const std::string& code, const std::string& message) {
  io::write_json(out_dir / "report.json", {{"status", "aborted"}, {"error", {{"code", code}, {"message", message}}}});
}

}  // namespace homer::pipeline
