// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homer/image.hpp"

namespace homer::metrics {

inline constexpr double kPsnrCapDb = 99.0;

/// 10*log10(255^2 / MSE) over `region` (whole frame when absent), capped at
/// kPsnrCapDb. Throws Error{dimension_mismatch|empty_region}.
double psnr(const RgbImage& a, const RgbImage& b, const BinaryMask* region = nullptr);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) on luma.
/// Throws Error{dimension_mismatch|too_small}.
double ssim(const RgbImage& a, const RgbImage& b);

/// ITU-R BT.601 luma.
std::vector<double> luma(const RgbImage& image);

struct ViewMetrics {
  std::size_t index = 0;
  std::string provenance;
  std::vector<std::optional<double>> iou;  ///< per object; unset when gt is missing
  std::optional<double> psnr_db;
  std::optional<double> psnr_masked_db;  ///< over the ground-truth mask union
  std::optional<double> ssim;
  std::vector<std::string> errors;
};

/// Metrics of one view against its ground truth. Objects beyond either list
/// are left unset.
ViewMetrics evaluate_view(std::size_t index, const RgbImage& inpainted, const std::vector<BinaryMask>& masks,
                          const RgbImage& clean, const std::vector<BinaryMask>& gt_masks);

struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
};

struct EvalReport {
  std::vector<ViewMetrics> views;
  Aggregate iou, psnr_db, psnr_masked_db, ssim;
  std::vector<std::string> errors;
};

/// Recomputes the aggregates from the per-view entries.
void aggregate(EvalReport& report);

nlohmann::json to_json(const EvalReport& report);
std::string to_csv(const EvalReport& report);

/// Reads a run directory (report.json, masks/, inpainted/) and a ground-truth
/// directory (clean/, masks/; a scene root containing gt/ is accepted too).
/// Missing ground truth is collected per view. Throws Error{missing_ground_truth}
/// when the ground-truth directory does not exist and Error{io_error} when the
/// run report is unreadable.
EvalReport evaluate_run(const std::filesystem::path& run_dir, const std::filesystem::path& gt_dir);

/// Writes report.json and report.csv into `out_dir`.
void write_eval(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace homer::metrics
