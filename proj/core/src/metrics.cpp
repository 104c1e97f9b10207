// SPDX-License-Identifier: Apache-2.0
#include "homer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "homer/error.hpp"
#include "homer/io.hpp"
#include "homer/mask.hpp"

namespace homer::metrics {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= total;
  return k;
}

// Valid-mode separable filtering: output is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[static_cast<std::size_t>(i)] * row[x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void accumulate(Aggregate& agg, double v) {
  if (agg.count == 0) {
    agg.min = v;
    agg.mean = 0.0;
  }
  agg.min = std::min(agg.min, v);
  agg.mean += v;
  ++agg.count;
}

json aggregate_json(const Aggregate& a) {
  if (a.count == 0) return {{"count", 0}, {"mean", nullptr}, {"min", nullptr}};
  return {{"count", a.count}, {"mean", a.mean}, {"min", a.min}};
}

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

double psnr(const RgbImage& a, const RgbImage& b, const BinaryMask* region) {
  if (a.size() != b.size()) fail(ErrorCode::dimension_mismatch, "psnr: image sizes differ");
  if (region && region->size() != a.size()) fail(ErrorCode::dimension_mismatch, "psnr: region size differs");
  const auto pa = a.bytes(), pb = b.bytes();
  double sse = 0.0;
  std::size_t n = 0;
  const std::size_t pixels = a.size().pixel_count();
  for (std::size_t i = 0; i < pixels; ++i) {
    if (region && !region->bits()[i]) continue;
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = static_cast<double>(pa[3 * i + c]) - static_cast<double>(pb[3 * i + c]);
      sse += d * d;
    }
    n += 3;
  }
  if (n == 0) fail(ErrorCode::empty_region, "psnr: empty region");
  const double mse = sse / static_cast<double>(n);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(255.0 * 255.0 / mse));
}

std::vector<double> luma(const RgbImage& image) {
  std::vector<double> y(image.size().pixel_count());
  const auto p = image.bytes();
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2];
  }
  return y;
}

double ssim(const RgbImage& a, const RgbImage& b) {
  if (a.size() != b.size()) fail(ErrorCode::dimension_mismatch, "ssim: image sizes differ");
  const int w = a.width(), h = a.height();
  if (w < kWindow || h < kWindow) fail(ErrorCode::too_small, "ssim: images must be at least 11x11");
  const auto ya = luma(a), yb = luma(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto k = gaussian_kernel();
  const auto mu_a = filter_valid(ya, w, h, k), mu_b = filter_valid(yb, w, h, k);
  const auto e_aa = filter_valid(aa, w, h, k), e_bb = filter_valid(bb, w, h, k), e_ab = filter_valid(ab, w, h, k);
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

ViewMetrics evaluate_view(std::size_t index, const RgbImage& inpainted, const std::vector<BinaryMask>& masks,
                          const RgbImage& clean, const std::vector<BinaryMask>& gt_masks) {
  ViewMetrics v;
  v.index = index;
  const std::size_t k = std::max(masks.size(), gt_masks.size());
  for (std::size_t i = 0; i < k; ++i) {
    if (i < masks.size() && i < gt_masks.size()) v.iou.push_back(mask::iou(masks[i], gt_masks[i]));
    else v.iou.push_back(std::nullopt);
  }
  v.psnr_db = psnr(inpainted, clean);
  const BinaryMask gt_union = mask::unite_all(gt_masks, clean.size());
  if (!gt_union.empty()) v.psnr_masked_db = psnr(inpainted, clean, &gt_union);
  v.ssim = ssim(inpainted, clean);
  return v;
}

void aggregate(EvalReport& report) {
  report.iou = report.psnr_db = report.psnr_masked_db = report.ssim = Aggregate{};
  for (const auto& v : report.views) {
    for (const auto& i : v.iou) {
      if (i) accumulate(report.iou, *i);
    }
    if (v.psnr_db) accumulate(report.psnr_db, *v.psnr_db);
    if (v.psnr_masked_db) accumulate(report.psnr_masked_db, *v.psnr_masked_db);
    if (v.ssim) accumulate(report.ssim, *v.ssim);
  }
  for (Aggregate* a : {&report.iou, &report.psnr_db, &report.psnr_masked_db, &report.ssim}) {
    if (a->count) a->mean /= static_cast<double>(a->count);
  }
}

json to_json(const EvalReport& report) {
  json views = json::array();
  for (const auto& v : report.views) {
    json iou = json::array();
    for (const auto& i : v.iou) iou.push_back(optional_number(i));
    json vj = {{"index", v.index}, {"provenance", v.provenance}, {"iou", iou},
               {"psnr_db", optional_number(v.psnr_db)}, {"psnr_masked_db", optional_number(v.psnr_masked_db)},
               {"ssim", optional_number(v.ssim)}};
    if (!v.errors.empty()) vj["errors"] = v.errors;
    views.push_back(vj);
  }
  return {{"views", views},
          {"aggregates",
           {{"iou", aggregate_json(report.iou)},
            {"psnr_db", aggregate_json(report.psnr_db)},
            {"psnr_masked_db", aggregate_json(report.psnr_masked_db)},
            {"ssim", aggregate_json(report.ssim)}}},
          {"errors", report.errors}};
}

std::string to_csv(const EvalReport& report) {
  std::size_t k = 0;
  for (const auto& v : report.views) k = std::max(k, v.iou.size());
  std::ostringstream os;
  os << "index,provenance";
  for (std::size_t i = 0; i < k; ++i) os << ",iou_" << (i + 1);
  os << ",psnr_db,psnr_masked_db,ssim\n";
  for (const auto& v : report.views) {
    os << v.index << ',' << v.provenance;
    for (std::size_t i = 0; i < k; ++i) os << ',' << (i < v.iou.size() ? csv_number(v.iou[i]) : "");
    os << ',' << csv_number(v.psnr_db) << ',' << csv_number(v.psnr_masked_db) << ',' << csv_number(v.ssim) << '\n';
  }
  return os.str();
}

EvalReport evaluate_run(const fs::path& run_dir, const fs::path& gt_dir_in) {
  fs::path gt_dir = gt_dir_in;
  if (fs::is_directory(gt_dir / "gt")) gt_dir /= "gt";
  if (!fs::is_directory(gt_dir)) fail(ErrorCode::missing_ground_truth, "no ground-truth directory at " + gt_dir_in.string());
  const json run = io::read_json(run_dir / "report.json");
  if (!run.contains("views")) fail(ErrorCode::io_error, (run_dir / "report.json").string() + " has no views");
  EvalReport report;
  for (const auto& vj : run["views"]) {
    const std::size_t j = vj.at("index").get<std::size_t>();
    const std::size_t k = vj.at("objects").size();
    const std::string view = "view_" + std::to_string(j);
    ViewMetrics m;
    m.index = j;
    m.provenance = vj.value("provenance", std::string{});
    try {
      const RgbImage inpainted = io::read_png(run_dir / "inpainted" / (view + ".png"));
      std::vector<BinaryMask> masks;
      for (std::size_t i = 1; i <= k; ++i) {
        masks.push_back(io::read_mask_png(run_dir / "masks" / (view + "_obj_" + std::to_string(i) + ".png")));
      }
      const fs::path clean_path = gt_dir / "clean" / (view + ".png");
      if (!fs::exists(clean_path)) fail(ErrorCode::missing_ground_truth, "missing " + clean_path.string());
      const RgbImage clean = io::read_png(clean_path);
      std::vector<BinaryMask> gt_masks;
      for (std::size_t i = 1;; ++i) {
        const fs::path p = gt_dir / "masks" / (view + "_obj_" + std::to_string(i) + ".png");
        if (!fs::exists(p)) break;
        gt_masks.push_back(io::read_mask_png(p));
      }
      if (gt_masks.size() < k) m.errors.push_back("ground truth has " + std::to_string(gt_masks.size()) + " masks, run has " + std::to_string(k));
      auto vm = evaluate_view(j, inpainted, masks, clean, gt_masks);
      vm.provenance = m.provenance;
      vm.errors = m.errors;
      m = std::move(vm);
    } catch (const Error& e) {
      m.errors.push_back(std::string(to_string(e.code())) + ": " + e.what());
    }
    for (const auto& e : m.errors) report.errors.push_back(view + ": " + e);
    report.views.push_back(std::move(m));
  }
  aggregate(report);
  return report;
}

void write_eval(const EvalReport& report, const fs::path& out_dir) {
  io::write_json(out_dir / "report.json", to_json(report));
  io::write_text(out_dir / "report.csv", to_csv(report));
}

}  // namespace homer::metrics
