// SPDX-License-Identifier: Apache-2.0
// Acceptance harness: one PASS/FAIL line per criterion on stdout, exit status
// 1 when any criterion fails. Progress goes to stderr.
#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fakes.hpp"
#include "homer/error.hpp"
#include "homer/geometry.hpp"
#include "homer/log.hpp"
#include "homer/mask.hpp"
#include "homer/metrics.hpp"
#include "homer/pipeline.hpp"
#include "homer/scenegen.hpp"
#include "homer/shape_context.hpp"
#include "reference.hpp"

using namespace homer;
using Clock = std::chrono::steady_clock;

namespace {

// --- pinned tolerances -------------------------------------------------------
constexpr int kRansacTrials = 50;
constexpr std::size_t kRansacPoints = 100;
constexpr double kRansacNoisePx = 0.5;
constexpr double kRansacOutlierRatio = 0.3;
constexpr double kRansacThresholdPx = 3.0;
constexpr double kRansacMaxMeanErrorPx = 1.0;
constexpr double kRansacMinInlierRecall = 0.95;
constexpr double kRansacMaxSeconds = 5.0;

constexpr double kWarpMinMeanIou = 0.95;
constexpr double kRefinedMinMeanIou = 0.90;
constexpr double kSweepMinGapDb = 1.0;
constexpr double kMinMaskedPsnrDb = 25.0;
constexpr double kMinSsim = 0.90;
constexpr double kMaxRunSeconds = 60.0;
constexpr double kMaxPeakBytes = 8.0 * 1024 * 1024 * 1024;
constexpr double kMaxHdEstimationSeconds = 30.0;
constexpr double kLossTolerance = 1e-9;

constexpr std::uint64_t kSuiteSeeds[] = {1, 2, 3};
constexpr int kSuiteViews = 20;
constexpr int kSweepViews = 40;
constexpr int kHdViews = 75;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void progress(const std::string& msg) { std::fprintf(stderr, "[acceptance] %s\n", msg.c_str()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Run {
  std::string label;
  pipeline::ViewSet views;
  pipeline::PipelineConfig config;
  pipeline::PropagationResult result;
  double seconds = 0.0;
};

pipeline::ViewSet view_set_of(const scenegen::SyntheticScene& s) {
  pipeline::ViewSet vs;
  for (const auto& v : s.views) vs.views.push_back(v.image);
  return vs;
}

Run run_builtin(std::string label, pipeline::ViewSet vs, const prompts::PromptSet& p, pipeline::PipelineConfig cfg) {
  Run r;
  r.label = std::move(label);
  r.views = std::move(vs);
  r.config = cfg;
  const auto t0 = Clock::now();
  r.result = pipeline::run(r.views, p, pipeline::make_oracles(cfg.oracles), cfg);
  r.seconds = seconds_since(t0);
  progress(fmt("%s: %.2f s", r.label.c_str(), r.seconds));
  return r;
}

// --- AC1 ---------------------------------------------------------------------
Verdict homography_recovery() {
  double worst_error = 0.0, worst_recall = 1.0, total_s = 0.0;
  int failures = 0;
  for (int trial = 0; trial < kRansacTrials; ++trial) {
    const auto gt = testing::random_homography(1000 + trial, 640, 480);
    std::mt19937_64 gen(trial);
    std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
    std::normal_distribution<double> noise(0.0, kRansacNoisePx);
    std::vector<geometry::Correspondence> corr;
    std::vector<bool> truth;
    const auto n_out = static_cast<std::size_t>(std::lround(kRansacOutlierRatio * kRansacPoints));
    for (std::size_t i = 0; i < kRansacPoints; ++i) {
      const Point2 p{ux(gen), uy(gen)};
      const bool outlier = i < n_out;
      Point2 q = outlier ? Point2{ux(gen), uy(gen)} : testing::ref_project(gt, p.x, p.y);
      if (!outlier) q = {q.x + noise(gen), q.y + noise(gen)};
      corr.push_back({p, q, 1.0});
      truth.push_back(!outlier);
    }
    std::shuffle(corr.begin(), corr.end(), std::mt19937_64(trial * 7 + 1));
    // recompute truth after the shuffle from the exact map
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const auto e = testing::ref_project(gt, corr[i].p.x, corr[i].p.y);
      truth[i] = std::hypot(e.x - corr[i].p_prime.x, e.y - corr[i].p_prime.y) < 5.0 * kRansacNoisePx;
    }
    geometry::RansacConfig cfg;
    cfg.inlier_threshold_px = kRansacThresholdPx;
    cfg.rng_seed = static_cast<std::uint64_t>(trial);
    const auto t0 = Clock::now();
    geometry::RansacResult r;
    try {
      r = geometry::ransac_estimate(corr, cfg);
    } catch (const Error&) {
      ++failures;
      continue;
    }
    total_s += seconds_since(t0);
    const auto h = r.homography.row_major();
    const testing::Mat3 est{h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]};
    double err = 0.0;
    for (auto i : r.inlier_indices) {
      const auto e = testing::ref_project(est, corr[i].p.x, corr[i].p.y);
      err += std::hypot(e.x - corr[i].p_prime.x, e.y - corr[i].p_prime.y);
    }
    err /= std::max<std::size_t>(1, r.inlier_indices.size());
    std::size_t true_total = 0, kept = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (!truth[i]) continue;
      ++true_total;
      if (std::find(r.inlier_indices.begin(), r.inlier_indices.end(), i) != r.inlier_indices.end()) ++kept;
    }
    const double recall = static_cast<double>(kept) / static_cast<double>(true_total);
    worst_error = std::max(worst_error, err);
    worst_recall = std::min(worst_recall, recall);
    if (!(err < kRansacMaxMeanErrorPx && recall >= kRansacMinInlierRecall)) ++failures;
  }
  return {failures == 0 && total_s < kRansacMaxSeconds,
          fmt("%d/%d trials ok, worst mean inlier error %.3f px, worst recall %.3f, total %.3f s", kRansacTrials - failures,
              kRansacTrials, worst_error, worst_recall, total_s)};
}

// --- AC2 ---------------------------------------------------------------------
Verdict warp_fidelity(const scenegen::SyntheticScene& scene, const pipeline::PropagationResult& r) {
  double sum = 0.0;
  int n = 0;
  for (const auto& pe : r.pairs) {
    if (!pe.reliable) continue;
    const auto& from = scene.views[pe.pair.from].masks;
    const auto& to = scene.views[pe.pair.to].masks;
    for (std::size_t k = 0; k < from.size(); ++k) {
      if (from[k].empty() && to[k].empty()) continue;
      sum += testing::ref_iou(geometry::warp_mask(from[k], pe.homography, from[k].size()), to[k]);
      ++n;
    }
  }
  const double mean = n ? sum / n : 0.0;
  const bool all_reliable = std::all_of(r.pairs.begin(), r.pairs.end(), [](const auto& p) { return p.reliable; });
  return {all_reliable && mean >= kWarpMinMeanIou,
          fmt("mean IoU %.4f over %d pair-objects (Harris matcher, %zu pairs)", mean, n, r.pairs.size())};
}

// --- AC3 ---------------------------------------------------------------------
struct IouTotals {
  double refined = 0.0, coarse_in_run = 0.0, coarse_only = 0.0;
  int n = 0;
};

void accumulate_iou(IouTotals& t, const scenegen::SyntheticScene& s, const pipeline::PropagationResult& refined,
                    const pipeline::PropagationResult& coarse_only) {
  for (std::size_t j = 0; j < s.views.size(); ++j) {
    if (j == refined.source_index) continue;
    for (std::size_t k = 0; k < s.views[j].masks.size(); ++k) {
      t.refined += testing::ref_iou(refined.views[j].objects[k].mask, s.views[j].masks[k]);
      t.coarse_in_run += testing::ref_iou(refined.views[j].objects[k].coarse, s.views[j].masks[k]);
      t.coarse_only += testing::ref_iou(coarse_only.views[j].objects[k].mask, s.views[j].masks[k]);
      ++t.n;
    }
  }
}

// --- AC4 ---------------------------------------------------------------------
struct ConservationTally {
  std::size_t views = 0, violations = 0;
};

void check_conservation(ConservationTally& t, const Run& run) {
  for (std::size_t j = 0; j < run.result.views.size(); ++j) {
    const auto& v = run.result.views[j];
    const BinaryMask all = v.mask_union();
    const RgbImage& in = run.views.views[j];
    const auto a = in.bytes(), b = v.inpainted.bytes();
    ++t.views;
    if (in.size() != v.inpainted.size()) {
      ++t.violations;
      continue;
    }
    bool bad = false;
    for (int y = 0; y < in.height() && !bad; ++y)
      for (int x = 0; x < in.width(); ++x) {
        if (all.get(x, y)) continue;
        const std::size_t o = (static_cast<std::size_t>(y) * in.width() + x) * 3;
        if (a[o] != b[o] || a[o + 1] != b[o + 1] || a[o + 2] != b[o + 2]) {
          bad = true;
          break;
        }
      }
    if (bad) ++t.violations;
  }
}

// --- AC9 ---------------------------------------------------------------------
struct LossTally {
  std::size_t checked = 0, violations = 0;
  double worst = 0.0;
};

void check_losses(LossTally& t, const Run& run) {
  const auto& a = run.config.anchor;
  for (const auto& v : run.result.views) {
    for (const auto& o : v.objects) {
      if (!o.refined) continue;
      const double recomputed =
          a.alpha * (1.0 - testing::ref_iou(o.mask, o.coarse)) + a.beta * mask::shape_context_distance(o.mask, o.coarse, a.sc);
      const double diff = std::abs(recomputed - o.loss);
      t.worst = std::max(t.worst, diff);
      ++t.checked;
      if (!(diff <= kLossTolerance)) ++t.violations;
    }
  }
}

double masked_psnr(const RgbImage& out, const scenegen::RenderedView& gt) {
  const BinaryMask region = mask::unite_all(gt.masks, gt.clean.size());
  if (region.empty()) return metrics::kPsnrCapDb;
  return metrics::psnr(out, gt.clean, &region);
}

long peak_rss_bytes() {
  rusage u{};
  ::getrusage(RUSAGE_SELF, &u);
  return u.ru_maxrss * 1024L;
}

}  // namespace

int main() {
  log::init_from_env();
  std::vector<std::pair<std::string, Verdict>> verdicts;
  ConservationTally conservation;
  LossTally losses;
  auto absorb = [&](const Run& r) {
    check_conservation(conservation, r);
    check_losses(losses, r);
  };

  progress("homography recovery");
  verdicts.emplace_back("AC1 homography recovery", homography_recovery());

  // standard suite: refined and coarse-only runs per scene, single-threaded
  IouTotals iou;
  double min_psnr = 1e300, min_ssim = 1e300, max_seconds = 0.0;
  Verdict warp;
  std::size_t suite_degraded = 0;
  for (const auto seed : kSuiteSeeds) {
    const auto scene = scenegen::generate(scenegen::standard_scene_spec(seed, kSuiteViews), 0);
    const auto prompts = scenegen::default_prompts(scene, 0);
    pipeline::PipelineConfig cfg;
    cfg.threads = 1;
    Run refined = run_builtin(fmt("suite seed %llu refined", (unsigned long long)seed), view_set_of(scene), prompts, cfg);
    cfg.refine_enabled = false;
    Run coarse = run_builtin(fmt("suite seed %llu coarse-only", (unsigned long long)seed), view_set_of(scene), prompts, cfg);
    accumulate_iou(iou, scene, refined.result, coarse.result);
    if (seed == kSuiteSeeds[0]) warp = warp_fidelity(scene, refined.result);
    for (std::size_t j = 0; j < scene.views.size(); ++j) {
      min_psnr = std::min(min_psnr, masked_psnr(refined.result.views[j].inpainted, scene.views[j]));
      min_ssim = std::min(min_ssim, metrics::ssim(refined.result.views[j].inpainted, scene.views[j].clean));
    }
    max_seconds = std::max(max_seconds, refined.seconds);
    suite_degraded += refined.result.degraded_views().size();
    absorb(refined);
    absorb(coarse);
  }
  verdicts.emplace_back("AC2 warp fidelity", warp);
  {
    const double r = iou.refined / iou.n, c1 = iou.coarse_in_run / iou.n, c2 = iou.coarse_only / iou.n;
    verdicts.emplace_back("AC3 refinement never hurts",
                          Verdict{r >= c1 && r >= c2 && r >= kRefinedMinMeanIou,
                                  fmt("mean IoU refined %.4f, coarse (same run) %.4f, coarse-only run %.4f, %d view-objects",
                                      r, c1, c2, iou.n)});
  }

  progress("key-view sweep");
  std::vector<std::pair<std::string, double>> sweep;
  {
    const auto scene = scenegen::generate(scenegen::standard_scene_spec(kSuiteSeeds[0], kSweepViews), 0);
    const auto prompts = scenegen::default_prompts(scene, 0);
    const std::size_t terminal = scene.views.size() - 1;
    for (const std::optional<int> n : {std::optional<int>(5), std::optional<int>(10), std::optional<int>()}) {
      pipeline::PipelineConfig cfg;
      cfg.key_view_interval = n;
      const std::string name = n ? std::to_string(*n) : "inf";
      Run r = run_builtin("sweep n=" + name, view_set_of(scene), prompts, cfg);
      sweep.emplace_back(name, masked_psnr(r.result.views[terminal].inpainted, scene.views[terminal]));
      absorb(r);
    }
  }
  {
    const bool monotone = sweep[0].second >= sweep[1].second && sweep[1].second >= sweep[2].second;
    const double gap = sweep[0].second - sweep[2].second;
    verdicts.emplace_back("AC5 key views limit error accumulation",
                          Verdict{monotone && gap >= kSweepMinGapDb,
                                  fmt("terminal-view masked PSNR n=5 %.3f dB, n=10 %.3f dB, n=inf %.3f dB; "
                                      "non-increasing %s, n=5 minus n=inf %.3f dB (need >= %.1f)",
                                      sweep[0].second, sweep[1].second, sweep[2].second, monotone ? "yes" : "no", gap,
                                      kSweepMinGapDb)});
  }

  verdicts.emplace_back("AC6 end-to-end quality",
                        Verdict{min_psnr >= kMinMaskedPsnrDb && min_ssim >= kMinSsim && max_seconds < kMaxRunSeconds &&
                                    suite_degraded == 0,
                                fmt("min masked PSNR %.2f dB, min SSIM %.4f over 60 views; slowest 20-view run %.2f s "
                                    "single-threaded; %zu degraded views",
                                    min_psnr, min_ssim, max_seconds, suite_degraded)});

  progress("determinism");
  {
    const auto scene = scenegen::generate(scenegen::standard_scene_spec(kSuiteSeeds[1], kSuiteViews), 0);
    const auto prompts = scenegen::default_prompts(scene, 0);
    testing::TempDir tmp;
    std::vector<std::uint64_t> digests;
    for (const char* name : {"a", "b"}) {
      pipeline::PipelineConfig cfg;
      cfg.ransac.rng_seed = 1234;
      cfg.anchor.sc.rng_seed = 1234;
      Run r = run_builtin(std::string("determinism ") + name, view_set_of(scene), prompts, cfg);
      pipeline::write_outputs(r.result, r.views, cfg, tmp.path() / name);
      digests.push_back(testing::directory_digest(tmp.path() / name, {"timings.json"}));
      absorb(r);
    }
    verdicts.emplace_back("AC8 determinism",
                          Verdict{digests[0] == digests[1],
                                  fmt("output digests %016llx and %016llx", (unsigned long long)digests[0],
                                      (unsigned long long)digests[1])});
  }

  progress("scale smoke test (75 views at 1920x1080)");
  {
    double estimation_s = 0.0, total_s = 0.0;
    bool completed = false;
    std::string note;
    try {
      Run r;
      prompts::PromptSet prompts;
      {
        auto scene = scenegen::generate(scenegen::standard_scene_spec(kSuiteSeeds[0], kHdViews, {1920, 1080}), 0);
        prompts = scenegen::default_prompts(scene, 0);
        for (auto& v : scene.views) r.views.views.push_back(std::move(v.image));
      }
      r = run_builtin("hd", std::move(r.views), prompts, pipeline::PipelineConfig{});
      estimation_s = r.result.timings.estimation_s;
      total_s = r.seconds;
      completed = r.result.pairs.size() == static_cast<std::size_t>(kHdViews - 1);
      note = fmt("%zu pairs, %zu degraded views", r.result.pairs.size(), r.result.degraded_views().size());
      absorb(r);
    } catch (const std::exception& e) {
      note = e.what();
    }
    const double peak = static_cast<double>(peak_rss_bytes());
    verdicts.emplace_back("AC7 scale smoke test",
                          Verdict{completed && peak < kMaxPeakBytes && estimation_s < kMaxHdEstimationSeconds,
                                  fmt("%s; estimation %.2f s, run %.2f s, process peak RSS %.2f GB", note.c_str(),
                                      estimation_s, total_s, peak / (1024.0 * 1024 * 1024))});
  }

  verdicts.emplace_back("AC4 conservation",
                        Verdict{conservation.violations == 0 && conservation.views > 0,
                                fmt("%zu views across all runs, %zu with changed pixels outside the mask union",
                                    conservation.views, conservation.violations)});
  verdicts.emplace_back("AC9 loss bookkeeping",
                        Verdict{losses.violations == 0 && losses.checked > 0,
                                fmt("%zu refined masks, worst |recomputed - reported| %.3g", losses.checked, losses.worst)});

  std::sort(verdicts.begin(), verdicts.end(), [](const auto& a, const auto& b) {
    return std::stoi(a.first.substr(2)) < std::stoi(b.first.substr(2));
  });
  int failed = 0;
  for (const auto& [name, v] : verdicts) {
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    if (!v.pass) ++failed;
  }
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
