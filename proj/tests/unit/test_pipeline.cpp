// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "fakes.hpp"
#include "homer/error.hpp"
#include "homer/io.hpp"
#include "homer/mask.hpp"
#include "homer/metrics.hpp"
#include "homer/pipeline.hpp"
#include "homer/scenegen.hpp"
#include "reference.hpp"

using namespace homer;
using namespace homer::pipeline;
using geometry::Homography;
using oracles::ViewPair;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_argument;
}

std::vector<std::pair<std::size_t, std::size_t>> as_pairs(const std::vector<ViewPair>& v) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : v) out.emplace_back(p.from, p.to);
  return out;
}

ViewSet view_set_of(const scenegen::SyntheticScene& s, std::size_t source = 0) {
  ViewSet vs;
  for (const auto& v : s.views) vs.views.push_back(v.image);
  vs.source_index = source;
  return vs;
}

oracles::OracleSet ground_truth_oracles(const scenegen::SyntheticScene& s, scenegen::PerturbConfig pc = {}) {
  auto o = oracles::builtin_oracles();
  o.matcher = std::make_shared<scenegen::GroundTruthMatcher>(s.geometry, pc);
  return o;
}

PipelineConfig single_thread_config() {
  PipelineConfig cfg;
  cfg.threads = 1;
  return cfg;
}

const scenegen::SyntheticScene& scene256() {
  static const auto s = scenegen::generate(scenegen::standard_scene_spec(1, 6, {256, 256}), 1);
  return s;
}

// Identity-chain fixture: distinct textured views, two disks, a matcher that
// reports the identity for every pair.
struct IdentityChain {
  Size size{64, 64};
  std::vector<BinaryMask> masks;
  ViewSet vs;
  prompts::PromptSet prompts;

  IdentityChain(std::size_t n, std::size_t source) {
    masks = {testing::disk_mask(size, 18, 20, 7), testing::disk_mask(size, 44, 42, 8)};
    for (std::size_t j = 0; j < n; ++j) vs.views.push_back(testing::textured_image(size, 100 + j));
    vs.source_index = source;
    prompts.view_index = source;
    prompts.foreground = {{18, 20, 1}, {44, 42, 2}};
  }

  oracles::OracleSet oracles(std::shared_ptr<oracles::Inpainter> inpainter) const {
    return {std::make_shared<testing::FixedMatcher>(Homography::identity()),
            std::make_shared<testing::EchoSegmenter>(masks), std::move(inpainter)};
  }
};

// Throws on every call after the first `allowed`.
class FailingInpainter final : public oracles::Inpainter {
 public:
  explicit FailingInpainter(int allowed) : allowed_(allowed) {}
  RgbImage inpaint(const RgbImage& image, const BinaryMask& mask) override {
    if (calls++ >= allowed_) fail(ErrorCode::oracle_failure, "scripted inpainter failure");
    return inner_.inpaint(image, mask);
  }
  std::string name() const override { return "failing"; }
  std::atomic<int> calls{0};

 private:
  int allowed_;
  testing::FillInpainter inner_{{0, 0, 0}};
};

double mean_reprojection(const Homography& a, const Homography& b, Size size) {
  double total = 0.0;
  int n = 0;
  for (int y = 0; y < size.height; y += 8)
    for (int x = 0; x < size.width; x += 8) {
      const auto p = a.apply({double(x), double(y)});
      const auto q = b.apply({double(x), double(y)});
      total += std::hypot(p.x - q.x, p.y - q.y);
      ++n;
    }
  return total / n;
}

}  // namespace

TEST_SUITE("pipeline.plan_pairs") {
  TEST_CASE("forward-only chain from view 0") {
    CHECK(as_pairs(plan_pairs(5, 0)) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  }

  TEST_CASE("source in the middle gives both chains") {
    CHECK(as_pairs(plan_pairs(5, 2)) == std::vector<std::pair<std::size_t, std::size_t>>{{2, 3}, {3, 4}, {2, 1}, {1, 0}});
  }

  TEST_CASE("two views give one pair") {
    CHECK(plan_pairs(2, 0).size() == 1);
    CHECK(as_pairs(plan_pairs(2, 1)) == std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}});
  }

  TEST_CASE("every view is reached exactly once by an outward hop") {
    std::mt19937 gen(3);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + gen() % 40;
      const std::size_t s = gen() % n;
      const auto pairs = plan_pairs(n, s);
      REQUIRE(pairs.size() == n - 1);
      std::vector<int> reached(n, 0);
      reached[s] = 1;
      for (const auto& p : pairs) {
        CHECK(reached[p.from] == 1);  // hop starts from an already reached view
        CHECK((p.to + 1 == p.from || p.from + 1 == p.to));
        ++reached[p.to];
      }
      CHECK(std::all_of(reached.begin(), reached.end(), [](int r) { return r == 1; }));
    }
  }
}

TEST_SUITE("pipeline.validate") {
  TEST_CASE("view set preconditions") {
    ViewSet vs;
    vs.views = {RgbImage({16, 16})};
    CHECK(code_of([&] { validate(vs); }) == ErrorCode::invalid_view_set);
    vs.views.push_back(RgbImage({16, 17}));
    CHECK(code_of([&] { validate(vs); }) == ErrorCode::invalid_view_set);
    vs.views.back() = RgbImage({16, 16});
    vs.source_index = 2;
    CHECK(code_of([&] { validate(vs); }) == ErrorCode::invalid_view_set);
    vs.source_index = 1;
    CHECK_NOTHROW(validate(vs));
  }

  TEST_CASE("run rejects a single view") {
    IdentityChain f(1, 0);
    CHECK(code_of([&] {
            run(f.vs, f.prompts, f.oracles(std::make_shared<testing::FillInpainter>(Rgb{0, 0, 0})), single_thread_config());
          }) == ErrorCode::invalid_view_set);
  }

  TEST_CASE("config preconditions") {
    PipelineConfig cfg;
    cfg.key_view_interval = 0;
    CHECK(code_of([&] { validate(cfg); }) == ErrorCode::invalid_argument);
    cfg.key_view_interval = std::nullopt;
    CHECK_NOTHROW(validate(cfg));
    cfg.empty_fill_threshold = 1.5;
    CHECK(code_of([&] { validate(cfg); }) == ErrorCode::invalid_argument);
  }

  TEST_CASE("config json round trip keeps every field") {
    PipelineConfig cfg;
    cfg.key_view_interval = std::nullopt;
    cfg.ransac.rng_seed = 99;
    cfg.anchor.beta = 0.25;
    cfg.min_pair_similarity = 0.2;
    cfg.oracles.segmenter_command = "seg --fast";
    const auto back = config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(!back.key_view_interval.has_value());
    CHECK(code_of([] { config_from_json({{"ransac", {{"max_iterations", "many"}}}}); }) == ErrorCode::parse_error);
  }
}

TEST_SUITE("pipeline.estimate_all") {
  TEST_CASE("exact matcher gives sub-micro-pixel inlier error") {
    const auto& s = scene256();
    scenegen::GroundTruthMatcher m(s.geometry, {});
    const auto pairs = estimate_all(view_set_of(s), m, single_thread_config());
    REQUIRE(pairs.size() == s.views.size() - 1);
    for (const auto& pe : pairs) {
      REQUIRE(pe.reliable);
      CHECK(pe.ransac->mean_inlier_error_px <= 1e-6);
    }
  }

  TEST_CASE("75 views give 74 estimates") {
    auto spec = scenegen::standard_scene_spec(2, 75, {96, 80});
    const auto g = scenegen::scene_geometry(spec);
    ViewSet vs;
    vs.views.assign(75, RgbImage({96, 80}));
    scenegen::GroundTruthMatcher m(g, {});
    const auto pairs = estimate_all(vs, m, single_thread_config());
    CHECK(pairs.size() == 74);
    CHECK(std::all_of(pairs.begin(), pairs.end(), [](const PairEstimate& p) { return p.reliable && p.ransac; }));
  }

  TEST_CASE("all-outlier pair is flagged unreliable with an identity hop") {
    const auto& s = scene256();
    scenegen::PerturbConfig pc;
    pc.fault_pairs = {{2, 3}};
    scenegen::GroundTruthMatcher m(s.geometry, pc);
    const auto pairs = estimate_all(view_set_of(s), m, single_thread_config());
    for (const auto& pe : pairs) {
      const bool fault = pe.pair.from == 2 && pe.pair.to == 3;
      CHECK(pe.reliable == !fault);
      if (fault) {
        CHECK(!pe.error.empty());
        CHECK(pe.homography.row_major() == Homography::identity().row_major());
      }
    }
  }

  TEST_CASE("source without a reliable neighbour aborts") {
    const auto& s = scene256();
    scenegen::PerturbConfig pc;
    pc.fault_pairs = {{0, 1}};
    scenegen::GroundTruthMatcher m(s.geometry, pc);
    CHECK(code_of([&] { estimate_all(view_set_of(s), m, single_thread_config()); }) == ErrorCode::pipeline_abort);
  }

  TEST_CASE("chain composites stay within 2 px of ground truth") {
    auto spec = scenegen::standard_scene_spec(5, 20, {256, 256});
    const auto g = scenegen::scene_geometry(spec);
    ViewSet vs;
    vs.views.assign(20, RgbImage({256, 256}));
    scenegen::PerturbConfig pc;
    pc.noise_px = 0.5;
    pc.outlier_ratio = 0.3;
    pc.seed = 11;
    for (std::size_t source : {std::size_t{0}, std::size_t{9}}) {
      vs.source_index = source;
      scenegen::GroundTruthMatcher m(g, pc);
      const auto pairs = estimate_all(vs, m, single_thread_config());
      std::vector<Homography> composite(20, Homography::identity());
      for (const auto& pe : pairs) {
        REQUIRE(pe.reliable);
        composite[pe.pair.to] = geometry::chain(composite[pe.pair.from], pe.homography);
      }
      for (std::size_t j = 0; j < 20; ++j) {
        CHECK(mean_reprojection(composite[j], g.between(source, j), {256, 256}) <= 2.0);
      }
    }
  }
}

TEST_SUITE("pipeline.propagate") {
  TEST_CASE("identity chain with an echo segmenter carries the source masks unchanged") {
    IdentityChain f(5, 2);
    const auto r = run(f.vs, f.prompts, f.oracles(std::make_shared<testing::FillInpainter>(Rgb{0, 0, 0})),
                       single_thread_config());
    for (const auto& v : r.views) {
      REQUIRE(v.objects.size() == 2);
      CHECK(v.objects[0].mask == f.masks[0]);
      CHECK(v.objects[1].mask == f.masks[1]);
    }
    CHECK(r.views[2].provenance == Provenance::source);
  }

  TEST_CASE("object leaving the frame gets empty masks without errors") {
    scenegen::SceneSpec spec;
    spec.width = 160;
    spec.height = 128;
    spec.n_views = 16;
    spec.seed = 3;
    scenegen::ObjectSpec leaving;
    leaving.center = {130, 64};
    leaving.radius = 10;
    scenegen::ObjectSpec staying;
    staying.shape = scenegen::ObjectSpec::Shape::rectangle;
    staying.color = {30, 60, 220};
    staying.center = {50, 60};
    staying.half_size = {14, 10};
    spec.objects = {leaving, staying};
    // 3.5 px per view to the right: the disk's left edge (x = 120) clears
    // the 160 px frame at view 12
    spec.path = std::pair(scenegen::CameraPose{}, scenegen::CameraPose{52.5, 0, 0, 1, 0, 0});
    const auto s = scenegen::generate(spec, 1);
    REQUIRE(s.views[11].masks[0].area() > 0);
    REQUIRE(s.views[12].masks[0].empty());

    const auto r = run(view_set_of(s), scenegen::default_prompts(s, 0), ground_truth_oracles(s), single_thread_config());
    for (std::size_t j = 12; j < 16; ++j) {
      CAPTURE(j);
      CHECK(r.views[j].objects[0].mask.empty());
      CHECK(r.views[j].objects[0].error.empty());
      CHECK(r.views[j].objects[1].mask.area() > 0);
    }
    for (std::size_t j = 1; j < 12; ++j) CHECK(!r.views[j].chain_degraded);
  }

  TEST_CASE("interval 1 inpaints every view directly from its own image") {
    IdentityChain f(5, 0);
    auto cfg = single_thread_config();
    cfg.key_view_interval = 1;
    auto inpainter = std::make_shared<oracles::DiffusionInpainter>();
    const auto r = run(f.vs, f.prompts, f.oracles(inpainter), cfg);
    REQUIRE(r.mode == prompts::InpaintMode::sequential);
    oracles::DiffusionInpainter fresh;
    for (std::size_t j = 1; j < 5; ++j) {
      CAPTURE(j);
      CHECK(r.views[j].provenance == Provenance::key_view);
      CHECK(r.views[j].inpainter_calls == 2);
      const RgbImage expect = fresh.inpaint(fresh.inpaint(f.vs.views[j], f.masks[0]), f.masks[1]);
      CHECK(r.views[j].inpainted == expect);
    }
  }

  TEST_CASE("without key views, full warped coverage means no inpainter calls after the source") {
    const auto& s = scene256();
    auto oracles = ground_truth_oracles(s);
    auto counting = std::make_shared<testing::CountingInpainter>(oracles.inpainter);
    oracles.inpainter = counting;
    auto cfg = single_thread_config();
    cfg.key_view_interval = std::nullopt;
    const auto r = run(view_set_of(s), scenegen::default_prompts(s, 0), oracles, cfg);
    for (std::size_t j = 1; j < r.views.size(); ++j) {
      CAPTURE(j);
      CHECK(r.views[j].provenance == Provenance::warped);
      CHECK(r.views[j].inpainter_calls == 0);
    }
    CHECK(counting->calls == r.views[0].inpainter_calls);
  }

  TEST_CASE("key views sit at positive multiples of the interval on both chains") {
    IdentityChain f(23, 7);
    auto cfg = single_thread_config();
    cfg.key_view_interval = 5;
    const auto r = run(f.vs, f.prompts, f.oracles(std::make_shared<testing::FillInpainter>(Rgb{9, 9, 9})), cfg);
    for (std::size_t j = 0; j < 23; ++j) {
      CAPTURE(j);
      const std::size_t d = j > 7 ? j - 7 : 7 - j;
      CHECK(r.views[j].distance == d);
      if (j == 7) CHECK(r.views[j].provenance == Provenance::source);
      else CHECK((r.views[j].provenance == Provenance::key_view) == (d % 5 == 0));
    }
  }

  TEST_CASE("failing direct inpainting keeps the original image and degrades the view") {
    IdentityChain f(4, 0);
    auto cfg = single_thread_config();
    cfg.key_view_interval = 2;
    auto inpainter = std::make_shared<FailingInpainter>(2);  // the source's two objects
    const auto r = run(f.vs, f.prompts, f.oracles(inpainter), cfg);
    CHECK(r.views[1].provenance == Provenance::warped);
    CHECK(r.views[2].provenance == Provenance::degraded);
    CHECK(r.views[2].inpaint_degraded);
    CHECK(r.views[2].inpainted == f.vs.views[2]);
    CHECK(!r.views[2].warnings.empty());
    CHECK(r.degraded_views() == std::vector<std::size_t>{2, 3});  // view 3 warps from the kept original
  }
}

TEST_SUITE("pipeline.run") {
  TEST_CASE("conservation and provenance on a synthetic scene") {
    const auto& s = scene256();
    const auto vs = view_set_of(s);
    const auto r = run(vs, scenegen::default_prompts(s, 0), ground_truth_oracles(s), single_thread_config());
    REQUIRE(r.views.size() == vs.views.size());
    CHECK(r.views[0].provenance == Provenance::source);
    for (std::size_t j = 0; j < r.views.size(); ++j) {
      CAPTURE(j);
      const auto& v = r.views[j];
      CHECK(v.provenance != Provenance::degraded);
      if (j > 0) CHECK(v.provenance != Provenance::source);
      const BinaryMask all = v.mask_union();
      std::size_t changed_outside = 0;
      for (int y = 0; y < 256; ++y)
        for (int x = 0; x < 256; ++x)
          if (!all.get(x, y) && v.inpainted.at(x, y) != vs.views[j].at(x, y)) ++changed_outside;
      CHECK(changed_outside == 0);
      BinaryMask gt = mask::unite_all(s.views[j].masks, {256, 256});
      CHECK(metrics::psnr(v.inpainted, s.views[j].clean, &gt) >= 25.0);
    }
  }

  TEST_CASE("source follows the prompt view") {
    IdentityChain f(4, 0);
    f.prompts.view_index = 3;
    const auto r = run(f.vs, f.prompts, f.oracles(std::make_shared<testing::FillInpainter>(Rgb{0, 0, 0})),
                       single_thread_config());
    CHECK(r.source_index == 3);
    CHECK(r.views[3].provenance == Provenance::source);
    f.prompts.view_index = 4;
    CHECK(code_of([&] {
            run(f.vs, f.prompts, f.oracles(std::make_shared<testing::FillInpainter>(Rgb{0, 0, 0})), single_thread_config());
          }) == ErrorCode::invalid_prompt);
  }

  TEST_CASE("fault pair degrades the downstream views only") {
    const auto& s = scene256();
    scenegen::PerturbConfig pc;
    pc.fault_pairs = {{2, 3}};
    const auto r = run(view_set_of(s), scenegen::default_prompts(s, 0), ground_truth_oracles(s, pc),
                       single_thread_config());
    CHECK(r.degraded_views() == std::vector<std::size_t>{3, 4, 5});
    for (std::size_t j = 3; j < 6; ++j) {
      CHECK(r.views[j].chain_degraded);
      CHECK(!r.views[j].objects.empty());
    }
  }

  TEST_CASE("refinement never lowers per-view IoU on non-degraded views") {
    const auto& s = scene256();
    auto cfg = single_thread_config();
    const auto refined = run(view_set_of(s), scenegen::default_prompts(s, 0), ground_truth_oracles(s), cfg);
    cfg.refine_enabled = false;
    const auto coarse = run(view_set_of(s), scenegen::default_prompts(s, 0), ground_truth_oracles(s), cfg);
    for (std::size_t j = 1; j < s.views.size(); ++j) {
      if (refined.views[j].provenance == Provenance::degraded) continue;
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        a += mask::iou(refined.views[j].objects[k].mask, s.views[j].masks[k]);
        b += mask::iou(coarse.views[j].objects[k].mask, s.views[j].masks[k]);
      }
      CAPTURE(j);
      CHECK(a >= b);
    }
  }

  TEST_CASE("seeded reruns produce byte-identical outputs") {
    const auto& s = scene256();
    auto vs = view_set_of(s);
    vs.poses.assign(vs.views.size(), nullptr);
    vs.poses[1] = {{"qvec", {1, 0, 0, 0}}, {"tvec", {0.5, 0, 2}}};
    testing::TempDir tmp;
    for (const char* name : {"a", "b"}) {
      auto cfg = single_thread_config();
      cfg.ransac.rng_seed = 42;
      scenegen::PerturbConfig pc;
      pc.noise_px = 0.3;
      pc.outlier_ratio = 0.2;
      pc.seed = 8;
      const auto r = run(vs, scenegen::default_prompts(s, 0), ground_truth_oracles(s, pc), cfg);
      write_outputs(r, vs, cfg, tmp.path() / name);
    }
    CHECK(testing::directory_digest(tmp.path() / "a", {"timings.json"}) ==
          testing::directory_digest(tmp.path() / "b", {"timings.json"}));
    const auto manifest = io::read_json(tmp.path() / "a" / "export" / "manifest.json");
    CHECK(manifest["views"][1]["pose"] == vs.poses[1]);
    CHECK(!manifest["views"][0].contains("pose"));
    CHECK(std::filesystem::exists(tmp.path() / "a" / "masks" / "view_5_obj_3.png"));
  }

  TEST_CASE("multi-threaded run matches the single-threaded one") {
    const auto& s = scene256();
    auto cfg = single_thread_config();
    const auto one = run(view_set_of(s, 3), scenegen::default_prompts(s, 3), ground_truth_oracles(s), cfg);
    cfg.threads = 4;
    const auto four = run(view_set_of(s, 3), scenegen::default_prompts(s, 3), ground_truth_oracles(s), cfg);
    CHECK(build_report(one, view_set_of(s, 3), cfg) == build_report(four, view_set_of(s, 3), cfg));
    for (std::size_t j = 0; j < s.views.size(); ++j) CHECK(one.views[j].inpainted == four.views[j].inpainted);
  }

  TEST_CASE("progress reports every stage and ends complete") {
    IdentityChain f(6, 2);
    std::mutex mu;
    std::map<std::string, std::pair<std::size_t, std::size_t>> last;
    run(f.vs, f.prompts, f.oracles(std::make_shared<testing::FillInpainter>(Rgb{0, 0, 0})), single_thread_config(),
        [&](const Progress& p) {
          std::lock_guard lock(mu);
          last[p.stage] = {p.views_done, p.views_total};
        });
    CHECK(last.size() == 4);
    for (const auto& [stage, counts] : last) {
      CAPTURE(stage);
      CHECK(counts.first == counts.second);
    }
    CHECK(last["masks"].second == 5);
  }
}
