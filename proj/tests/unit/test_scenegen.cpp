// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fakes.hpp"
#include "homer/error.hpp"
#include "homer/geometry.hpp"
#include "homer/io.hpp"
#include "homer/mask.hpp"
#include "homer/scenegen.hpp"
#include "reference.hpp"

using namespace homer;
using namespace homer::scenegen;

namespace {

const SyntheticScene& small_scene() {
  static const SyntheticScene scene = generate(standard_scene_spec(7, 6, {192, 160}), 1);
  return scene;
}

// Area scale of a homography near point (x, y), by finite differences of the
// direct projective formula.
double local_area_scale(const Homography& h, double x, double y) {
  const auto& m = h.row_major();
  const double e = 1e-3;
  const auto p0 = testing::ref_project(m, x, y);
  const auto px = testing::ref_project(m, x + e, y);
  const auto py = testing::ref_project(m, x, y + e);
  return std::abs(((px.x - p0.x) * (py.y - p0.y) - (px.y - p0.y) * (py.x - p0.x)) / (e * e));
}

}  // namespace

TEST_SUITE("scenegen.generate") {
  TEST_CASE("a static camera gives identity homographies and identical views") {
    auto spec = standard_scene_spec(3, 2, {128, 96});
    CameraPose pose;
    pose.tx = 4;
    pose.rotation_deg = 3;
    spec.path = std::pair{pose, pose};
    const auto scene = generate(spec, 1);
    CHECK(geometry::max_entry_difference(scene.gt_adjacent[0], Homography::identity()) < 1e-12);
    CHECK(scene.views[0].image == scene.views[1].image);
  }

  TEST_CASE("disk area follows the local area scale of the view map") {
    SceneSpec spec = standard_scene_spec(11, 8, {256, 256});
    ObjectSpec disk;
    disk.shape = ObjectSpec::Shape::disk;
    disk.radius = 30;
    disk.center = {127.5, 127.5};
    spec.objects = {disk};
    const auto scene = generate(spec, 1);
    for (std::size_t j = 0; j < scene.views.size(); ++j) {
      const double scale = local_area_scale(scene.geometry.view_from_plane[j], 127.5, 127.5);
      const double want = std::numbers::pi * 900.0 * scale;
      CHECK(std::abs(double(scene.views[j].masks[0].area()) - want) <= 0.10 * want);
    }
  }

  TEST_CASE("composed adjacent homographies equal the direct plane maps") {
    const auto& s = small_scene();
    for (std::size_t j = 1; j < s.views.size(); ++j) {
      Homography composite = Homography::identity();
      for (std::size_t k = 0; k < j; ++k) composite = geometry::chain(composite, s.gt_adjacent[k]);
      const auto direct = geometry::chain(s.geometry.view_from_plane[0].inverse(), s.geometry.view_from_plane[j]);
      for (double x : {0.0, 95.0, 191.0})
        for (double y : {0.0, 80.0, 159.0}) {
          const auto a = composite.apply({x, y});
          const auto b = direct.apply({x, y});
          CHECK(std::hypot(a.x - b.x, a.y - b.y) < 1e-9);
        }
    }
  }

  TEST_CASE("clean plates differ from views only inside ground-truth masks") {
    for (const auto& v : small_scene().views) {
      const auto u = mask::unite_all(v.masks, v.image.size());
      for (int y = 0; y < v.image.height(); ++y)
        for (int x = 0; x < v.image.width(); ++x)
          if (!u.get(x, y)) CHECK(v.image.at(x, y) == v.clean.at(x, y));
    }
  }

  TEST_CASE("warping ground-truth masks between views keeps IoU >= 0.98") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto s = generate(standard_scene_spec(seed, 20), 1);
      for (std::size_t i = 0; i + 1 < s.views.size(); ++i)
        for (std::size_t k = 0; k < s.views[i].masks.size(); ++k) {
          const auto& a = s.views[i].masks[k];
          const auto& b = s.views[i + 1].masks[k];
          if (a.area() < 200 || b.area() < 200) continue;
          CHECK(mask::iou(geometry::warp_mask(a, s.gt_adjacent[i], a.size()), b) >= 0.98);
        }
    }
  }

  TEST_CASE("the standard scene has three distinct objects and default prompts inside them") {
    const auto& s = small_scene();
    CHECK(s.spec.objects.size() == 3);
    const auto p = default_prompts(s, 0);
    CHECK(p.object_count() == 3);
    for (const auto& f : p.foreground) CHECK(s.views[0].masks[static_cast<std::size_t>(f.object_id - 1)].get(f.x, f.y));
  }

  TEST_CASE("same seed, byte-identical scene directory") {
    testing::TempDir a, b;
    const auto spec = standard_scene_spec(21, 3, {96, 80});
    write_scene(generate(spec, 1), a.path());
    write_scene(generate(spec, 2), b.path());
    CHECK(testing::directory_digest(a.path()) == testing::directory_digest(b.path()));
    CHECK(std::filesystem::exists(a.path() / "gt" / "homographies.json"));
    CHECK(std::filesystem::exists(a.path() / "gt" / "masks" / "view_2_obj_3.png"));
    CHECK(std::filesystem::exists(a.path() / "gt" / "clean" / "view_0.png"));
  }

  TEST_CASE("spec json round trip") {
    const auto spec = standard_scene_spec(4, 5, {100, 90});
    CHECK(to_json(scene_spec_from_json(to_json(spec))) == to_json(spec));
  }

  TEST_CASE("invalid specs are rejected") {
    auto spec = standard_scene_spec(1, 2, {64, 64});
    spec.n_views = 1;
    CHECK_THROWS_AS(validate(spec), Error);
    spec = standard_scene_spec(1, 2, {64, 64});
    spec.texture.octaves.resize(2);
    CHECK_THROWS_AS(validate(spec), Error);
    CHECK_THROWS_AS(scene_spec_from_json({{"texture", {{"kind", "plaid"}}}}), Error);
  }
}

TEST_SUITE("scenegen.matcher") {
  TEST_CASE("no noise and no outliers: exact ground-truth matches") {
    const auto& g = small_scene().geometry;
    PerturbConfig cfg;
    for (const auto& r : perturb(g, cfg)) {
      CHECK(r.correspondences.size() == 100);
      CHECK(r.similarity == 1.0);
    }
    const auto r = synthetic_exact_matcher(g, 2, 3, cfg);
    const auto h = g.between(2, 3);
    for (const auto& c : r.correspondences) {
      const auto want = testing::ref_project(h.row_major(), c.p.x, c.p.y);
      CHECK(std::hypot(c.p_prime.x - want.x, c.p_prime.y - want.y) < 1e-9);
    }
  }

  TEST_CASE("outlier ratio 0.3 replaces exactly 30 of 100") {
    const auto& g = small_scene().geometry;
    PerturbConfig cfg;
    cfg.outlier_ratio = 0.3;
    cfg.seed = 5;
    const auto r = synthetic_exact_matcher(g, 0, 1, cfg);
    const auto h = g.between(0, 1);
    int off = 0;
    for (const auto& c : r.correspondences)
      if (geometry::reprojection_error(h, c) > 1e-9) ++off;
    CHECK(off == 30);
  }

  TEST_CASE("noise 0.5 and 30% outliers: RANSAC recovers the truth within 1 px") {
    const auto& g = small_scene().geometry;
    PerturbConfig cfg;
    cfg.outlier_ratio = 0.3;
    cfg.noise_px = 0.5;
    cfg.seed = 6;
    const auto all = perturb(g, cfg);
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto r = geometry::ransac_estimate(all[i].correspondences, geometry::RansacConfig{});
      CHECK(r.mean_inlier_error_px < 1.0);
      const auto truth = g.between(i, i + 1);
      double err = 0;
      int n = 0;
      for (double x = 0; x < 192; x += 24)
        for (double y = 0; y < 160; y += 20, ++n) {
          const auto a = r.homography.apply({x, y}), b = truth.apply({x, y});
          err += std::hypot(a.x - b.x, a.y - b.y);
        }
      CHECK(err / n < 1.0);
    }
  }

  TEST_CASE("fault pairs are all outliers and results are seeded") {
    const auto& g = small_scene().geometry;
    PerturbConfig cfg;
    cfg.fault_pairs = {{1, 2}};
    const auto r = synthetic_exact_matcher(g, 1, 2, cfg);
    const auto h = g.between(1, 2);
    for (const auto& c : r.correspondences) CHECK(geometry::reprojection_error(h, c) > 1e-9);
    const auto again = synthetic_exact_matcher(g, 1, 2, cfg);
    CHECK(r.correspondences.size() == again.correspondences.size());
    CHECK(r.correspondences.front().p_prime == again.correspondences.front().p_prime);
  }
}
