// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "fakes.hpp"
#include "homer/error.hpp"
#include "homer/mask.hpp"
#include "homer/metrics.hpp"
#include "homer/prompts.hpp"
#include "homer/scenegen.hpp"
#include "reference.hpp"

using namespace homer;
using namespace homer::prompts;

namespace {

RgbImage two_disks(Size sz, BinaryMask& a, BinaryMask& b) {
  RgbImage img(sz, {255, 255, 255});
  a = testing::disk_mask(sz, 25, 30, 12);
  b = testing::disk_mask(sz, 75, 30, 10);
  for (int y = 0; y < sz.height; ++y)
    for (int x = 0; x < sz.width; ++x) {
      if (a.get(x, y)) img.set(x, y, {230, 10, 10});
      if (b.get(x, y)) img.set(x, y, {10, 10, 230});
    }
  return img;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_SUITE("prompts.schema") {
  TEST_CASE("json round trip keeps every field, including the reserved rect") {
    PromptSet p;
    p.view_index = 3;
    p.foreground = {{1, 2, 1}, {5, 6, 2}, {7, 8, 1}};
    p.background = {{9, 9}};
    p.rect = Rect{1, 2, 3, 4};
    CHECK(prompts_from_json(to_json(p)) == p);
  }

  TEST_CASE("object_id defaults to 1 and grouping keeps input order") {
    const auto p = prompts_from_json(nlohmann::json::parse(
        R"({"view_index":0,"foreground":[{"x":4,"y":5},{"x":1,"y":1,"object_id":2},{"x":6,"y":7}]})"));
    CHECK(p.object_count() == 2);
    CHECK(p.points_for(1) == std::vector<PixelPoint>{{4, 5}, {6, 7}});
    CHECK(p.points_for(2) == std::vector<PixelPoint>{{1, 1}});
  }

  TEST_CASE("schema violations are parse errors") {
    CHECK(code_of([] { prompts_from_json(nlohmann::json::parse(R"({"foreground":"nope"})")); }) == ErrorCode::parse_error);
    CHECK(code_of([] { prompts_from_json(nlohmann::json::parse(R"([1,2])")); }) == ErrorCode::parse_error);
  }

  TEST_CASE("validation: bounds, empty foreground, id gaps") {
    PromptSet p;
    p.foreground = {{1, 1, 1}};
    CHECK_NOTHROW(validate(p, {10, 10}));
    p.foreground = {{10, 1, 1}};
    CHECK(code_of([&] { validate(p, {10, 10}); }) == ErrorCode::invalid_prompt);
    p.foreground = {{1, 1, 1}};
    p.background = {{-1, 0}};
    CHECK(code_of([&] { validate(p, {10, 10}); }) == ErrorCode::invalid_prompt);
    p.background.clear();
    p.foreground = {{1, 1, 1}, {2, 2, 3}};
    CHECK(code_of([&] { validate(p, {10, 10}); }) == ErrorCode::invalid_prompt);
    p.foreground.clear();
    CHECK(code_of([&] { validate(p, {10, 10}); }) == ErrorCode::invalid_prompt);
  }

  TEST_CASE("inpaint mode names") {
    for (auto m : {InpaintMode::sequential, InpaintMode::merged, InpaintMode::automatic})
      CHECK(inpaint_mode_from_string(to_string(m)) == m);
    CHECK(to_string(InpaintMode::automatic) == "auto");
    CHECK_THROWS_AS(inpaint_mode_from_string("sideways"), Error);
  }
}

TEST_SUITE("prompts.segment_objects") {
  TEST_CASE("two disjoint disks come back as their memberships") {
    BinaryMask a, b;
    const auto img = two_disks({100, 60}, a, b);
    PromptSet p;
    p.foreground = {{25, 30, 1}, {75, 30, 2}};
    oracles::RegionGrowSegmenter seg(10.0);
    const auto masks = segment_objects(img, p, seg);
    REQUIRE(masks.size() == 2);
    CHECK(masks[0] == a);
    CHECK(masks[1] == b);
  }

  TEST_CASE("single object mask contains its point") {
    BinaryMask a, b;
    const auto img = two_disks({100, 60}, a, b);
    PromptSet p;
    p.foreground = {{70, 28, 1}};
    oracles::RegionGrowSegmenter seg;
    const auto masks = segment_objects(img, p, seg);
    REQUIRE(masks.size() == 1);
    CHECK(masks[0].get(70, 28));
  }

  TEST_CASE("id gap fails before any segmenter call") {
    testing::EchoSegmenter seg({BinaryMask({20, 20}, true)});
    PromptSet p;
    p.foreground = {{1, 1, 1}, {2, 2, 3}};
    CHECK(code_of([&] { segment_objects(RgbImage({20, 20}), p, seg); }) == ErrorCode::invalid_prompt);
    CHECK(seg.calls == 0);
  }

  TEST_CASE("segmenter errors name the object") {
    testing::FunctionSegmenter seg([](const RgbImage& img, std::span<const PixelPoint> fg, std::span<const PixelPoint>) {
      if (fg.front().x > 10) throw Error(ErrorCode::prompt_conflict, "nope");
      return BinaryMask(img.size(), true);
    });
    PromptSet p;
    p.foreground = {{1, 1, 1}, {15, 1, 2}};
    try {
      segment_objects(RgbImage({20, 20}), p, seg);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::prompt_conflict);
      CHECK(std::string(e.what()).find("object 2") != std::string::npos);
    }
  }
}

TEST_SUITE("prompts.inpaint") {
  TEST_CASE("no masks leave the image unchanged with no calls") {
    const auto img = testing::textured_image({30, 20}, 1);
    testing::CountingInpainter inp(std::make_shared<oracles::DiffusionInpainter>());
    CHECK(inpaint_sequential(img, {}, inp) == img);
    CHECK(inpaint_merged(img, {BinaryMask(img.size())}, inp) == img);
    CHECK(inp.calls == 0);
  }

  TEST_CASE("sequential makes K calls and step 2 cannot touch mask 1") {
    const auto img = testing::textured_image({60, 40}, 2);
    const auto m1 = testing::disk_mask(img.size(), 15, 20, 7);
    const auto m2 = testing::rect_mask(img.size(), 35, 10, 50, 30);
    testing::CountingInpainter inp(std::make_shared<oracles::DiffusionInpainter>(400));
    const auto step1 = inp.inpaint(img, m1);
    inp.calls = 0;
    const auto out = inpaint_sequential(img, {m1, m2}, inp);
    CHECK(inp.calls == 2);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 60; ++x) {
        if (m1.get(x, y)) CHECK(out.at(x, y) == step1.at(x, y));
        if (!m1.get(x, y) && !m2.get(x, y)) CHECK(out.at(x, y) == img.at(x, y));
      }
  }

  TEST_CASE("merged single mask equals sequential") {
    const auto img = testing::textured_image({50, 40}, 3);
    const auto m = testing::disk_mask(img.size(), 25, 20, 9);
    oracles::DiffusionInpainter inp(300);
    CHECK(inpaint_merged(img, {m}, inp) == inpaint_sequential(img, {m}, inp));
  }

  TEST_CASE("merged and sequential agree within 1/255 on disjoint regions at convergence") {
    const auto img = testing::textured_image({64, 48}, 4);
    const auto m1 = testing::disk_mask(img.size(), 14, 14, 6);
    const auto m2 = testing::rect_mask(img.size(), 38, 26, 52, 40);
    oracles::DiffusionInpainter inp(4000);
    const auto a = inpaint_merged(img, {m1, m2}, inp);
    const auto b = inpaint_sequential(img, {m1, m2}, inp);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(int(a.at(x, y)[c]) - int(b.at(x, y)[c])) <= 1);
  }

  TEST_CASE("sequential errors name the step") {
    class Failing final : public oracles::Inpainter {
     public:
      int n = 0;
      RgbImage inpaint(const RgbImage& image, const BinaryMask&) override {
        if (++n == 2) throw Error(ErrorCode::oracle_failure, "boom");
        return image;
      }
      std::string name() const override { return "failing"; }
    } inp;
    const RgbImage img({10, 10});
    try {
      inpaint_sequential(img, {BinaryMask({10, 10}), BinaryMask({10, 10})}, inp);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::oracle_failure);
      CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
  }

  TEST_CASE("two objects on a synthetic view reach 25 dB against the clean plate") {
    auto spec = scenegen::standard_scene_spec(5, 2, {256, 256});
    spec.objects.resize(2);
    const auto scene = scenegen::generate(spec, 1);
    const auto& v = scene.views[0];
    oracles::DiffusionInpainter inp;
    const auto out = inpaint_sequential(v.image, v.masks, inp);
    const auto region = mask::unite_all(v.masks, v.image.size());
    CHECK(metrics::psnr(out, v.clean, &region) >= 25.0);
  }

  TEST_CASE("automatic mode: merged for overlap or four objects") {
    const Size sz{30, 30};
    const auto a = testing::rect_mask(sz, 0, 0, 5, 5), b = testing::rect_mask(sz, 10, 10, 15, 15);
    const auto c = testing::rect_mask(sz, 4, 4, 8, 8);
    CHECK(resolve_mode(InpaintMode::automatic, {a, b}) == InpaintMode::sequential);
    CHECK(resolve_mode(InpaintMode::automatic, {a, c}) == InpaintMode::merged);
    CHECK(resolve_mode(InpaintMode::automatic, {a, b, a, b}) == InpaintMode::merged);
    CHECK(resolve_mode(InpaintMode::sequential, {a, c}) == InpaintMode::sequential);
  }

  TEST_CASE("interaction preserves pixels outside the union") {
    BinaryMask a, b;
    const auto img = two_disks({100, 60}, a, b);
    PromptSet p;
    p.foreground = {{25, 30, 1}, {75, 30, 2}};
    oracles::RegionGrowSegmenter seg(10.0);
    oracles::DiffusionInpainter inp(200);
    const auto r = interact(img, p, seg, inp, InpaintMode::automatic);
    CHECK(r.mode == InpaintMode::sequential);
    const auto u = mask::unite(a, b);
    for (int y = 0; y < 60; ++y)
      for (int x = 0; x < 100; ++x)
        if (!u.get(x, y)) CHECK(r.inpainted_source.at(x, y) == img.at(x, y));
  }
}
