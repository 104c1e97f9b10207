// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "homer/geometry.hpp"
#include "homer/oracles.hpp"
#include "homer/shape_context.hpp"

using namespace homer;

namespace {

BinaryMask disk(Size size, double cx, double cy, double r) {
  BinaryMask m(size);
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x)
      if (std::hypot(x - cx, y - cy) <= r) m.set(x, y);
  return m;
}

RgbImage noise_image(Size size, std::uint64_t seed) {
  RgbImage img(size);
  std::mt19937_64 gen(seed);
  for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(gen() & 0xff);
  return img;
}

const geometry::Homography kMild =
    geometry::Homography::from_row_major({1.02, 0.01, 4.0, -0.012, 0.99, -3.0, 1e-5, -2e-5, 1.0});

std::vector<geometry::Correspondence> synthetic_matches(std::size_t n, double outlier_ratio) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480), u01(0, 1);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<geometry::Correspondence> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p{ux(gen), uy(gen)};
    Point2 q = kMild.apply(p);
    q = u01(gen) < outlier_ratio ? Point2{ux(gen), uy(gen)} : Point2{q.x + noise(gen), q.y + noise(gen)};
    out.push_back({p, q, 1.0});
  }
  return out;
}

void BM_Ransac(benchmark::State& state) {
  const auto matches = synthetic_matches(static_cast<std::size_t>(state.range(0)), 0.3);
  geometry::RansacConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(geometry::ransac_estimate(matches, cfg));
}
BENCHMARK(BM_Ransac)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_WarpMask(benchmark::State& state) {
  const Size size{static_cast<int>(state.range(0)), static_cast<int>(state.range(0) * 9 / 16)};
  const auto m = disk(size, size.width / 2.0, size.height / 2.0, size.height / 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::warp_mask(m, kMild, size));
  state.SetItemsProcessed(state.iterations() * size.width * size.height);
}
BENCHMARK(BM_WarpMask)->Arg(512)->Arg(1920)->Unit(benchmark::kMillisecond);

void BM_WarpImage(benchmark::State& state) {
  const Size size{static_cast<int>(state.range(0)), static_cast<int>(state.range(0) * 9 / 16)};
  const auto img = noise_image(size, 1);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::warp_image(img, kMild, size));
  state.SetItemsProcessed(state.iterations() * size.width * size.height);
}
BENCHMARK(BM_WarpImage)->Arg(512)->Arg(1920)->Unit(benchmark::kMillisecond);

void BM_ShapeContextDistance(benchmark::State& state) {
  const double r = static_cast<double>(state.range(0));
  const Size size{static_cast<int>(4 * r), static_cast<int>(4 * r)};
  const auto a = disk(size, 2 * r, 2 * r, r);
  const auto b = disk(size, 2 * r + 3, 2 * r - 2, r * 0.95);
  const mask::ShapeContextConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(mask::shape_context_distance(a, b, cfg));
}
BENCHMARK(BM_ShapeContextDistance)->Arg(30)->Arg(120)->Unit(benchmark::kMillisecond);

void BM_RegionGrow(benchmark::State& state) {
  const Size size{static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  RgbImage img(size, {40, 40, 40});
  const auto d = disk(size, size.width / 2.0, size.height / 2.0, size.width / 5.0);
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x)
      if (d.get(x, y)) img.set(x, y, {220, 180, 30});
  const std::vector<PixelPoint> fg{{size.width / 2, size.height / 2}};
  for (auto _ : state) benchmark::DoNotOptimize(oracles::region_grow_segment(img, fg, {}));
}
BENCHMARK(BM_RegionGrow)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_DiffusionInpaint(benchmark::State& state) {
  const Size size{256, 256};
  const auto img = noise_image(size, 3);
  const auto hole = disk(size, 128, 128, static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(oracles::diffusion_inpaint(img, hole));
}
BENCHMARK(BM_DiffusionInpaint)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
