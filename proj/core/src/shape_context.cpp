// SPDX-License-Identifier: Apache-2.0
#include "homer/shape_context.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "homer/error.hpp"
#include "homer/mask.hpp"
#include "homer/random.hpp"

namespace homer::mask {

void validate(const ShapeContextConfig& cfg) {
  if (cfg.boundary_samples == 0 || cfg.radial_bins <= 0 || cfg.angular_bins <= 0) {
    fail(ErrorCode::invalid_argument, "shape context sample and bin counts must be positive");
  }
  if (!(cfg.r_inner > 0.0 && cfg.r_inner < cfg.r_outer)) {
    fail(ErrorCode::invalid_argument, "shape context needs 0 < r_inner < r_outer");
  }
  if (cfg.boundary_samples < static_cast<std::size_t>(cfg.angular_bins)) {
    fail(ErrorCode::invalid_argument, "boundary_samples must be >= angular_bins");
  }
  if (cfg.population_cap < 8) fail(ErrorCode::invalid_argument, "population_cap must be >= 8");
}

namespace {

// Evenly spaced picks along the boundary ordered by angle about its mean,
// starting at a seeded fractional offset. Each pixel has the same inclusion
// probability, and a uniformly scaled shape yields corresponding points.
std::vector<PixelPoint> systematic_sample(std::vector<PixelPoint> boundary, std::size_t n, std::uint64_t seed) {
  if (boundary.size() <= n) return boundary;
  double cx = 0.0, cy = 0.0;
  for (const auto& p : boundary) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(boundary.size());
  cy /= static_cast<double>(boundary.size());
  struct Keyed {
    double angle, radius;
    PixelPoint p;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(boundary.size());
  for (const auto& p : boundary) {
    keyed.push_back({std::atan2(p.y - cy, p.x - cx), std::hypot(p.x - cx, p.y - cy), p});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.angle, a.radius, a.p.y, a.p.x) < std::tie(b.angle, b.radius, b.p.y, b.p.x);
  });
  Rng rng(seed);
  const double step = static_cast<double>(keyed.size()) / static_cast<double>(n);
  const double offset = rng.uniform01() * step;
  std::vector<PixelPoint> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = std::min(keyed.size() - 1, static_cast<std::size_t>(offset + step * static_cast<double>(k)));
    out.push_back(keyed[i].p);
  }
  return out;
}

}  // namespace

ShapeDescriptor describe_shape(const BinaryMask& m, const ShapeContextConfig& cfg) {
  validate(cfg);
  auto boundary = boundary_pixels(m);
  if (boundary.empty()) fail(ErrorCode::empty_mask, "shape context of an empty mask");

  ShapeDescriptor d;
  d.bins = cfg.radial_bins * cfg.angular_bins;
  d.centers = systematic_sample(boundary, cfg.boundary_samples, cfg.rng_seed);
  std::vector<PixelPoint> population;
  if (boundary.size() <= cfg.population_cap) {
    population = std::move(boundary);
  } else {
    Rng rng(mix_seed(cfg.rng_seed, 0x5c));
    for (auto i : rng.sample_indices(boundary.size(), cfg.population_cap)) {
      population.push_back(boundary[i]);
    }
  }

  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < population.size(); ++i) {
    for (std::size_t j = i + 1; j < population.size(); ++j) {
      sum += std::hypot(double(population[i].x - population[j].x),
                        double(population[i].y - population[j].y));
      ++pairs;
    }
  }
  d.scale = pairs > 0 && sum > 0.0 ? sum / static_cast<double>(pairs) : 1.0;

  const double log_inner = std::log(cfg.r_inner);
  const double log_span = std::log(cfg.r_outer) - log_inner;
  const double two_pi = 2.0 * std::numbers::pi;
  d.histograms.assign(d.centers.size() * static_cast<std::size_t>(d.bins), 0.0);
  for (std::size_t c = 0; c < d.centers.size(); ++c) {
    double* hist = d.histograms.data() + c * static_cast<std::size_t>(d.bins);
    double total = 0.0;
    const auto center = d.centers[c];
    for (const auto& q : population) {
      const double dx = q.x - center.x;
      const double dy = q.y - center.y;
      if (dx == 0.0 && dy == 0.0) continue;
      const double r = std::hypot(dx, dy) / d.scale;
      if (r >= cfg.r_outer) continue;
      // Linear interpolation between neighbouring bins: cyclic in angle,
      // clamped at the ends in log radius.
      double u = 0.0;
      if (r >= cfg.r_inner) {
        u = std::clamp((std::log(r) - log_inner) / log_span * cfg.radial_bins - 0.5, 0.0,
                       static_cast<double>(cfg.radial_bins - 1));
      }
      const int r0 = std::min(static_cast<int>(u), cfg.radial_bins - 1);
      const int r1 = std::min(r0 + 1, cfg.radial_bins - 1);
      const double wr = u - r0;
      double theta = std::atan2(dy, dx);
      if (theta < 0.0) theta += two_pi;
      double t = theta / two_pi * cfg.angular_bins - 0.5;
      if (t < 0.0) t += cfg.angular_bins;
      const int a0 = std::min(static_cast<int>(t), cfg.angular_bins - 1);
      const int a1 = (a0 + 1) % cfg.angular_bins;
      const double wa = t - a0;
      hist[r0 * cfg.angular_bins + a0] += (1.0 - wr) * (1.0 - wa);
      hist[r0 * cfg.angular_bins + a1] += (1.0 - wr) * wa;
      hist[r1 * cfg.angular_bins + a0] += wr * (1.0 - wa);
      hist[r1 * cfg.angular_bins + a1] += wr * wa;
      total += 1.0;
    }
    if (total > 0.0) {
      for (int b = 0; b < d.bins; ++b) hist[b] /= total;
    }
  }
  return d;
}

double chi_squared(const double* g, const double* h, int bins) noexcept {
  double cost = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double s = g[b] + h[b];
    if (s > 0.0) {
      const double diff = g[b] - h[b];
      cost += diff * diff / s;
    }
  }
  return 0.5 * cost;
}

double descriptor_distance(const ShapeDescriptor& a, const ShapeDescriptor& b) {
  if (a.bins != b.bins) fail(ErrorCode::invalid_argument, "descriptor bin layouts differ");
  if (a.size() == 0 || b.size() == 0) fail(ErrorCode::empty_mask, "empty shape descriptor");
  struct Entry {
    double cost;
    std::uint32_t i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      entries.push_back({chi_squared(a.histogram(i), b.histogram(j), a.bins),
                         static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& l, const Entry& r) {
    return std::tie(l.cost, l.i, l.j) < std::tie(r.cost, r.i, r.j);
  });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  const std::size_t want = std::min(a.size(), b.size());
  std::size_t assigned = 0;
  double total = 0.0;
  for (const auto& e : entries) {
    if (used_a[e.i] || used_b[e.j]) continue;
    used_a[e.i] = used_b[e.j] = 1;
    total += e.cost;
    if (++assigned == want) break;
  }
  return total / static_cast<double>(assigned);
}

double shape_context_distance(const BinaryMask& a, const BinaryMask& b,
                              const ShapeContextConfig& cfg) {
  return descriptor_distance(describe_shape(a, cfg), describe_shape(b, cfg));
}

}  // namespace homer::mask
