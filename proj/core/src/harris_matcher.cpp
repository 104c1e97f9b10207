// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "homer/error.hpp"
#include "homer/oracles.hpp"

namespace homer::oracles {

namespace {

std::vector<float> to_gray(const RgbImage& image) {
  std::vector<float> g(image.size().pixel_count());
  const auto bytes = image.bytes();
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (0.299f * bytes[3 * i] + 0.587f * bytes[3 * i + 1] + 0.114f * bytes[3 * i + 2]) / 255.0f;
  }
  return g;
}

void gaussian_blur(std::vector<float>& img, int w, int h, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    total += v;
  }
  for (auto& k : kernel) k = static_cast<float>(k / total);

  std::vector<float> tmp(img.size());
  for (int y = 0; y < h; ++y) {
    const float* row = img.data() + static_cast<std::size_t>(y) * w;
    float* out = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        s += kernel[static_cast<std::size_t>(i + radius)] * row[xx];
      }
      out[x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    float* out = img.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) out[x] = 0.0f;
    for (int i = -radius; i <= radius; ++i) {
      const int yy = std::clamp(y + i, 0, h - 1);
      const float k = kernel[static_cast<std::size_t>(i + radius)];
      const float* src = tmp.data() + static_cast<std::size_t>(yy) * w;
      for (int x = 0; x < w; ++x) out[x] += k * src[x];
    }
  }
}

std::vector<float> harris_response(const std::vector<float>& gray, int w, int h, const HarrisConfig& cfg) {
  const std::size_t n = gray.size();
  std::vector<float> ixx(n, 0.0f), iyy(n, 0.0f), ixy(n, 0.0f);
  auto at = [&](int x, int y) {
    return gray[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = (at(x + 1, y - 1) + 2.0f * at(x + 1, y) + at(x + 1, y + 1) - at(x - 1, y - 1) -
                        2.0f * at(x - 1, y) - at(x - 1, y + 1)) / 8.0f;
      const float gy = (at(x - 1, y + 1) + 2.0f * at(x, y + 1) + at(x + 1, y + 1) - at(x - 1, y - 1) -
                        2.0f * at(x, y - 1) - at(x + 1, y - 1)) / 8.0f;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ixx[i] = gx * gx;
      iyy[i] = gy * gy;
      ixy[i] = gx * gy;
    }
  }
  gaussian_blur(ixx, w, h, cfg.window_sigma);
  gaussian_blur(iyy, w, h, cfg.window_sigma);
  gaussian_blur(ixy, w, h, cfg.window_sigma);
  std::vector<float> r(n);
  const float k = static_cast<float>(cfg.harris_k);
  for (std::size_t i = 0; i < n; ++i) {
    const float tr = ixx[i] + iyy[i];
    r[i] = ixx[i] * iyy[i] - ixy[i] * ixy[i] - k * tr * tr;
  }
  return r;
}

std::vector<Corner> detect_on_gray(const std::vector<float>& gray, int w, int h, const HarrisConfig& cfg) {
  std::vector<Corner> corners;
  if (w < 3 || h < 3) return corners;
  const auto r = harris_response(gray, w, h, cfg);
  const int margin = cfg.patch_radius + 1;
  float max_r = 0.0f;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) max_r = std::max(max_r, r[static_cast<std::size_t>(y) * w + x]);
  }
  const float thr = std::max(static_cast<float>(cfg.relative_threshold) * max_r, 1e-14f);

  struct Candidate {
    float response;
    std::size_t index;
  };
  std::vector<Candidate> cand;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float v = r[i];
      if (v <= thr) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && r[static_cast<std::size_t>(y + dy) * w + x + dx] > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cand.push_back({v, i});
    }
  }
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    return a.response != b.response ? a.response > b.response : a.index < b.index;
  });

  const int cell = std::max(1, cfg.nms_radius);
  const int gw = w / cell + 1;
  const int gh = h / cell + 1;
  std::vector<std::vector<PixelPoint>> grid(static_cast<std::size_t>(gw * gh));
  const int r2 = cfg.nms_radius * cfg.nms_radius;
  for (const auto& c : cand) {
    if (static_cast<int>(corners.size()) >= cfg.max_points) break;
    const int x = static_cast<int>(c.index % static_cast<std::size_t>(w));
    const int y = static_cast<int>(c.index / static_cast<std::size_t>(w));
    const int cx = x / cell, cy = y / cell;
    bool suppressed = false;
    for (int gy = std::max(0, cy - 1); gy <= std::min(gh - 1, cy + 1) && !suppressed; ++gy) {
      for (int gx = std::max(0, cx - 1); gx <= std::min(gw - 1, cx + 1) && !suppressed; ++gx) {
        for (const auto& p : grid[static_cast<std::size_t>(gy * gw + gx)]) {
          const int dx = p.x - x, dy = p.y - y;
          if (dx * dx + dy * dy <= r2) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    grid[static_cast<std::size_t>(cy * gw + cx)].push_back({x, y});
    corners.push_back({{x, y}, c.response});
  }
  return corners;
}

}  // namespace

struct HarrisNccMatcher::Features {
  std::vector<Corner> corners;
  std::vector<float> patches;  // corners x patch_len, zero-mean unit-norm
  int patch_len = 0;
};

namespace {

std::shared_ptr<HarrisNccMatcher::Features> extract(const RgbImage& image, const HarrisConfig& cfg) {
  const auto gray = to_gray(image);
  const int w = image.width(), h = image.height();
  auto f = std::make_shared<HarrisNccMatcher::Features>();
  auto corners = detect_on_gray(gray, w, h, cfg);
  const int pr = cfg.patch_radius;
  f->patch_len = (2 * pr + 1) * (2 * pr + 1);
  std::vector<float> patch(static_cast<std::size_t>(f->patch_len));
  for (const auto& c : corners) {
    double mean = 0.0;
    int k = 0;
    for (int dy = -pr; dy <= pr; ++dy) {
      for (int dx = -pr; dx <= pr; ++dx) {
        const float v = gray[static_cast<std::size_t>(c.at.y + dy) * w + c.at.x + dx];
        patch[static_cast<std::size_t>(k++)] = v;
        mean += v;
      }
    }
    mean /= f->patch_len;
    double norm = 0.0;
    for (auto& v : patch) {
      v = static_cast<float>(v - mean);
      norm += static_cast<double>(v) * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-9) continue;
    for (auto v : patch) f->patches.push_back(static_cast<float>(v / norm));
    f->corners.push_back(c);
  }
  return f;
}

MatchResult match_features(const HarrisNccMatcher::Features& fa, const HarrisNccMatcher::Features& fb,
                           const HarrisConfig& cfg) {
  if (fa.corners.size() < cfg.min_corners || fb.corners.size() < cfg.min_corners) {
    fail(ErrorCode::insufficient_texture,
         "too few corners (" + std::to_string(fa.corners.size()) + " and " +
             std::to_string(fb.corners.size()) + ", need " + std::to_string(cfg.min_corners) + ")");
  }
  const std::size_t na = fa.corners.size(), nb = fb.corners.size();
  const auto len = static_cast<std::size_t>(fa.patch_len);
  std::vector<float> ncc(na * nb);
  for (std::size_t i = 0; i < na; ++i) {
    const float* pa = fa.patches.data() + i * len;
    for (std::size_t j = 0; j < nb; ++j) {
      const float* pb = fb.patches.data() + j * len;
      float s = 0.0f;
      for (std::size_t k = 0; k < len; ++k) s += pa[k] * pb[k];
      ncc[i * nb + j] = s;
    }
  }
  std::vector<std::size_t> best_a(na, 0), best_b(nb, 0);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 1; j < nb; ++j) {
      if (ncc[i * nb + j] > ncc[i * nb + best_a[i]]) best_a[i] = j;
    }
  }
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t i = 1; i < na; ++i) {
      if (ncc[i * nb + j] > ncc[best_b[j] * nb + j]) best_b[j] = i;
    }
  }
  MatchResult out;
  for (std::size_t i = 0; i < na; ++i) {
    const std::size_t j = best_a[i];
    if (best_b[j] != i) continue;
    const double score = ncc[i * nb + j];
    if (score < cfg.min_ncc) continue;
    out.correspondences.push_back(
        {{static_cast<double>(fa.corners[i].at.x), static_cast<double>(fa.corners[i].at.y)},
         {static_cast<double>(fb.corners[j].at.x), static_cast<double>(fb.corners[j].at.y)},
         std::clamp(score, 0.0, 1.0)});
  }
  out.similarity = static_cast<double>(out.correspondences.size()) / static_cast<double>(std::min(na, nb));
  return out;
}

}  // namespace

std::vector<Corner> detect_harris_corners(const RgbImage& image, const HarrisConfig& cfg) {
  return detect_on_gray(to_gray(image), image.width(), image.height(), cfg);
}

MatchResult match_harris_ncc(const RgbImage& a, const RgbImage& b, const HarrisConfig& cfg) {
  const auto fa = extract(a, cfg);
  const auto fb = extract(b, cfg);
  return match_features(*fa, *fb, cfg);
}

HarrisNccMatcher::HarrisNccMatcher(HarrisConfig cfg) : cfg_(cfg) {}
HarrisNccMatcher::~HarrisNccMatcher() = default;

std::shared_ptr<const HarrisNccMatcher::Features> HarrisNccMatcher::features_for(const RgbImage& image,
                                                                                 std::size_t view) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(view); it != cache_.end()) return it->second;
  }
  auto f = extract(image, cfg_);
  std::lock_guard lock(mutex_);
  return cache_.emplace(view, std::move(f)).first->second;
}

MatchResult HarrisNccMatcher::match(const RgbImage& a, const RgbImage& b, ViewPair pair) {
  const auto fa = features_for(a, pair.from);
  const auto fb = features_for(b, pair.to);
  return match_features(*fa, *fb, cfg_);
}

}  // namespace homer::oracles
