// SPDX-License-Identifier: Apache-2.0
#include "fakes.hpp"

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace homer::testing {

namespace fs = std::filesystem;

BinaryMask EchoSegmenter::segment(const RgbImage&, std::span<const PixelPoint> fg, std::span<const PixelPoint>) {
  ++calls;
  if (!fg.empty()) {
    for (const auto& m : masks_)
      if (m.size().contains(fg.front()) && m.get(fg.front().x, fg.front().y)) return m;
  }
  return masks_.front();
}

RgbImage FillInpainter::inpaint(const RgbImage& image, const BinaryMask& mask) {
  RgbImage out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      if (mask.get(x, y)) out.set(x, y, color_);
  return out;
}

oracles::MatchResult FixedMatcher::match(const RgbImage& a, const RgbImage& b, oracles::ViewPair) {
  oracles::MatchResult r;
  for (int y = 8; y < a.height(); y += std::max(1, a.height() / 12)) {
    for (int x = 8; x < a.width(); x += std::max(1, a.width() / 12)) {
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      const auto q = h_.try_apply(p);
      if (!q || !b.size().contains(static_cast<int>(std::lround(q->x)), static_cast<int>(std::lround(q->y))))
        continue;
      r.correspondences.push_back({p, *q, 1.0});
    }
  }
  r.similarity = r.correspondences.empty() ? 0.0 : 1.0;
  return r;
}

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "homer-test-XXXXXX").string();
  if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::uint64_t directory_digest(const fs::path& root, const std::vector<std::string>& skip_names) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    if (std::find(skip_names.begin(), skip_names.end(), e.path().filename().string()) != skip_names.end()) continue;
    files.push_back(fs::relative(e.path(), root));
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ull;
  auto fold = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (const auto& f : files) {
    fold(f.generic_string());
    std::ifstream in(root / f, std::ios::binary);
    fold(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  }
  return h;
}

}  // namespace homer::testing
