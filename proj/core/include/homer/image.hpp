// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace homer {

/// Continuous image-plane coordinate. Pixel (x, y) has its center at (x, y).
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct PixelPoint {
  int x = 0;
  int y = 0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct Size {
  int width = 0;
  int height = 0;

  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  bool contains(PixelPoint p) const noexcept { return contains(p.x, p.y); }

  friend bool operator==(const Size&, const Size&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit interleaved RGB raster.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(Size size, Rgb fill = {0, 0, 0});

  Size size() const noexcept { return size_; }
  int width() const noexcept { return size_.width; }
  int height() const noexcept { return size_.height; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t* pixel(int x, int y) noexcept { return data_.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const noexcept { return data_.data() + offset(x, y); }
  Rgb at(int x, int y) const noexcept {
    const auto* p = pixel(x, y);
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    auto* p = pixel(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  std::span<std::uint8_t> bytes() noexcept { return data_; }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
            static_cast<std::size_t>(x)) * 3;
  }

  Size size_{};
  std::vector<std::uint8_t> data_;
};

/// Per-pixel membership map; 1 marks a pixel of the object to be removed.
class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(Size size, bool value = false);

  Size size() const noexcept { return size_; }
  int width() const noexcept { return size_.width; }
  int height() const noexcept { return size_.height; }

  bool get(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v = true) noexcept { bits_[index(x, y)] = v ? 1 : 0; }
  /// Out-of-frame lookups read as 0.
  bool get_or_zero(int x, int y) const noexcept { return size_.contains(x, y) && get(x, y); }

  std::size_t area() const noexcept;
  bool empty() const noexcept { return area() == 0; }

  std::span<std::uint8_t> bits() noexcept { return bits_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(size_.width) +
           static_cast<std::size_t>(x);
  }

  Size size_{};
  std::vector<std::uint8_t> bits_;
};

}  // namespace homer
