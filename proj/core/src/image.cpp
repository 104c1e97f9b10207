// SPDX-License-Identifier: Apache-2.0
#include "homer/image.hpp"

#include <algorithm>
#include <string>

#include "homer/error.hpp"

namespace homer {

namespace {

void check_size(Size size) {
  if (size.width < 0 || size.height < 0) {
    fail(ErrorCode::invalid_argument,
         "negative image size " + std::to_string(size.width) + "x" + std::to_string(size.height));
  }
}

}  // namespace

RgbImage::RgbImage(Size size, Rgb fill) : size_(size) {
  check_size(size);
  data_.resize(size.pixel_count() * 3);
  for (std::size_t i = 0; i < size.pixel_count(); ++i) {
    data_[3 * i + 0] = fill[0];
    data_[3 * i + 1] = fill[1];
    data_[3 * i + 2] = fill[2];
  }
}

BinaryMask::BinaryMask(Size size, bool value) : size_(size) {
  check_size(size);
  bits_.assign(size.pixel_count(), value ? 1 : 0);
}

std::size_t BinaryMask::area() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace homer
