// SPDX-License-Identifier: Apache-2.0
#include "homer/io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "homer/error.hpp"

namespace homer::io {

namespace {

struct WriteBuffer {
  std::vector<std::uint8_t>* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct ReadBuffer {
  const std::vector<std::uint8_t>* in;
  std::size_t pos = 0;
};

void png_read_from_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* buf = static_cast<ReadBuffer*>(png_get_io_ptr(png));
  if (buf->pos + length > buf->in->size()) png_error(png, "truncated PNG data");
  std::memcpy(data, buf->in->data() + buf->pos, length);
  buf->pos += length;
}

[[noreturn]] void png_error_throw(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::io_error, std::string("libpng: ") + msg);
}

void png_warning_ignore(png_structp, png_const_charp) {}

// Encodes rows of `channels` x `bit_depth` samples; `row_bytes(y)` yields a
// pointer to packed row y.
template <typename RowFn>
std::vector<std::uint8_t> encode(int width, int height, int color_type, int bit_depth, RowFn row) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
  if (!png) fail(ErrorCode::io_error, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorCode::io_error, "png_create_info_struct failed");
  }
  try {
    WriteBuffer buf{&out};
    png_set_write_fn(png, &buf, png_write_to_vector, png_flush_noop);
    png_set_compression_level(png, 3);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) png_write_row(png, row(y));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

struct Decoded {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

Decoded decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    fail(ErrorCode::io_error, "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
  if (!png) fail(ErrorCode::io_error, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorCode::io_error, "png_create_info_struct failed");
  }
  Decoded d;
  try {
    ReadBuffer buf{&bytes};
    png_set_read_fn(png, &buf, png_read_from_vector);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    d.width = static_cast<int>(png_get_image_width(png, info));
    d.height = static_cast<int>(png_get_image_height(png, info));
    const auto rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<std::size_t>(d.width) * 3) fail(ErrorCode::io_error, "unexpected PNG layout");
    d.rgb.resize(rowbytes * static_cast<std::size_t>(d.height));
    for (int y = 0; y < d.height; ++y) png_read_row(png, d.rgb.data() + rowbytes * static_cast<std::size_t>(y), nullptr);
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io_error, "short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  const std::size_t stride = static_cast<std::size_t>(image.width()) * 3;
  return encode(image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, [&](int y) {
    return const_cast<png_bytep>(image.bytes().data() + stride * static_cast<std::size_t>(y));
  });
}

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  Decoded d = decode(bytes);
  RgbImage img(Size{d.width, d.height});
  std::memcpy(img.bytes().data(), d.rgb.data(), d.rgb.size());
  return img;
}

RgbImage read_png(const std::filesystem::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file(path, encode_png(image));
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  const std::size_t stride = (static_cast<std::size_t>(mask.width()) + 7) / 8;
  std::vector<std::uint8_t> row(stride);
  return encode(mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, [&](int y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.get(x, y)) row[static_cast<std::size_t>(x) / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    }
    return row.data();
  });
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  Decoded d;
  try {
    d = decode(read_file(path));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
  BinaryMask m(Size{d.width, d.height});
  auto bits = m.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = (d.rgb[3 * i] | d.rgb[3 * i + 1] | d.rgb[3 * i + 2]) != 0 ? 1 : 0;
  }
  return m;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  write_file(path, encode_mask_png(mask));
}

nlohmann::json encode_rle(const BinaryMask& mask) {
  std::vector<std::uint64_t> counts;
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (auto b : mask.bits()) {
    if (b != current) {
      counts.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  counts.push_back(run);
  return {{"width", mask.width()}, {"height", mask.height()}, {"counts", counts}};
}

BinaryMask decode_rle(const nlohmann::json& rle) {
  try {
    const int w = rle.at("width").get<int>();
    const int h = rle.at("height").get<int>();
    if (w < 0 || h < 0) fail(ErrorCode::parse_error, "RLE: negative size");
    BinaryMask m(Size{w, h});
    auto bits = m.bits();
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (const auto& c : rle.at("counts")) {
      const auto n = c.get<std::uint64_t>();
      if (pos + n > bits.size()) fail(ErrorCode::parse_error, "RLE: runs exceed mask size");
      std::fill(bits.begin() + static_cast<std::ptrdiff_t>(pos), bits.begin() + static_cast<std::ptrdiff_t>(pos + n), value);
      pos += n;
      value ^= 1;
    }
    if (pos != bits.size()) fail(ErrorCode::parse_error, "RLE: runs do not cover the mask");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("RLE: ") + e.what());
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
  write_text(path, value.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace homer::io
