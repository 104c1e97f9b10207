// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "homer/oracles.hpp"

namespace homer::oracles {

/// External-process oracle bridge. Each call spawns `/bin/sh -c command`,
/// writes one JSON request to its stdin and reads one JSON reply from its
/// stdout. Images and masks travel as PNG files in a per-call temp directory.
///
/// Request: {op, image_path, aux_image_path?, mask_path?, fg_points?, bg_points?}
/// Reply:   {status, mask_path? | image_path? | correspondences?, similarity?}
///
/// A non-"ok" status, a non-zero exit or unparsable output raises
/// Error{oracle_failure} whose message carries the reply verbatim.
nlohmann::json call_oracle_process(const std::string& command, const nlohmann::json& request);

class SubprocessSegmenter final : public Segmenter {
 public:
  explicit SubprocessSegmenter(std::string command) : command_(std::move(command)) {}
  BinaryMask segment(const RgbImage& image, std::span<const PixelPoint> foreground,
                     std::span<const PixelPoint> background) override;
  bool concurrent_safe() const override { return false; }
  std::string name() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
};

class SubprocessInpainter final : public Inpainter {
 public:
  explicit SubprocessInpainter(std::string command) : command_(std::move(command)) {}
  RgbImage inpaint(const RgbImage& image, const BinaryMask& mask) override;
  bool concurrent_safe() const override { return false; }
  std::string name() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
};

class SubprocessMatcher final : public Matcher {
 public:
  explicit SubprocessMatcher(std::string command) : command_(std::move(command)) {}
  MatchResult match(const RgbImage& a, const RgbImage& b, ViewPair pair) override;
  bool concurrent_safe() const override { return false; }
  std::string name() const override { return "subprocess:" + command_; }

 private:
  std::string command_;
};

/// Server side of the protocol: answers one request with the given oracles,
/// writing output files next to the request's image_path. Errors become a
/// reply with status "error" rather than an exception.
nlohmann::json serve_oracle_request(const nlohmann::json& request, Segmenter& segmenter,
                                    Inpainter& inpainter, Matcher& matcher);

}  // namespace homer::oracles
