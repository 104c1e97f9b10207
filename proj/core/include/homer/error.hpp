// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace homer {

/// Stable error identifiers. The string form is part of the HTTP API and the
/// report format, so existing names must not change.
enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  degenerate_point,
  degenerate_configuration,
  degenerate_homography,
  too_few_correspondences,
  no_consensus,
  empty_mask,
  empty_region,
  too_small,
  prompt_conflict,
  invalid_prompt,
  full_frame_mask,
  insufficient_texture,
  segmenter_failed,
  oracle_failure,
  invariant_violation,
  missing_ground_truth,
  invalid_view_set,
  io_error,
  parse_error,
  pipeline_abort,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace homer
