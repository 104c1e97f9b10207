// SPDX-License-Identifier: Apache-2.0
#include "homer/error.hpp"

namespace homer {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::degenerate_point: return "degenerate_point";
    case ErrorCode::degenerate_configuration: return "degenerate_configuration";
    case ErrorCode::degenerate_homography: return "degenerate_homography";
    case ErrorCode::too_few_correspondences: return "too_few_correspondences";
    case ErrorCode::no_consensus: return "no_consensus";
    case ErrorCode::empty_mask: return "empty_mask";
    case ErrorCode::empty_region: return "empty_region";
    case ErrorCode::too_small: return "too_small";
    case ErrorCode::prompt_conflict: return "prompt_conflict";
    case ErrorCode::invalid_prompt: return "invalid_prompt";
    case ErrorCode::full_frame_mask: return "full_frame_mask";
    case ErrorCode::insufficient_texture: return "insufficient_texture";
    case ErrorCode::segmenter_failed: return "segmenter_failed";
    case ErrorCode::oracle_failure: return "oracle_failure";
    case ErrorCode::invariant_violation: return "invariant_violation";
    case ErrorCode::missing_ground_truth: return "missing_ground_truth";
    case ErrorCode::invalid_view_set: return "invalid_view_set";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::pipeline_abort: return "pipeline_abort";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace homer
