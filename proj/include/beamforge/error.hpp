// Copyright 2026 The BeamForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace beamforge {

enum class ErrorCode {
  invalid_argument,
  degenerate_axis,
  io_failure,
  truncated_file,
  bad_magic,
  unsupported_version,
  unsupported_layout,
  malformed_header,
  invalid_beam_label,
  missing_beam_labels,
  insufficient_points,
  invalid_vfov,
  degenerate_vfov,
  upsample_requested,
  model_cloud_mismatch,
  empty_intersection,
  shape_mismatch,
  non_finite_input,
  config_error,
  model_missing,
  hook_failure,
  stale_manifest,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::degenerate_axis: return "degenerate-axis";
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::truncated_file: return "truncated-file";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::unsupported_version: return "unsupported-version";
    case ErrorCode::unsupported_layout: return "unsupported-layout";
    case ErrorCode::malformed_header: return "malformed-header";
    case ErrorCode::invalid_beam_label: return "invalid-beam-label";
    case ErrorCode::missing_beam_labels: return "missing-beam-labels";
    case ErrorCode::insufficient_points: return "insufficient-points";
    case ErrorCode::invalid_vfov: return "invalid-vfov";
    case ErrorCode::degenerate_vfov: return "degenerate-vfov";
    case ErrorCode::upsample_requested: return "upsample-requested";
    case ErrorCode::model_cloud_mismatch: return "model-cloud-mismatch";
    case ErrorCode::empty_intersection: return "empty-intersection";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::non_finite_input: return "non-finite-input";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::model_missing: return "model-missing";
    case ErrorCode::hook_failure: return "hook-failure";
    case ErrorCode::stale_manifest: return "stale-manifest";
  }
  return "unknown";
}

/// Exception carrying a typed error code. Every failure raised by the library
/// is an Error; callers switch on code() rather than parsing what().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace beamforge
