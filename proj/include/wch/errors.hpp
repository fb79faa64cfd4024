// SPDX-License-Identifier: Apache-2.0
//
// wchlab - dimensionality-guided sizing laboratory for wireless channel models
// Copyright (C) 2026 the wchlab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WCH_ERRORS_HPP
#define WCH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wch {

/// Distinct failure values used across the library. Every library error is
/// thrown as a wch::Error carrying one of these codes, so callers (and the
/// CLI) can react to the kind of failure without string matching.
enum class ErrorCode {
    invalid_argument,
    invalid_shape,
    invalid_state,
    bad_magic,
    version_mismatch,
    truncated_file,
    shape_overflow,
    io_failure,
    degenerate_sample,
    degenerate_distances,
    degenerate_data,
    training_diverged,
    adaptation_diverged,
    infeasible_config,
};

inline const char *error_code_name(ErrorCode c) {
    switch (c) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_shape: return "invalid_shape";
    case ErrorCode::invalid_state: return "invalid_state";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::truncated_file: return "truncated_file";
    case ErrorCode::shape_overflow: return "shape_overflow";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::degenerate_sample: return "degenerate_sample";
    case ErrorCode::degenerate_distances: return "degenerate_distances";
    case ErrorCode::degenerate_data: return "degenerate_data";
    case ErrorCode::training_diverged: return "training_diverged";
    case ErrorCode::adaptation_diverged: return "adaptation_diverged";
    case ErrorCode::infeasible_config: return "infeasible_config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string &what) {
    throw Error(code, std::string(error_code_name(code)) + ": " + what);
}

inline void require(bool ok, ErrorCode code, const std::string &what) {
    if (!ok)
        throw_error(code, what);
}

} // namespace wch

#endif
