// Copyright 2026 The ODExAI Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ODEXAI_ERROR_H_
#define ODEXAI_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace odexai {

// Every failure surfaced by the library carries one of these codes so that
// callers (CLI, service, harness) can map it without string matching.
enum class ErrorCode {
  kInvalidArgument,
  kZeroVector,
  kDimensionMismatch,
  kTooManySegments,
  kBackendUnavailable,
  kProtocolViolation,
  kTimeout,
  kFormatError,
  kNonFiniteTensor,
  kCaptureMismatch,
  kUnsupported,
  kEmptySample,
  kZeroEnergy,
  kBadDomain,
  kParseError,
  kMissingImage,
  kEmptyGroup,
  kNotFound,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace odexai

#endif  // ODEXAI_ERROR_H_
