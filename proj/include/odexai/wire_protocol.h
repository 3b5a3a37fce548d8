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

#ifndef ODEXAI_WIRE_PROTOCOL_H_
#define ODEXAI_WIRE_PROTOCOL_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "odexai/core.h"

namespace odexai {

class Detector;

// Wire protocol v1: one JSON object per line over a byte stream.
namespace wire {

inline constexpr int kProtocolVersion = 1;

struct Handshake {
  std::string name;
  std::vector<std::string> classes;
  std::uint32_t max_batch = 1;
  bool supports_whitebox = false;
  friend bool operator==(const Handshake&, const Handshake&) = default;
};

struct DetectRequest {
  std::uint64_t id = 0;
  std::string image_png_b64;
  friend bool operator==(const DetectRequest&, const DetectRequest&) = default;
};

struct CaptureRequest {
  std::uint64_t id = 0;
  std::string image_png_b64;
  std::string layer;
  std::uint32_t target_index = 0;
  friend bool operator==(const CaptureRequest&, const CaptureRequest&) = default;
};

struct DetectResponse {
  std::uint64_t id = 0;
  std::vector<Detection> detections;
  double timing_ms = 0.0;
  friend bool operator==(const DetectResponse&, const DetectResponse&) = default;
};

struct CaptureResponse {
  std::uint64_t id = 0;
  std::string bundle_path;
  friend bool operator==(const CaptureResponse&, const CaptureResponse&) = default;
};

struct ErrorResponse {
  std::uint64_t id = 0;
  std::string error;
  friend bool operator==(const ErrorResponse&, const ErrorResponse&) = default;
};

using Frame = std::variant<Handshake, DetectRequest, CaptureRequest,
                           DetectResponse, CaptureResponse, ErrorResponse>;

// Compact single-line JSON, no trailing newline.
std::string Encode(const Frame& frame);
// Throws kProtocolViolation for anything that is not a valid v1 frame.
Frame Decode(std::string_view line);

// Serves a detector over the protocol until EOF on `in`. Capture bundles are
// written below capture_dir. Malformed requests are answered with an
// ErrorResponse (id 0 when the id is unreadable).
void ServeLoop(Detector& detector, std::istream& in, std::ostream& out,
               const std::filesystem::path& capture_dir);

}  // namespace wire
}  // namespace odexai

#endif  // ODEXAI_WIRE_PROTOCOL_H_
