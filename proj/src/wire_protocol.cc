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

#include "odexai/wire_protocol.h"

#include <chrono>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "odexai/detectors.h"
#include "odexai/error.h"
#include "odexai/image_io.h"
#include "odexai/whitebox.h"

namespace odexai::wire {
namespace {

using nlohmann::json;

[[noreturn]] void Violation(const std::string& what) {
  throw Error(ErrorCode::kProtocolViolation, what);
}

std::uint64_t ReadId(const json& j) {
  if (!j.contains("id") || !j["id"].is_number_unsigned()) {
    Violation("frame lacks an unsigned integer 'id'");
  }
  return j["id"].get<std::uint64_t>();
}

std::string ReadString(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    Violation(std::string("frame lacks string '") + key + "'");
  }
  return j[key].get<std::string>();
}

double ReadNumber(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    Violation(std::string("frame lacks number '") + key + "'");
  }
  return j[key].get<double>();
}

json DetectionToJson(const Detection& d) {
  return {{"bbox", {d.bbox().x1(), d.bbox().y1(), d.bbox().x2(), d.bbox().y2()}},
          {"objectness", d.objectness()},
          {"class_probs", d.class_probs()}};
}

Detection DetectionFromJson(const json& j) {
  if (!j.is_object()) Violation("detection must be an object");
  const json& box = j.contains("bbox") ? j["bbox"] : json();
  if (!box.is_array() || box.size() != 4) Violation("bbox must have 4 numbers");
  for (const auto& v : box) {
    if (!v.is_number()) Violation("bbox must have 4 numbers");
  }
  if (!j.contains("class_probs") || !j["class_probs"].is_array()) {
    Violation("detection lacks class_probs");
  }
  std::vector<double> probs;
  for (const auto& v : j["class_probs"]) {
    if (!v.is_number()) Violation("class_probs must be numbers");
    probs.push_back(v.get<double>());
  }
  try {
    return Detection(BBox(box[0].get<double>(), box[1].get<double>(),
                          box[2].get<double>(), box[3].get<double>()),
                     ReadNumber(j, "objectness"), std::move(probs));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kProtocolViolation) throw;
    Violation(std::string("invalid detection: ") + e.what());
  }
}

struct Encoder {
  json operator()(const Handshake& h) const {
    return {{"odexai_proto", kProtocolVersion},
            {"name", h.name},
            {"classes", h.classes},
            {"max_batch", h.max_batch},
            {"supports_whitebox", h.supports_whitebox}};
  }
  json operator()(const DetectRequest& r) const {
    return {{"id", r.id}, {"op", "detect"}, {"image_png_b64", r.image_png_b64}};
  }
  json operator()(const CaptureRequest& r) const {
    return {{"id", r.id},
            {"op", "capture"},
            {"image_png_b64", r.image_png_b64},
            {"layer", r.layer},
            {"target_index", r.target_index}};
  }
  json operator()(const DetectResponse& r) const {
    json dets = json::array();
    for (const auto& d : r.detections) dets.push_back(DetectionToJson(d));
    return {{"id", r.id}, {"detections", std::move(dets)}, {"timing_ms", r.timing_ms}};
  }
  json operator()(const CaptureResponse& r) const {
    return {{"id", r.id}, {"bundle_path", r.bundle_path}};
  }
  json operator()(const ErrorResponse& r) const {
    return {{"id", r.id}, {"error", r.error}};
  }
};

}  // namespace

std::string Encode(const Frame& frame) { return std::visit(Encoder{}, frame).dump(); }

Frame Decode(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) Violation("frame is not a JSON object");

  if (j.contains("odexai_proto")) {
    if (!j["odexai_proto"].is_number_integer() ||
        j["odexai_proto"].get<int>() != kProtocolVersion) {
      Violation("unsupported protocol version");
    }
    Handshake h;
    h.name = ReadString(j, "name");
    if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty()) {
      Violation("handshake needs a nonempty 'classes' array");
    }
    for (const auto& c : j["classes"]) {
      if (!c.is_string()) Violation("class names must be strings");
      h.classes.push_back(c.get<std::string>());
    }
    if (!j.contains("max_batch") || !j["max_batch"].is_number_unsigned() ||
        j["max_batch"].get<std::uint64_t>() < 1 ||
        j["max_batch"].get<std::uint64_t>() > 0xffffffffULL) {
      Violation("handshake needs max_batch >= 1");
    }
    h.max_batch = j["max_batch"].get<std::uint32_t>();
    if (!j.contains("supports_whitebox") || !j["supports_whitebox"].is_boolean()) {
      Violation("handshake needs boolean supports_whitebox");
    }
    h.supports_whitebox = j["supports_whitebox"].get<bool>();
    return h;
  }
  if (j.contains("op")) {
    const std::string op = ReadString(j, "op");
    if (op == "detect") {
      return DetectRequest{ReadId(j), ReadString(j, "image_png_b64")};
    }
    if (op == "capture") {
      CaptureRequest r{ReadId(j), ReadString(j, "image_png_b64"),
                       ReadString(j, "layer"), 0};
      if (!j.contains("target_index") || !j["target_index"].is_number_unsigned() ||
          j["target_index"].get<std::uint64_t>() > 0xffffffffULL) {
        Violation("capture needs u32 target_index");
      }
      r.target_index = j["target_index"].get<std::uint32_t>();
      return r;
    }
    Violation("unknown op '" + op + "'");
  }
  if (j.contains("error")) {
    return ErrorResponse{ReadId(j), ReadString(j, "error")};
  }
  if (j.contains("detections")) {
    DetectResponse r;
    r.id = ReadId(j);
    if (!j["detections"].is_array()) Violation("detections must be an array");
    for (const auto& d : j["detections"]) r.detections.push_back(DetectionFromJson(d));
    r.timing_ms = ReadNumber(j, "timing_ms");
    return r;
  }
  if (j.contains("bundle_path")) {
    return CaptureResponse{ReadId(j), ReadString(j, "bundle_path")};
  }
  Violation("unrecognized frame");
}

void ServeLoop(Detector& detector, std::istream& in, std::ostream& out,
               const std::filesystem::path& capture_dir) {
  const BackendDescriptor& desc = detector.descriptor();
  out << Encode(Handshake{desc.name, desc.class_names,
                          static_cast<std::uint32_t>(desc.max_batch),
                          desc.supports_whitebox})
      << '\n'
      << std::flush;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::uint64_t id = 0;
    Frame reply;
    try {
      const Frame request = Decode(line);
      if (const auto* det = std::get_if<DetectRequest>(&request)) {
        id = det->id;
        const auto start = std::chrono::steady_clock::now();
        const ImageBuffer image = DecodePng(Base64Decode(det->image_png_b64));
        std::vector<ImageBuffer> batch = {image};
        auto results = detector.Detect(batch);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start)
                              .count();
        reply = DetectResponse{id, std::move(results.at(0)), ms};
      } else if (const auto* cap = std::get_if<CaptureRequest>(&request)) {
        id = cap->id;
        const ImageBuffer image = DecodePng(Base64Decode(cap->image_png_b64));
        const WhiteBoxCapture capture =
            detector.Capture(image, cap->layer, cap->target_index);
        const auto path =
            capture_dir / ("capture_" + std::to_string(id) + ".odt");
        SaveWhiteBoxCapture(path, capture);
        reply = CaptureResponse{id, std::filesystem::absolute(path).string()};
      } else {
        reply = ErrorResponse{id, "expected a request frame"};
      }
    } catch (const std::exception& e) {
      reply = ErrorResponse{id, e.what()};
    }
    out << Encode(reply) << '\n' << std::flush;
  }
}

}  // namespace odexai::wire
