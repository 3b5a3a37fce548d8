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

#include "odexai/core.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "odexai/error.h"

namespace odexai {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kTooManySegments: return "TooManySegments";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kNonFiniteTensor: return "NonFiniteTensor";
    case ErrorCode::kCaptureMismatch: return "CaptureMismatch";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kZeroEnergy: return "ZeroEnergy";
    case ErrorCode::kBadDomain: return "BadDomain";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

BBox::BBox(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  for (double v : {x1, y1, x2, y2}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "box coordinates must be finite and non-negative");
    }
  }
  if (!(x2 > x1) || !(y2 > y1)) {
    throw Error(ErrorCode::kInvalidArgument,
                "box must satisfy x2 > x1 and y2 > y1");
  }
}

Detection::Detection(BBox bbox, double objectness,
                     std::vector<double> class_probs)
    : bbox_(bbox),
      objectness_(objectness),
      class_probs_(std::move(class_probs)),
      label_(0) {
  if (!(objectness_ >= 0.0 && objectness_ <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "objectness outside [0,1]");
  }
  if (class_probs_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "class_probs is empty");
  }
  for (double p : class_probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "class probability outside [0,1]");
    }
  }
  label_ = static_cast<std::size_t>(
      std::max_element(class_probs_.begin(), class_probs_.end()) -
      class_probs_.begin());
}

SaliencyMap::SaliencyMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "saliency dims must be positive");
  }
  if (values_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimensionMismatch,
                "saliency value count does not match width*height");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "saliency contains NaN/Inf");
    }
  }
}

SaliencyMap::SaliencyMap(int width, int height, double fill)
    : SaliencyMap(width, height,
                  std::vector<double>(static_cast<std::size_t>(
                                          std::max(width, 0)) *
                                          std::max(height, 0),
                                      fill)) {}

ImageBuffer::ImageBuffer(int width, int height)
    : ImageBuffer(width, height,
                  std::vector<float>(static_cast<std::size_t>(
                                         std::max(width, 0)) *
                                         std::max(height, 0) * kChannels,
                                     0.0f)) {}

ImageBuffer::ImageBuffer(int width, int height, std::vector<float> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image dims must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pixel count does not match width*height*3");
  }
  for (float v : pixels_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw Error(ErrorCode::kInvalidArgument, "pixel value outside [0,1]");
    }
  }
}

double Iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  if (a == b) return 1.0;
  return inter / (a.area() + b.area() - inter);
}

double CosineSim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kInvalidArgument, "cosine operands differ in length");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine similarity of a zero vector");
  }
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

}  // namespace odexai
