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

#include "odexai/whitebox.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "odexai/error.h"

namespace odexai {

static_assert(std::endian::native == std::endian::little,
              "ODT encoding assumes a little-endian host");

WhiteBoxCapture::WhiteBoxCapture(std::string layer_id, int channels, int height,
                                 int width, std::vector<float> features,
                                 std::vector<float> gradients, double stride,
                                 double center_x, double center_y)
    : layer_id_(std::move(layer_id)),
      channels_(channels),
      height_(height),
      width_(width),
      features_(std::move(features)),
      gradients_(std::move(gradients)),
      stride_(stride),
      center_x_(center_x),
      center_y_(center_y) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "capture dims must be positive");
  }
  const std::size_t expected = static_cast<std::size_t>(channels) * height * width;
  if (features_.size() != expected || gradients_.size() != expected) {
    throw Error(ErrorCode::kInvalidArgument,
                "features and gradients must both be K x h x w");
  }
  if (!std::isfinite(stride) || !(stride > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "stride must be positive");
  }
  if (!std::isfinite(center_x) || !std::isfinite(center_y)) {
    throw Error(ErrorCode::kNonFiniteTensor, "center is not finite");
  }
  for (float v : features_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteTensor, "features contain NaN/Inf");
    }
  }
  for (float v : gradients_) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteTensor, "gradients contain NaN/Inf");
    }
  }
}

namespace {

void PutU32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void Floats(float* dst, std::size_t n) {
    if (n > (bytes_.size() - pos_) / 4) Truncated();
    std::memcpy(dst, bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n) {
    if (n > bytes_.size() - pos_) Truncated();
  }
  [[noreturn]] static void Truncated() {
    throw Error(ErrorCode::kFormatError, "truncated ODT bundle");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLen = 4096;

}  // namespace

Bytes EncodeOdtBundle(std::span<const OdtTensor> tensors) {
  Bytes out = {'O', 'D', 'T', '1'};
  PutU32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const OdtTensor& t : tensors) {
    std::size_t count = 1;
    for (auto d : t.dims) count *= d;
    if (count != t.data.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "tensor '" + t.name + "' data does not match its dims");
    }
    PutU32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    PutU32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) PutU32(out, d);
    const auto* raw = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), raw, raw + t.data.size() * 4);
  }
  return out;
}

std::vector<OdtTensor> DecodeOdtBundle(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.Str(4) != "ODT1") {
    throw Error(ErrorCode::kFormatError, "bad ODT magic");
  }
  const std::uint32_t count = r.U32();
  std::vector<OdtTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    OdtTensor t;
    const std::uint32_t name_len = r.U32();
    if (name_len > kMaxNameLen) {
      throw Error(ErrorCode::kFormatError, "tensor name too long");
    }
    t.name = r.Str(name_len);
    const std::uint32_t rank = r.U32();
    if (rank > kMaxRank) throw Error(ErrorCode::kFormatError, "tensor rank too large");
    std::uint64_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(r.U32());
      elements *= t.dims.back();
      if (elements > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::kFormatError, "tensor too large");
      }
    }
    if (elements > r.remaining() / 4) {
      throw Error(ErrorCode::kFormatError, "truncated ODT bundle");
    }
    t.data.resize(elements);
    r.Floats(t.data.data(), elements);
    tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kFormatError, "trailing bytes after ODT bundle");
  }
  return tensors;
}

Bytes EncodeWhiteBoxCapture(const WhiteBoxCapture& capture) {
  const auto k = static_cast<std::uint32_t>(capture.channels());
  const auto h = static_cast<std::uint32_t>(capture.height());
  const auto w = static_cast<std::uint32_t>(capture.width());
  const std::vector<OdtTensor> tensors = {
      {"features", {k, h, w}, capture.features()},
      {"gradients", {k, h, w}, capture.gradients()},
      {"stride", {}, {static_cast<float>(capture.stride())}},
      {"center", {2},
       {static_cast<float>(capture.center_x()),
        static_cast<float>(capture.center_y())}},
  };
  return EncodeOdtBundle(tensors);
}

WhiteBoxCapture DecodeWhiteBoxCapture(std::span<const std::uint8_t> bytes,
                                      std::string layer_id) {
  std::map<std::string, OdtTensor> by_name;
  for (auto& t : DecodeOdtBundle(bytes)) by_name[t.name] = std::move(t);
  auto require = [&](const char* name) -> OdtTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw Error(ErrorCode::kFormatError,
                  std::string("missing tensor '") + name + "'");
    }
    return it->second;
  };
  OdtTensor& features = require("features");
  OdtTensor& gradients = require("gradients");
  const OdtTensor& stride = require("stride");
  const OdtTensor& center = require("center");
  if (features.dims.size() != 3 || gradients.dims != features.dims) {
    throw Error(ErrorCode::kFormatError,
                "features/gradients must be rank-3 with identical dims");
  }
  if (stride.data.size() != 1 || !stride.dims.empty()) {
    throw Error(ErrorCode::kFormatError, "stride must be a scalar");
  }
  if (center.dims != std::vector<std::uint32_t>{2}) {
    throw Error(ErrorCode::kFormatError, "center must have shape (2)");
  }
  if (features.dims[0] == 0 || features.dims[1] == 0 || features.dims[2] == 0) {
    throw Error(ErrorCode::kFormatError, "empty feature tensor");
  }
  for (const auto* t : {&stride, &center}) {
    for (float v : t->data) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFiniteTensor,
                    "tensor '" + t->name + "' contains NaN/Inf");
      }
    }
  }
  if (!(stride.data[0] > 0.0f)) {
    throw Error(ErrorCode::kFormatError, "stride must be positive");
  }
  return WhiteBoxCapture(std::move(layer_id), static_cast<int>(features.dims[0]),
                         static_cast<int>(features.dims[1]),
                         static_cast<int>(features.dims[2]),
                         std::move(features.data), std::move(gradients.data),
                         stride.data[0], center.data[0], center.data[1]);
}

WhiteBoxCapture LoadWhiteBoxCapture(const std::filesystem::path& path,
                                    std::string layer_id) {
  return DecodeWhiteBoxCapture(ReadFileBytes(path), std::move(layer_id));
}

void SaveWhiteBoxCapture(const std::filesystem::path& path,
                         const WhiteBoxCapture& capture) {
  WriteFileAtomic(path, EncodeWhiteBoxCapture(capture));
}

}  // namespace odexai
