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

#ifndef ODEXAI_WHITEBOX_H_
#define ODEXAI_WHITEBOX_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "odexai/image_io.h"

namespace odexai {

// Feature maps A_k and gradients dS/dA_k of one layer, plus the geometry
// needed to map the feature grid back to input pixels.
class WhiteBoxCapture {
 public:
  // Throws kInvalidArgument on shape mismatch or non-positive stride and
  // kNonFiniteTensor on NaN/Inf.
  WhiteBoxCapture(std::string layer_id, int channels, int height, int width,
                  std::vector<float> features, std::vector<float> gradients,
                  double stride, double center_x, double center_y);

  const std::string& layer_id() const { return layer_id_; }
  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  double stride() const { return stride_; }
  double center_x() const { return center_x_; }
  double center_y() const { return center_y_; }

  std::span<const float> feature(int k) const {
    return {features_.data() + Plane(k), PlaneSize()};
  }
  std::span<const float> gradient(int k) const {
    return {gradients_.data() + Plane(k), PlaneSize()};
  }
  const std::vector<float>& features() const { return features_; }
  const std::vector<float>& gradients() const { return gradients_; }

  friend bool operator==(const WhiteBoxCapture&, const WhiteBoxCapture&) = default;

 private:
  std::size_t PlaneSize() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t Plane(int k) const { return static_cast<std::size_t>(k) * PlaneSize(); }

  std::string layer_id_;
  int channels_;
  int height_;
  int width_;
  std::vector<float> features_;
  std::vector<float> gradients_;
  double stride_;
  double center_x_;
  double center_y_;
};

// One named tensor of an ODT bundle.
struct OdtTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  friend bool operator==(const OdtTensor&, const OdtTensor&) = default;
};

// ODT1 little-endian container: magic "ODT1", u32 count, then per tensor
// u32 name_len, name, u32 rank, u32 dims[rank], f32 data.
Bytes EncodeOdtBundle(std::span<const OdtTensor> tensors);
// Throws kFormatError on bad magic, truncation, trailing bytes or an element
// count that does not match the dims.
std::vector<OdtTensor> DecodeOdtBundle(std::span<const std::uint8_t> bytes);

Bytes EncodeWhiteBoxCapture(const WhiteBoxCapture& capture);
WhiteBoxCapture DecodeWhiteBoxCapture(std::span<const std::uint8_t> bytes,
                                      std::string layer_id = "");
// Required tensors: "features" (K x h x w), "gradients" (K x h x w),
// "stride" (scalar), "center" (2).
WhiteBoxCapture LoadWhiteBoxCapture(const std::filesystem::path& path,
                                    std::string layer_id = "");
void SaveWhiteBoxCapture(const std::filesystem::path& path,
                         const WhiteBoxCapture& capture);

}  // namespace odexai

#endif  // ODEXAI_WHITEBOX_H_
