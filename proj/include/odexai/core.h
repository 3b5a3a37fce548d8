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

#ifndef ODEXAI_CORE_H_
#define ODEXAI_CORE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace odexai {

// Axis-aligned box in continuous pixel coordinates, origin top-left.
class BBox {
 public:
  // Throws kInvalidArgument unless x2 > x1, y2 > y1 and all coordinates are
  // finite and non-negative.
  BBox(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }

  // Pixel-center rule: pixel (row, col) is inside when
  // x1 <= col + 0.5 < x2 and y1 <= row + 0.5 < y2.
  bool ContainsPixel(int row, int col) const {
    const double cx = col + 0.5;
    const double cy = row + 0.5;
    return x1_ <= cx && cx < x2_ && y1_ <= cy && cy < y2_;
  }

  bool FitsWithin(int width, int height) const {
    return x2_ <= width && y2_ <= height;
  }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

class Detection {
 public:
  // label is derived as argmax(class_probs); ties resolve to the lowest index.
  Detection(BBox bbox, double objectness, std::vector<double> class_probs);

  const BBox& bbox() const { return bbox_; }
  double objectness() const { return objectness_; }
  const std::vector<double>& class_probs() const { return class_probs_; }
  std::size_t label() const { return label_; }

  friend bool operator==(const Detection&, const Detection&) = default;

 private:
  BBox bbox_;
  double objectness_;
  std::vector<double> class_probs_;
  std::size_t label_;
};

// H x W relevance grid, row-major. Rejects NaN/Inf on construction.
class SaliencyMap {
 public:
  SaliencyMap(int width, int height, std::vector<double> values);
  // Constant map.
  SaliencyMap(int width, int height, double fill);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  int width_;
  int height_;
  std::vector<double> values_;
};

struct GroundTruthInstance {
  BBox bbox;
  int label = 0;
  std::string instance_id;
  bool difficult = false;
};

// Three-channel interleaved RGB image with values in [0,1].
class ImageBuffer {
 public:
  // Black image.
  ImageBuffer(int width, int height);
  ImageBuffer(int width, int height, std::vector<float> pixels);

  static constexpr int kChannels = 3;

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  const std::vector<float>& pixels() const { return pixels_; }
  float at(int row, int col, int channel) const {
    return pixels_[(static_cast<std::size_t>(row) * width_ + col) * kChannels +
                   channel];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_;
  int height_;
  std::vector<float> pixels_;
};

double Iou(const BBox& a, const BBox& b);

// Throws kZeroVector when either operand has zero norm and kInvalidArgument
// on length mismatch.
double CosineSim(std::span<const double> u, std::span<const double> v);

}  // namespace odexai

#endif  // ODEXAI_CORE_H_
