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

#ifndef ODEXAI_IMAGEPROC_H_
#define ODEXAI_IMAGEPROC_H_

#include <cstddef>
#include <vector>

#include "odexai/core.h"

namespace odexai {

// Soft mask in [0,1]; 1 keeps the image pixel, 0 takes the baseline.
class MaskGrid {
 public:
  MaskGrid(int width, int height, float fill);
  MaskGrid(int width, int height, std::vector<float> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  const std::vector<float>& values() const { return values_; }
  float at(int row, int col) const {
    return values_[static_cast<std::size_t>(row) * width_ + col];
  }

  friend bool operator==(const MaskGrid&, const MaskGrid&) = default;

 private:
  int width_;
  int height_;
  std::vector<float> values_;
};

// Superpixel labelling; every id in [0, segment_count) occurs and each
// segment is 4-connected.
class SegmentLabelMap {
 public:
  SegmentLabelMap(int width, int height, std::vector<int> labels,
                  int segment_count);

  int width() const { return width_; }
  int height() const { return height_; }
  int segment_count() const { return segment_count_; }
  const std::vector<int>& labels() const { return labels_; }
  int at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }

 private:
  int width_;
  int height_;
  std::vector<int> labels_;
  int segment_count_;
};

// Affine rescale to [0,1]. A constant map becomes all ones.
SaliencyMap MinMaxNormalize(const SaliencyMap& map);

// out = mask * image + (1 - mask) * baseline, per channel.
ImageBuffer ApplyMask(const ImageBuffer& image, const MaskGrid& mask,
                      const ImageBuffer& baseline);

// Separable Gaussian, radius ceil(3 sigma), clamp-to-edge.
ImageBuffer GaussianBlur(const ImageBuffer& image, double sigma);

// Normalized 1-D Gaussian taps of radius ceil(3 sigma).
std::vector<double> GaussianTaps(double sigma);

// Corner-aligned bilinear upsampling: source sample k lands on output
// coordinate k * (out - 1) / (in - 1). Output pixel x reads the upsampled
// signal at x + shift.
MaskGrid BilinearUpsample(const MaskGrid& grid, int out_w, int out_h,
                          double shift_x = 0.0, double shift_y = 0.0);

// Same interpolation as BilinearUpsample onto a canvas of canvas_w x canvas_h,
// returning the out_w x out_h window that starts at (shift_x, shift_y).
MaskGrid UpsampleAndCrop(const MaskGrid& grid, int canvas_w, int canvas_h,
                         int out_w, int out_h, double shift_x, double shift_y);

// Half-pixel-centred bilinear resize of a real grid (cell centres of the
// source align with pixel centres of the target).
std::vector<double> ResizeBilinear(const std::vector<double>& src, int src_w,
                                   int src_h, int out_w, int out_h);

struct SlicOptions {
  double compactness = 10.0;
  int iterations = 10;
};

// SLIC superpixels in CIELAB with connectivity enforcement. Throws
// kTooManySegments when n_segments exceeds the pixel count.
SegmentLabelMap SlicSegment(const ImageBuffer& image, int n_segments,
                            const SlicOptions& options = {});

}  // namespace odexai

#endif  // ODEXAI_IMAGEPROC_H_
