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

#include "test_util.h"

#include <atomic>
#include <unistd.h>

namespace odexai::testing {

ImageBuffer BlobImage(int width, int height, int x, int y, int w, int h, int channel,
                      float background) {
  std::vector<float> px(static_cast<std::size_t>(width) * height * 3, background);
  for (int r = y; r < y + h; ++r) {
    for (int c = x; c < x + w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        px[(static_cast<std::size_t>(r) * width + c) * 3 + ch] = ch == channel ? 1.0f : 0.0f;
      }
    }
  }
  return ImageBuffer(width, height, std::move(px));
}

SaliencyMap IndicatorMap(int width, int height, const BBox& box) {
  std::vector<double> v(static_cast<std::size_t>(width) * height, 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (box.ContainsPixel(r, c)) v[static_cast<std::size_t>(r) * width + c] = 1.0;
    }
  }
  return SaliencyMap(width, height, std::move(v));
}

SaliencyMap InvertMap(const SaliencyMap& map) {
  std::vector<double> v = map.values();
  for (double& x : v) x = 1.0 - x;
  return SaliencyMap(map.width(), map.height(), std::move(v));
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("odexai-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

BBox RandomBox(std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> u(0.0, limit);
  double x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng);
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return BBox(x1, y1, x2 + 0.5, y2 + 0.5);
}

}  // namespace odexai::testing
