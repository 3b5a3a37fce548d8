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

#ifndef ODEXAI_TESTS_TEST_UTIL_H_
#define ODEXAI_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "odexai/core.h"

namespace odexai::testing {

// Black image with a solid rectangle that is pure colour `channel`.
ImageBuffer BlobImage(int width, int height, int x, int y, int w, int h, int channel,
                      float background = 0.0f);

// 1 inside the box (pixel-centre rule), 0 elsewhere.
SaliencyMap IndicatorMap(int width, int height, const BBox& box);
// 1 - IndicatorMap.
SaliencyMap InvertMap(const SaliencyMap& map);

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random valid box inside [0, limit)^2.
BBox RandomBox(std::mt19937_64& rng, double limit);

}  // namespace odexai::testing

#endif  // ODEXAI_TESTS_TEST_UTIL_H_
