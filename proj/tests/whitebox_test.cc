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

#include <cmath>
#include <cstring>
#include <limits>

#include <gtest/gtest.h>

#include "odexai/error.h"
#include "test_util.h"

namespace odexai {
namespace {

// Hand-assembled little-endian encoder, independent of the library's.
struct ByteWriter {
  Bytes out;
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F32(float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    U32(v);
  }
  void Str(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
};

Bytes HandBuiltCapture(int k, int h, int w, float grad_fill) {
  ByteWriter b;
  b.out = {'O', 'D', 'T', '1'};
  b.U32(4);
  for (const char* name : {"features", "gradients"}) {
    b.Str(name);
    b.U32(3);
    b.U32(k);
    b.U32(h);
    b.U32(w);
    for (int i = 0; i < k * h * w; ++i) {
      b.F32(std::string(name) == "features" ? static_cast<float>(i) : grad_fill);
    }
  }
  b.Str("stride");
  b.U32(0);
  b.F32(8.0f);
  b.Str("center");
  b.U32(1);
  b.U32(2);
  b.F32(12.0f);
  b.F32(20.0f);
  return b.out;
}

TEST(OdtTest, DecodesHandBuiltBundle) {
  const WhiteBoxCapture cap = DecodeWhiteBoxCapture(HandBuiltCapture(2, 4, 4, 0.5f), "l3");
  EXPECT_EQ(cap.channels(), 2);
  EXPECT_EQ(cap.height(), 4);
  EXPECT_EQ(cap.width(), 4);
  EXPECT_EQ(cap.stride(), 8.0);
  EXPECT_EQ(cap.center_x(), 12.0);
  EXPECT_EQ(cap.center_y(), 20.0);
  EXPECT_EQ(cap.layer_id(), "l3");
  EXPECT_EQ(cap.feature(1)[0], 16.0f);
  EXPECT_EQ(cap.gradient(1)[15], 0.5f);
}

TEST(OdtTest, EncoderMatchesHandBuiltBytes) {
  const Bytes hand = HandBuiltCapture(2, 3, 5, -1.25f);
  EXPECT_EQ(EncodeWhiteBoxCapture(DecodeWhiteBoxCapture(hand)), hand);
}

TEST(OdtTest, RoundTripIsBitExact) {
  std::vector<float> f(3 * 2 * 5), g(3 * 2 * 5);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = std::nextafter(static_cast<float>(i) / 7.0f, 1e9f);
    g[i] = -std::numeric_limits<float>::denorm_min() * static_cast<float>(i);
  }
  const WhiteBoxCapture cap("x", 3, 2, 5, f, g, 4.0, 1.5, 2.5);
  testing::TempDir dir;
  SaveWhiteBoxCapture(dir.path() / "c.odt", cap);
  EXPECT_EQ(LoadWhiteBoxCapture(dir.path() / "c.odt", "x"), cap);
}

TEST(OdtTest, TruncatedBundleIsFormatError) {
  const Bytes full = HandBuiltCapture(2, 4, 4, 0.5f);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, full.size() / 2,
                          full.size() - 1}) {
    try {
      DecodeWhiteBoxCapture(std::span(full.data(), cut));
      FAIL() << "cut " << cut;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kFormatError) << "cut " << cut;
    }
  }
}

TEST(OdtTest, TrailingBytesAndBadMagicRejected) {
  Bytes extra = HandBuiltCapture(1, 2, 2, 0.f);
  extra.push_back(0);
  EXPECT_THROW(DecodeWhiteBoxCapture(extra), Error);
  Bytes magic = HandBuiltCapture(1, 2, 2, 0.f);
  magic[3] = '2';
  EXPECT_THROW(DecodeWhiteBoxCapture(magic), Error);
}

TEST(OdtTest, NanGradientIsNonFinite) {
  try {
    DecodeWhiteBoxCapture(HandBuiltCapture(2, 4, 4, std::nanf("")));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteTensor);
  }
}

TEST(OdtTest, MissingOrMisshapenTensorsRejected) {
  const std::vector<OdtTensor> only_features = {{"features", {1, 2, 2}, {0, 0, 0, 0}}};
  EXPECT_THROW(DecodeWhiteBoxCapture(EncodeOdtBundle(only_features)), Error);
  const std::vector<OdtTensor> mismatch = {{"features", {1, 2, 2}, {0, 0, 0, 0}},
                                           {"gradients", {1, 1, 4}, {0, 0, 0, 0}},
                                           {"stride", {}, {4}},
                                           {"center", {2}, {1, 1}}};
  EXPECT_THROW(DecodeWhiteBoxCapture(EncodeOdtBundle(mismatch)), Error);
  const std::vector<OdtTensor> zero_stride = {{"features", {1, 2, 2}, {0, 0, 0, 0}},
                                              {"gradients", {1, 2, 2}, {0, 0, 0, 0}},
                                              {"stride", {}, {0}},
                                              {"center", {2}, {1, 1}}};
  EXPECT_THROW(DecodeWhiteBoxCapture(EncodeOdtBundle(zero_stride)), Error);
}

TEST(WhiteBoxCaptureTest, ConstructorValidates) {
  EXPECT_THROW(WhiteBoxCapture("l", 1, 2, 2, {0, 0, 0}, {0, 0, 0, 0}, 1, 0, 0), Error);
  EXPECT_THROW(WhiteBoxCapture("l", 1, 1, 1, {0}, {0}, -1, 0, 0), Error);
  EXPECT_THROW(WhiteBoxCapture("l", 1, 1, 1, {INFINITY}, {0}, 1, 0, 0), Error);
}

}  // namespace
}  // namespace odexai
