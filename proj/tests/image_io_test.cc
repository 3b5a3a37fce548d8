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

#include "odexai/image_io.h"

#include <random>

#include <gtest/gtest.h>

#include "odexai/error.h"
#include "test_util.h"

namespace odexai {
namespace {

TEST(PngTest, RoundTripIsExactOn8BitValues) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<float> px(13 * 7 * 3);
  for (auto& v : px) v = u(rng) / 255.0f;
  const ImageBuffer img(13, 7, px);
  EXPECT_EQ(DecodePng(EncodePng(img)), img);
}

TEST(PngTest, RejectsGarbage) {
  const Bytes junk{'n', 'o', 't', ' ', 'p', 'n', 'g'};
  EXPECT_THROW(DecodePng(junk), Error);
  Bytes png = EncodePng(ImageBuffer(4, 4));
  png.resize(png.size() / 2);
  EXPECT_THROW(DecodePng(png), Error);
}

TEST(PgmTest, SixteenBitRoundTrip) {
  const SaliencyMap map(3, 2, std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0, 1.0 / 3});
  const Bytes pgm = EncodePgm16(map);
  const std::string header(pgm.begin(), pgm.begin() + 13);
  EXPECT_EQ(header, "P5\n3 2\n65535\n");
  const SaliencyMap back = DecodePgm(pgm);
  ASSERT_EQ(back.width(), 3);
  for (std::size_t i = 0; i < map.size(); ++i) {
    EXPECT_EQ(back.values()[i], std::round(map.values()[i] * 65535) / 65535);
  }
  // Big-endian sample order.
  EXPECT_EQ(pgm[header.size() + 2], 0x40);  // round(0.25 * 65535) = 0x4000
}

TEST(PgmTest, EightBitAndErrors) {
  const std::string p = "P5\n# comment\n2 1\n255\n";
  Bytes bytes(p.begin(), p.end());
  bytes.push_back(0);
  bytes.push_back(255);
  EXPECT_EQ(DecodePgm(bytes).values(), (std::vector<double>{0.0, 1.0}));
  bytes.pop_back();
  EXPECT_THROW(DecodePgm(bytes), Error);
  const std::string p2 = "P2\n1 1\n255\n0";
  EXPECT_THROW(DecodePgm(Bytes(p2.begin(), p2.end())), Error);
}

TEST(Base64Test, KnownVectorsAndRoundTrip) {
  auto enc = [](std::string s) {
    return Base64Encode(Bytes(s.begin(), s.end()));
  };
  EXPECT_EQ(enc(""), "");
  EXPECT_EQ(enc("f"), "Zg==");
  EXPECT_EQ(enc("fo"), "Zm8=");
  EXPECT_EQ(enc("foobar"), "Zm9vYmFy");
  std::mt19937_64 rng(2);
  for (int n = 0; n < 40; ++n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    EXPECT_EQ(Base64Decode(Base64Encode(b)), b);
  }
  EXPECT_THROW(Base64Decode("abc"), Error);
  EXPECT_THROW(Base64Decode("a!c="), Error);
}

TEST(Sha256Test, KnownVectors) {
  EXPECT_EQ(Sha256Hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(Sha256Hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(FileTest, AtomicWriteAndRead) {
  testing::TempDir dir;
  const auto path = dir.path() / "nested" / "file.bin";
  WriteFileAtomic(path, std::string_view("hello"));
  const Bytes b = ReadFileBytes(path);
  EXPECT_EQ(std::string(b.begin(), b.end()), "hello");
  WriteFileAtomic(path, std::string_view("bye"));
  const Bytes c = ReadFileBytes(path);
  EXPECT_EQ(std::string(c.begin(), c.end()), "bye");
  EXPECT_THROW(ReadFileBytes(dir.path() / "missing"), Error);
}

}  // namespace
}  // namespace odexai
