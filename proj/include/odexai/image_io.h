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

#ifndef ODEXAI_IMAGE_IO_H_
#define ODEXAI_IMAGE_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "odexai/core.h"

namespace odexai {

using Bytes = std::vector<std::uint8_t>;

// 8-bit RGB PNG <-> [0,1] floats via v/255 and round(v*255). Decoding accepts
// any colour type libpng can convert to RGB; throws kFormatError otherwise.
ImageBuffer DecodePng(std::span<const std::uint8_t> bytes);
Bytes EncodePng(const ImageBuffer& image);
ImageBuffer ReadPngFile(const std::filesystem::path& path);
void WritePngFile(const std::filesystem::path& path, const ImageBuffer& image);

// 16-bit binary PGM (P5, maxval 65535), values round(v * 65535). The map is
// clamped to [0,1] before quantization. Decoding also accepts 8-bit PGMs.
Bytes EncodePgm16(const SaliencyMap& map);
SaliencyMap DecodePgm(std::span<const std::uint8_t> bytes);

Bytes ReadFileBytes(const std::filesystem::path& path);
// Writes to a sibling temporary and renames into place.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::span<const std::uint8_t> bytes);
void WriteFileAtomic(const std::filesystem::path& path, std::string_view text);

std::string Base64Encode(std::span<const std::uint8_t> bytes);
Bytes Base64Decode(std::string_view text);

std::string Sha256Hex(std::span<const std::uint8_t> bytes);
std::string Sha256Hex(std::string_view text);

}  // namespace odexai

#endif  // ODEXAI_IMAGE_IO_H_
