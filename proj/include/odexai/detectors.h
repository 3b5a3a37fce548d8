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

#ifndef ODEXAI_DETECTORS_H_
#define ODEXAI_DETECTORS_H_

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "odexai/core.h"
#include "odexai/error.h"
#include "odexai/whitebox.h"

namespace odexai {

struct BackendDescriptor {
  std::string name;
  std::vector<std::string> class_names;
  std::size_t max_batch = 1;
  bool supports_whitebox = false;
};

using DetectionLists = std::vector<std::vector<Detection>>;

// The black-box boundary every explainer and metric talks to.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual const BackendDescriptor& descriptor() const = 0;

  // One detection list per image, in input order. The default splits the
  // input into chunks of descriptor().max_batch and stitches the results.
  virtual DetectionLists Detect(std::span<const ImageBuffer> images);

  // Feature maps and gradients for detection `target_index` of `image`.
  // Throws kUnsupported unless the backend supports white-box capture.
  virtual WhiteBoxCapture Capture(const ImageBuffer& image,
                                  const std::string& layer,
                                  std::size_t target_index);

 protected:
  // Called with at most max_batch images.
  virtual DetectionLists DetectChunk(std::span<const ImageBuffer> images) = 0;
};

// Deterministic colour-blob detector.
//
// Classes are red, green and blue. A pixel qualifies for class c when its
// c-channel exceeds 0.8 and both other channels are below 0.2. Every
// 4-connected component of at least 25 qualifying pixels is a detection with
//   bbox          = component bounds,
//   p(c)          = min(1, count / bbox area),
//   p(other)      = (1 - p(c)) / 2,
//   objectness    = min(1, count / 500).
//
// Capture() exposes a stride-4 "layer" whose channel c holds the fraction of
// class-c pixels per cell; the gradient is +1 on the target's channel and
// -0.25 on the others.
class SyntheticDetector final : public Detector {
 public:
  static constexpr int kMinComponent = 25;
  static constexpr double kSaturationCount = 500.0;
  static constexpr int kCaptureStride = 4;
  static constexpr const char* kCaptureLayer = "blobs/stride4";

  SyntheticDetector();

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  WhiteBoxCapture Capture(const ImageBuffer& image, const std::string& layer,
                          std::size_t target_index) override;

  static std::vector<Detection> DetectOne(const ImageBuffer& image);

 protected:
  DetectionLists DetectChunk(std::span<const ImageBuffer> images) override;

 private:
  BackendDescriptor descriptor_;
};

struct SubprocessOptions {
  std::chrono::milliseconds handshake_timeout{10000};
  // Applies to each chunk of up to max_batch images.
  std::chrono::milliseconds batch_timeout{120000};
};

// Child process speaking wire protocol v1 on its stdin/stdout. The command is
// run through /bin/sh -c. Throws kBackendUnavailable when the handshake fails.
class SubprocessDetector final : public Detector {
 public:
  explicit SubprocessDetector(const std::string& command,
                              SubprocessOptions options = {});
  ~SubprocessDetector() override;
  SubprocessDetector(const SubprocessDetector&) = delete;
  SubprocessDetector& operator=(const SubprocessDetector&) = delete;

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  WhiteBoxCapture Capture(const ImageBuffer& image, const std::string& layer,
                          std::size_t target_index) override;

 protected:
  DetectionLists DetectChunk(std::span<const ImageBuffer> images) override;

 private:
  std::string RoundTrip(const std::string& frame,
                        std::chrono::steady_clock::time_point deadline);
  void WriteAll(const std::string& data,
                std::chrono::steady_clock::time_point deadline);
  std::string ReadLine(std::chrono::steady_clock::time_point deadline);
  void Terminate();
  [[noreturn]] void Fail(ErrorCode code, const std::string& message);

  SubprocessOptions options_;
  BackendDescriptor descriptor_;
  int pid_ = -1;
  int fd_ = -1;
  bool dead_ = false;
  std::string read_buffer_;
  std::uint64_t next_id_ = 1;
};

struct HttpOptions {
  std::chrono::milliseconds timeout{120000};
};

// Same frames as the subprocess protocol, over HTTP: GET <url>/handshake
// returns the handshake frame, POST <url>/frame answers one request frame.
class HttpDetector final : public Detector {
 public:
  explicit HttpDetector(const std::string& url, HttpOptions options = {});

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  WhiteBoxCapture Capture(const ImageBuffer& image, const std::string& layer,
                          std::size_t target_index) override;

 protected:
  DetectionLists DetectChunk(std::span<const ImageBuffer> images) override;

 private:
  std::string Post(const std::string& frame);

  std::string host_;
  int port_ = 80;
  std::string base_path_;
  HttpOptions options_;
  BackendDescriptor descriptor_;
  std::uint64_t next_id_ = 1;
};

// Owns several backend instances; each is leased to one caller at a time.
// Detect() fans a request list out across idle members and re-stitches the
// results in input order.
class BackendPool final : public Detector {
 public:
  explicit BackendPool(std::vector<std::unique_ptr<Detector>> members);

  const BackendDescriptor& descriptor() const override;
  DetectionLists Detect(std::span<const ImageBuffer> images) override;
  WhiteBoxCapture Capture(const ImageBuffer& image, const std::string& layer,
                          std::size_t target_index) override;
  std::size_t size() const { return members_.size(); }

 protected:
  DetectionLists DetectChunk(std::span<const ImageBuffer> images) override;

 private:
  class Lease;
  Lease Acquire();

  std::vector<std::unique_ptr<Detector>> members_;
  std::vector<bool> busy_;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct BackendOptions {
  std::size_t pool_size = 1;
  std::chrono::milliseconds timeout{120000};
};

// Backend spec: "synthetic" | "subprocess:<command>" | "http:<url>".
std::unique_ptr<Detector> MakeBackend(const std::string& spec,
                                      const BackendOptions& options = {});

}  // namespace odexai

#endif  // ODEXAI_DETECTORS_H_
