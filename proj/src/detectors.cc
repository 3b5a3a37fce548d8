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

#include "odexai/detectors.h"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <future>
#include <thread>

#include "httplib.h"
#include "odexai/error.h"
#include "odexai/image_io.h"
#include "odexai/wire_protocol.h"

namespace odexai {

DetectionLists Detector::Detect(std::span<const ImageBuffer> images) {
  const std::size_t chunk = std::max<std::size_t>(descriptor().max_batch, 1);
  DetectionLists out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, images.size() - begin);
    DetectionLists part = DetectChunk(images.subspan(begin, n));
    if (part.size() != n) {
      throw Error(ErrorCode::kProtocolViolation,
                  "backend returned a different number of results than images");
    }
    for (auto& lst : part) out.push_back(std::move(lst));
  }
  return out;
}

WhiteBoxCapture Detector::Capture(const ImageBuffer&, const std::string&,
                                  std::size_t) {
  throw Error(ErrorCode::kUnsupported,
              "backend '" + descriptor().name + "' does not support white-box capture");
}

// ---------------------------------------------------------------------------
// Synthetic

namespace {

bool Qualifies(const ImageBuffer& image, int row, int col, int cls) {
  for (int c = 0; c < 3; ++c) {
    const float v = image.at(row, col, c);
    if (c == cls ? !(v > 0.8f) : !(v < 0.2f)) return false;
  }
  return true;
}

}  // namespace

SyntheticDetector::SyntheticDetector()
    : descriptor_{"synthetic", {"red", "green", "blue"}, 64, true} {}

std::vector<Detection> SyntheticDetector::DetectOne(const ImageBuffer& image) {
  const int w = image.width();
  const int h = image.height();
  std::vector<Detection> out;
  std::vector<std::uint8_t> visited(image.pixel_count());
  std::vector<int> stack;
  for (int cls = 0; cls < 3; ++cls) {
    std::fill(visited.begin(), visited.end(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t start = static_cast<std::size_t>(y) * w + x;
        if (visited[start] || !Qualifies(image, y, x, cls)) continue;
        int count = 0;
        int x0 = x, x1 = x, y0 = y, y1 = y;
        stack.assign(1, static_cast<int>(start));
        visited[start] = 1;
        while (!stack.empty()) {
          const int p = stack.back();
          stack.pop_back();
          const int px = p % w, py = p / w;
          ++count;
          x0 = std::min(x0, px);
          x1 = std::max(x1, px);
          y0 = std::min(y0, py);
          y1 = std::max(y1, py);
          constexpr std::array<int, 4> kDx = {1, -1, 0, 0};
          constexpr std::array<int, 4> kDy = {0, 0, 1, -1};
          for (int d = 0; d < 4; ++d) {
            const int nx = px + kDx[d], ny = py + kDy[d];
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
            if (!visited[q] && Qualifies(image, ny, nx, cls)) {
              visited[q] = 1;
              stack.push_back(static_cast<int>(q));
            }
          }
        }
        if (count < kMinComponent) continue;
        const BBox box(x0, y0, x1 + 1, y1 + 1);
        const double prob = std::min(1.0, count / box.area());
        std::vector<double> probs(3, (1.0 - prob) / 2.0);
        probs[cls] = prob;
        out.emplace_back(box, std::min(1.0, count / kSaturationCount),
                         std::move(probs));
      }
    }
  }
  return out;
}

DetectionLists SyntheticDetector::DetectChunk(std::span<const ImageBuffer> images) {
  DetectionLists out;
  out.reserve(images.size());
  for (const auto& image : images) out.push_back(DetectOne(image));
  return out;
}

WhiteBoxCapture SyntheticDetector::Capture(const ImageBuffer& image,
                                           const std::string& layer,
                                           std::size_t target_index) {
  if (!layer.empty() && layer != kCaptureLayer) {
    throw Error(ErrorCode::kUnsupported, "unknown layer '" + layer + "'");
  }
  const std::vector<Detection> dets = DetectOne(image);
  if (target_index >= dets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "target_index out of range");
  }
  const Detection& target = dets[target_index];
  const int fw = (image.width() + kCaptureStride - 1) / kCaptureStride;
  const int fh = (image.height() + kCaptureStride - 1) / kCaptureStride;
  const std::size_t plane = static_cast<std::size_t>(fw) * fh;
  std::vector<float> features(3 * plane, 0.0f);
  std::vector<float> gradients(3 * plane, 0.0f);
  for (int cls = 0; cls < 3; ++cls) {
    const float grad = static_cast<std::size_t>(cls) == target.label() ? 1.0f : -0.25f;
    for (int cy = 0; cy < fh; ++cy) {
      for (int cx = 0; cx < fw; ++cx) {
        int hits = 0, total = 0;
        for (int y = cy * kCaptureStride;
             y < std::min((cy + 1) * kCaptureStride, image.height()); ++y) {
          for (int x = cx * kCaptureStride;
               x < std::min((cx + 1) * kCaptureStride, image.width()); ++x) {
            ++total;
            hits += Qualifies(image, y, x, cls) ? 1 : 0;
          }
        }
        const std::size_t i = cls * plane + static_cast<std::size_t>(cy) * fw + cx;
        features[i] = static_cast<float>(hits) / static_cast<float>(total);
        gradients[i] = grad;
      }
    }
  }
  const BBox& b = target.bbox();
  return WhiteBoxCapture(kCaptureLayer, 3, fh, fw, std::move(features),
                         std::move(gradients), kCaptureStride,
                         (b.x1() + b.x2()) / 2.0, (b.y1() + b.y2()) / 2.0);
}

// ---------------------------------------------------------------------------
// Subprocess

namespace {

using Clock = std::chrono::steady_clock;

int RemainingMs(Clock::time_point deadline) {
  const auto left =
      std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return static_cast<int>(std::max<std::int64_t>(left.count(), 0));
}

constexpr std::size_t kMaxLine = std::size_t{256} << 20;

void CheckClassCount(const std::vector<Detection>& dets, std::size_t classes) {
  for (const auto& d : dets) {
    if (d.class_probs().size() != classes) {
      throw Error(ErrorCode::kProtocolViolation,
                  "detection class_probs length differs from handshake classes");
    }
  }
}

BackendDescriptor FromHandshake(const wire::Handshake& h) {
  return {h.name, h.classes, h.max_batch, h.supports_whitebox};
}

}  // namespace

SubprocessDetector::SubprocessDetector(const std::string& command,
                                       SubprocessOptions options)
    : options_(options) {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(ErrorCode::kBackendUnavailable,
                std::string("socketpair failed: ") + std::strerror(errno));
  }
  pid_ = fork();
  if (pid_ < 0) {
    close(sv[0]);
    close(sv[1]);
    throw Error(ErrorCode::kBackendUnavailable,
                std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid_ == 0) {
    // Own process group, so Terminate reaches anything the shell spawns.
    setpgid(0, 0);
    dup2(sv[1], STDIN_FILENO);
    dup2(sv[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(sv[1]);
  fd_ = sv[0];

  const auto deadline = Clock::now() + options_.handshake_timeout;
  std::string line;
  try {
    line = ReadLine(deadline);
  } catch (const Error& e) {
    Terminate();
    throw Error(ErrorCode::kBackendUnavailable,
                std::string("handshake failed: ") + e.what());
  }
  try {
    const wire::Frame frame = wire::Decode(line);
    const auto* hs = std::get_if<wire::Handshake>(&frame);
    if (hs == nullptr) {
      throw Error(ErrorCode::kProtocolViolation, "first frame is not a handshake");
    }
    descriptor_ = FromHandshake(*hs);
  } catch (const Error& e) {
    Terminate();
    throw Error(ErrorCode::kBackendUnavailable,
                std::string("handshake failed: ") + e.what());
  }
}

SubprocessDetector::~SubprocessDetector() { Terminate(); }

void SubprocessDetector::Terminate() {
  dead_ = true;
  if (fd_ >= 0) {
    close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    // Closing the socket delivers EOF; give a well-behaved child a moment.
    for (int i = 0; i < 20; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        kill(-pid_, SIGKILL);
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill(-pid_, SIGKILL);
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void SubprocessDetector::Fail(ErrorCode code, const std::string& message) {
  if (code == ErrorCode::kTimeout || code == ErrorCode::kBackendUnavailable) {
    Terminate();
  }
  throw Error(code, message);
}

void SubprocessDetector::WriteAll(const std::string& data,
                                  Clock::time_point deadline) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    pollfd pfd{fd_, POLLOUT, 0};
    const int ready = poll(&pfd, 1, RemainingMs(deadline));
    if (ready == 0) Fail(ErrorCode::kTimeout, "timed out writing request");
    if (ready < 0) {
      if (errno == EINTR) continue;
      Fail(ErrorCode::kBackendUnavailable, std::strerror(errno));
    }
    const ssize_t n = send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      Fail(ErrorCode::kBackendUnavailable,
           std::string("backend process closed its input: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string SubprocessDetector::ReadLine(Clock::time_point deadline) {
  for (;;) {
    const auto nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (read_buffer_.size() > kMaxLine) {
      Fail(ErrorCode::kBackendUnavailable, "response line exceeds size limit");
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = poll(&pfd, 1, RemainingMs(deadline));
    if (ready == 0) Fail(ErrorCode::kTimeout, "backend did not answer in time");
    if (ready < 0) {
      if (errno == EINTR) continue;
      Fail(ErrorCode::kBackendUnavailable, std::strerror(errno));
    }
    char buf[65536];
    const ssize_t n = read(fd_, buf, sizeof(buf));
    if (n == 0) Fail(ErrorCode::kBackendUnavailable, "backend process exited");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      Fail(ErrorCode::kBackendUnavailable, std::strerror(errno));
    }
    read_buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::string SubprocessDetector::RoundTrip(const std::string& frame,
                                          Clock::time_point deadline) {
  if (dead_) Fail(ErrorCode::kBackendUnavailable, "backend process is not running");
  WriteAll(frame + "\n", deadline);
  return ReadLine(deadline);
}

namespace {

template <typename Response>
Response ExpectResponse(const std::string& line, std::uint64_t id) {
  const wire::Frame frame = wire::Decode(line);
  if (const auto* err = std::get_if<wire::ErrorResponse>(&frame)) {
    throw Error(ErrorCode::kProtocolViolation, "backend error: " + err->error);
  }
  const auto* resp = std::get_if<Response>(&frame);
  if (resp == nullptr) {
    throw Error(ErrorCode::kProtocolViolation, "unexpected frame type in response");
  }
  if (resp->id != id) {
    throw Error(ErrorCode::kProtocolViolation, "response id does not echo request id");
  }
  return *resp;
}

}  // namespace

DetectionLists SubprocessDetector::DetectChunk(std::span<const ImageBuffer> images) {
  const auto deadline = Clock::now() + options_.batch_timeout;
  DetectionLists out;
  for (const auto& image : images) {
    const std::uint64_t id = next_id_++;
    const std::string line = RoundTrip(
        wire::Encode(wire::DetectRequest{id, Base64Encode(EncodePng(image))}),
        deadline);
    auto resp = ExpectResponse<wire::DetectResponse>(line, id);
    CheckClassCount(resp.detections, descriptor_.class_names.size());
    out.push_back(std::move(resp.detections));
  }
  return out;
}

WhiteBoxCapture SubprocessDetector::Capture(const ImageBuffer& image,
                                            const std::string& layer,
                                            std::size_t target_index) {
  if (!descriptor_.supports_whitebox) return Detector::Capture(image, layer, target_index);
  const auto deadline = Clock::now() + options_.batch_timeout;
  const std::uint64_t id = next_id_++;
  const std::string line = RoundTrip(
      wire::Encode(wire::CaptureRequest{id, Base64Encode(EncodePng(image)), layer,
                                        static_cast<std::uint32_t>(target_index)}),
      deadline);
  const auto resp = ExpectResponse<wire::CaptureResponse>(line, id);
  return LoadWhiteBoxCapture(resp.bundle_path, layer);
}

// ---------------------------------------------------------------------------
// HTTP

HttpDetector::HttpDetector(const std::string& url, HttpOptions options)
    : options_(options) {
  constexpr std::string_view kScheme = "http://";
  if (url.rfind(kScheme, 0) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "http backend URL must start with http://");
  }
  std::string rest = url.substr(kScheme.size());
  const auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  base_path_ = slash == std::string::npos ? "" : rest.substr(slash);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  const auto colon = authority.rfind(':');
  host_ = authority.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      port_ = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad port in backend URL");
    }
  }
  httplib::Client client(host_, port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  auto res = client.Get(base_path_ + "/handshake");
  if (!res || res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable, "handshake request to " + url + " failed");
  }
  try {
    const wire::Frame frame = wire::Decode(res->body);
    const auto* hs = std::get_if<wire::Handshake>(&frame);
    if (hs == nullptr) {
      throw Error(ErrorCode::kProtocolViolation, "handshake endpoint sent another frame");
    }
    descriptor_ = FromHandshake(*hs);
  } catch (const Error& e) {
    throw Error(ErrorCode::kBackendUnavailable, std::string("handshake failed: ") + e.what());
  }
}

std::string HttpDetector::Post(const std::string& frame) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  auto res = client.Post(base_path_ + "/frame", frame, "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read) {
      throw Error(ErrorCode::kTimeout, "backend did not answer in time");
    }
    throw Error(ErrorCode::kBackendUnavailable,
                "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable,
                "backend answered HTTP " + std::to_string(res->status));
  }
  return res->body;
}

DetectionLists HttpDetector::DetectChunk(std::span<const ImageBuffer> images) {
  DetectionLists out;
  for (const auto& image : images) {
    const std::uint64_t id = next_id_++;
    auto resp = ExpectResponse<wire::DetectResponse>(
        Post(wire::Encode(wire::DetectRequest{id, Base64Encode(EncodePng(image))})), id);
    CheckClassCount(resp.detections, descriptor_.class_names.size());
    out.push_back(std::move(resp.detections));
  }
  return out;
}

WhiteBoxCapture HttpDetector::Capture(const ImageBuffer& image,
                                      const std::string& layer,
                                      std::size_t target_index) {
  if (!descriptor_.supports_whitebox) return Detector::Capture(image, layer, target_index);
  const std::uint64_t id = next_id_++;
  const auto resp = ExpectResponse<wire::CaptureResponse>(
      Post(wire::Encode(wire::CaptureRequest{id, Base64Encode(EncodePng(image)), layer,
                                             static_cast<std::uint32_t>(target_index)})),
      id);
  return LoadWhiteBoxCapture(resp.bundle_path, layer);
}

// ---------------------------------------------------------------------------
// Pool

class BackendPool::Lease {
 public:
  Lease(BackendPool* pool, std::size_t index) : pool_(pool), index_(index) {}
  Lease(Lease&& other) noexcept : pool_(other.pool_), index_(other.index_) {
    other.pool_ = nullptr;
  }
  Lease(const Lease&) = delete;
  Lease& operator=(const Lease&) = delete;
  Lease& operator=(Lease&&) = delete;
  ~Lease() {
    if (pool_ == nullptr) return;
    {
      std::lock_guard<std::mutex> lock(pool_->mu_);
      pool_->busy_[index_] = false;
    }
    pool_->cv_.notify_one();
  }
  Detector& operator*() const { return *pool_->members_[index_]; }
  Detector* operator->() const { return pool_->members_[index_].get(); }

 private:
  BackendPool* pool_;
  std::size_t index_;
};

BackendPool::BackendPool(std::vector<std::unique_ptr<Detector>> members)
    : members_(std::move(members)), busy_(members_.size(), false) {
  if (members_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "backend pool needs at least one member");
  }
}

const BackendDescriptor& BackendPool::descriptor() const {
  return members_.front()->descriptor();
}

BackendPool::Lease BackendPool::Acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  std::size_t index = 0;
  cv_.wait(lock, [&] {
    for (std::size_t i = 0; i < busy_.size(); ++i) {
      if (!busy_[i]) {
        index = i;
        return true;
      }
    }
    return false;
  });
  busy_[index] = true;
  return Lease(this, index);
}

DetectionLists BackendPool::Detect(std::span<const ImageBuffer> images) {
  const std::size_t parts = std::min(members_.size(), images.size());
  if (parts <= 1) {
    Lease lease = Acquire();
    return lease->Detect(images);
  }
  const std::size_t per = (images.size() + parts - 1) / parts;
  std::vector<std::future<DetectionLists>> futures;
  for (std::size_t begin = 0; begin < images.size(); begin += per) {
    const auto slice = images.subspan(begin, std::min(per, images.size() - begin));
    futures.push_back(std::async(std::launch::async, [this, slice] {
      Lease lease = Acquire();
      return lease->Detect(slice);
    }));
  }
  DetectionLists out;
  out.reserve(images.size());
  std::exception_ptr first_error;
  for (auto& f : futures) {
    try {
      for (auto& lst : f.get()) out.push_back(std::move(lst));
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

DetectionLists BackendPool::DetectChunk(std::span<const ImageBuffer> images) {
  return Detect(images);
}

WhiteBoxCapture BackendPool::Capture(const ImageBuffer& image, const std::string& layer,
                                     std::size_t target_index) {
  Lease lease = Acquire();
  return lease->Capture(image, layer, target_index);
}

std::unique_ptr<Detector> MakeBackend(const std::string& spec,
                                      const BackendOptions& options) {
  auto make_one = [&]() -> std::unique_ptr<Detector> {
    if (spec == "synthetic") return std::make_unique<SyntheticDetector>();
    if (spec.rfind("subprocess:", 0) == 0) {
      SubprocessOptions opts;
      opts.batch_timeout = options.timeout;
      return std::make_unique<SubprocessDetector>(spec.substr(11), opts);
    }
    if (spec.rfind("http:", 0) == 0) {
      // Accepts "http:http://host:port", "http://host:port" and "http:host:port".
      std::string url = spec.substr(5);
      if (url.rfind("//", 0) == 0) {
        url = "http:" + url;
      } else if (url.rfind("http://", 0) != 0) {
        url = "http://" + url;
      }
      return std::make_unique<HttpDetector>(url, HttpOptions{options.timeout});
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown backend spec '" + spec + "'");
  };
  if (options.pool_size <= 1) return make_one();
  std::vector<std::unique_ptr<Detector>> members;
  for (std::size_t i = 0; i < options.pool_size; ++i) members.push_back(make_one());
  return std::make_unique<BackendPool>(std::move(members));
}

}  // namespace odexai
