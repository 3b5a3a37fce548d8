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

#ifndef ODEXAI_SERVICE_H_
#define ODEXAI_SERVICE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "odexai/detectors.h"
#include "odexai/image_io.h"

namespace odexai {

// Content-addressed blobs under <root>/objects. A ref is the lowercase hex
// sha256 of the stored bytes.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path root);

  std::string Put(std::span<const std::uint8_t> bytes);
  std::string Put(std::string_view text);
  std::optional<Bytes> Get(const std::string& ref) const;
  bool Contains(const std::string& ref) const;

  static bool IsRef(std::string_view ref);

 private:
  std::filesystem::path PathFor(const std::string& ref) const;
  std::filesystem::path root_;
};

enum class JobKind { kExplain, kEvaluate, kBench };
enum class JobState { kQueued, kRunning, kDone, kFailed };

std::string_view JobKindName(JobKind kind);
std::string_view JobStateName(JobState state);

struct Job {
  std::string job_id;
  JobKind kind = JobKind::kExplain;
  JobState state = JobState::kQueued;
  double progress = 0.0;
  std::optional<std::string> result_ref;
  nlohmann::json result;  // null until done
  std::optional<std::string> error;
  nlohmann::json request;

  friend bool operator==(const Job&, const Job&) = default;
};

nlohmann::json ToJson(const Job& job);
Job JobFromJson(const nlohmann::json& j);

// Persists every job as <root>/<job_id>.json. On open, jobs left queued or
// running by a previous process are marked failed with a "Restart" error.
class JobStore {
 public:
  explicit JobStore(std::filesystem::path root);

  Job Create(JobKind kind, nlohmann::json request);
  std::optional<Job> Get(const std::string& job_id) const;
  // Enforces queued -> running -> {done, failed} and monotone progress.
  void MarkRunning(const std::string& job_id);
  void SetProgress(const std::string& job_id, double progress);
  void MarkDone(const std::string& job_id, std::string result_ref, nlohmann::json result);
  void MarkFailed(const std::string& job_id, std::string error);
  // Jobs that are queued or running.
  std::size_t ActiveCount() const;
  std::vector<std::string> QueuedIds() const;

 private:
  void Persist(const Job& job) const;
  Job& Find(const std::string& job_id);

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, Job> jobs_;
  std::uint64_t next_id_ = 1;
};

struct ServiceConfig {
  std::filesystem::path data_dir = "odexai-data";
  std::filesystem::path ui_dir;  // served under /ui when non-empty
  std::map<std::string, std::string> backends = {{"synthetic", "synthetic"}};
  BackendOptions backend_options;
  std::size_t queue_bound = 32;
  std::size_t max_upload_bytes = 16u << 20;
  int workers = 1;
  bool autostart_workers = true;
};

// Reads the service configuration (TOML):
//
//   [server]
//   data_dir = "/var/lib/odexai"
//   queue_bound = 32
//   [backends]
//   synthetic = "synthetic"
//   yolox = "subprocess:python -m odexai_adapter --model yolox"
//
// Throws kParseError on malformed TOML, unknown sections or keys, and values
// of the wrong type.
ServiceConfig LoadServiceConfig(const std::filesystem::path& path);
ServiceConfig ParseServiceConfig(std::string_view toml);

// The REST facade. Handlers run on the HTTP server's threads; jobs run on a
// separate bounded worker pool.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Returns the bound port.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Listen();
  void Stop();
  void StartWorkers();

  ArtifactStore& artifacts();
  JobStore& jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace odexai

#endif  // ODEXAI_SERVICE_H_
