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

#include "odexai/service.h"

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <deque>
#include <functional>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "toml.hpp"
#include "odexai/error.h"
#include "odexai/explainers.h"
#include "odexai/harness.h"
#include "odexai/metrics.h"

namespace odexai {

// ---------------------------------------------------------------------------
// ArtifactStore

ArtifactStore::ArtifactStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "objects");
}

bool ArtifactStore::IsRef(std::string_view ref) {
  return ref.size() == 64 && std::all_of(ref.begin(), ref.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::filesystem::path ArtifactStore::PathFor(const std::string& ref) const {
  return root_ / "objects" / ref.substr(0, 2) / ref;
}

std::string ArtifactStore::Put(std::span<const std::uint8_t> bytes) {
  const std::string ref = Sha256Hex(bytes);
  const auto path = PathFor(ref);
  if (!std::filesystem::exists(path)) WriteFileAtomic(path, bytes);
  return ref;
}

std::string ArtifactStore::Put(std::string_view text) {
  return Put(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                           text.size()));
}

std::optional<Bytes> ArtifactStore::Get(const std::string& ref) const {
  if (!IsRef(ref)) return std::nullopt;
  const auto path = PathFor(ref);
  if (!std::filesystem::exists(path)) return std::nullopt;
  return ReadFileBytes(path);
}

bool ArtifactStore::Contains(const std::string& ref) const {
  return IsRef(ref) && std::filesystem::exists(PathFor(ref));
}

// ---------------------------------------------------------------------------
// Jobs

std::string_view JobKindName(JobKind kind) {
  switch (kind) {
    case JobKind::kExplain: return "explain";
    case JobKind::kEvaluate: return "evaluate";
    case JobKind::kBench: return "bench";
  }
  return "?";
}

std::string_view JobStateName(JobState state) {
  switch (state) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "?";
}

namespace {

template <typename E, std::size_t N>
E ParseName(std::string_view name, const E (&values)[N], std::string_view (*to_name)(E)) {
  for (E v : values) {
    if (to_name(v) == name) return v;
  }
  throw Error(ErrorCode::kParseError, "unknown enum value '" + std::string(name) + "'");
}

constexpr JobKind kKinds[] = {JobKind::kExplain, JobKind::kEvaluate, JobKind::kBench};
constexpr JobState kStates[] = {JobState::kQueued, JobState::kRunning, JobState::kDone,
                                JobState::kFailed};

}  // namespace

nlohmann::json ToJson(const Job& job) {
  return {{"job_id", job.job_id},
          {"kind", JobKindName(job.kind)},
          {"state", JobStateName(job.state)},
          {"progress", job.progress},
          {"result_ref", job.result_ref ? nlohmann::json(*job.result_ref) : nullptr},
          {"result", job.result},
          {"error", job.error ? nlohmann::json(*job.error) : nullptr},
          {"request", job.request}};
}

Job JobFromJson(const nlohmann::json& j) {
  try {
    Job job;
    job.job_id = j.at("job_id").get<std::string>();
    job.kind = ParseName(j.at("kind").get<std::string>(), kKinds, JobKindName);
    job.state = ParseName(j.at("state").get<std::string>(), kStates, JobStateName);
    job.progress = j.at("progress").get<double>();
    if (!j.at("result_ref").is_null()) job.result_ref = j["result_ref"].get<std::string>();
    job.result = j.at("result");
    if (!j.at("error").is_null()) job.error = j["error"].get<std::string>();
    job.request = j.value("request", nlohmann::json());
    return job;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad job record: ") + e.what());
  }
}

JobStore::JobStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(root_)) {
    if (f.path().extension() == ".json") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const Bytes raw = ReadFileBytes(f);
    Job job = JobFromJson(nlohmann::json::parse(raw.begin(), raw.end()));
    if (job.state == JobState::kQueued || job.state == JobState::kRunning) {
      job.state = JobState::kFailed;
      job.error = "Restart: service restarted before the job finished";
      Persist(job);
    }
    std::uint64_t n = 0;
    const std::string& id = job.job_id;
    if (id.size() > 4 && std::from_chars(id.data() + 4, id.data() + id.size(), n).ec ==
                             std::errc()) {
      next_id_ = std::max(next_id_, n + 1);
    }
    jobs_.emplace(id, std::move(job));
  }
}

void JobStore::Persist(const Job& job) const {
  WriteFileAtomic(root_ / (job.job_id + ".json"), ToJson(job).dump());
}

Job& JobStore::Find(const std::string& job_id) {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::kNotFound, "unknown job " + job_id);
  return it->second;
}

Job JobStore::Create(JobKind kind, nlohmann::json request) {
  std::lock_guard lock(mu_);
  char id[32];
  std::snprintf(id, sizeof(id), "job-%08llu", static_cast<unsigned long long>(next_id_++));
  Job job;
  job.job_id = id;
  job.kind = kind;
  job.request = std::move(request);
  Persist(job);
  jobs_.emplace(job.job_id, job);
  return job;
}

std::optional<Job> JobStore::Get(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void JobStore::MarkRunning(const std::string& job_id) {
  std::lock_guard lock(mu_);
  Job& job = Find(job_id);
  if (job.state != JobState::kQueued) {
    throw Error(ErrorCode::kInvalidArgument, "job " + job_id + " is not queued");
  }
  job.state = JobState::kRunning;
  Persist(job);
}

void JobStore::SetProgress(const std::string& job_id, double progress) {
  std::lock_guard lock(mu_);
  Job& job = Find(job_id);
  if (job.state != JobState::kRunning) return;
  const double p = std::clamp(progress, 0.0, 1.0);
  if (p <= job.progress) return;
  job.progress = p;
  Persist(job);
}

void JobStore::MarkDone(const std::string& job_id, std::string result_ref,
                        nlohmann::json result) {
  std::lock_guard lock(mu_);
  Job& job = Find(job_id);
  if (job.state != JobState::kRunning) {
    throw Error(ErrorCode::kInvalidArgument, "job " + job_id + " is not running");
  }
  job.state = JobState::kDone;
  job.progress = 1.0;
  job.result_ref = std::move(result_ref);
  job.result = std::move(result);
  Persist(job);
}

void JobStore::MarkFailed(const std::string& job_id, std::string error) {
  std::lock_guard lock(mu_);
  Job& job = Find(job_id);
  if (job.state == JobState::kDone || job.state == JobState::kFailed) {
    throw Error(ErrorCode::kInvalidArgument, "job " + job_id + " already finished");
  }
  job.state = JobState::kFailed;
  job.error = std::move(error);
  Persist(job);
}

std::size_t JobStore::ActiveCount() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(jobs_.begin(), jobs_.end(), [](const auto& kv) {
    return kv.second.state == JobState::kQueued || kv.second.state == JobState::kRunning;
  }));
}

std::vector<std::string> JobStore::QueuedIds() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, job] : jobs_) {
    if (job.state == JobState::kQueued) ids.push_back(id);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Configuration

ServiceConfig ParseServiceConfig(std::string_view text) {
  toml::table doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "line " << e.source().begin.line << ": " << e.description();
    throw Error(ErrorCode::kParseError, msg.str());
  }
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kParseError, msg); };
  ServiceConfig cfg;
  for (const auto& [key, node] : doc) {
    if (key != "server" && key != "backends") fail("unknown section " + std::string(key.str()));
    if (!node.is_table()) fail(std::string(key.str()) + " must be a table");
  }
  if (const auto* server = doc["server"].as_table()) {
    for (const auto& [key, node] : *server) {
      const std::string k(key.str());
      auto need_num = [&] {
        const auto v = node.value<std::int64_t>();
        if (!node.is_integer() || !v || *v < 0) fail(k + " must be a non-negative integer");
        return static_cast<std::size_t>(*v);
      };
      auto need_str = [&] {
        if (!node.is_string()) fail(k + " must be a string");
        return *node.value<std::string>();
      };
      if (k == "data_dir") {
        cfg.data_dir = need_str();
      } else if (k == "ui_dir") {
        cfg.ui_dir = need_str();
      } else if (k == "queue_bound") {
        cfg.queue_bound = need_num();
      } else if (k == "max_upload_bytes") {
        cfg.max_upload_bytes = need_num();
      } else if (k == "workers") {
        cfg.workers = static_cast<int>(need_num());
      } else if (k == "pool_size") {
        cfg.backend_options.pool_size = need_num();
      } else if (k == "timeout_ms") {
        cfg.backend_options.timeout = std::chrono::milliseconds(need_num());
      } else {
        fail("unknown server key " + k);
      }
    }
  }
  if (const auto* backends = doc["backends"].as_table()) {
    cfg.backends.clear();
    for (const auto& [key, node] : *backends) {
      if (!node.is_string()) fail("backend spec for " + std::string(key.str()) + " must be a string");
      cfg.backends[std::string(key.str())] = *node.value<std::string>();
    }
  }
  if (cfg.workers < 1) fail("workers must be >= 1");
  if (cfg.queue_bound < 1) fail("queue_bound must be >= 1");
  return cfg;
}

ServiceConfig LoadServiceConfig(const std::filesystem::path& path) {
  const Bytes raw = ReadFileBytes(path);
  return ParseServiceConfig(std::string_view(reinterpret_cast<const char*>(raw.data()),
                                             raw.size()));
}

// ---------------------------------------------------------------------------
// HTTP facade

namespace {

// Thrown inside handlers; carries the HTTP status and a short error name.
struct HttpError {
  int status;
  std::string name;
  std::string message;
};

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kTimeout:
    case ErrorCode::kProtocolViolation:
      return 502;
    case ErrorCode::kDimensionMismatch:
      return 422;
    case ErrorCode::kNotFound:
      return 404;
    default:
      return 400;
  }
}

nlohmann::json DetectionJson(const Detection& d, std::size_t index,
                             const std::vector<std::string>& class_names) {
  const auto& b = d.bbox();
  return {{"index", index},
          {"bbox", {b.x1(), b.y1(), b.x2(), b.y2()}},
          {"objectness", d.objectness()},
          {"class_probs", d.class_probs()},
          {"label", d.label()},
          {"class_name", d.label() < class_names.size() ? class_names[d.label()] : ""}};
}

struct BackendSlot {
  std::string spec;
  std::unique_ptr<Detector> detector;
  std::mutex mu;
};

struct DetectionSet {
  std::uint64_t generation = 0;
  std::vector<Detection> detections;
};

nlohmann::json ParseBody(const httplib::Request& req) {
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "BadRequest", "body must be a JSON object"};
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw HttpError{400, "BadRequest", std::string("invalid JSON: ") + e.what()};
  }
}

template <typename T>
T Field(const nlohmann::json& body, const char* key) {
  if (!body.contains(key)) {
    throw HttpError{400, "BadRequest", std::string("missing field '") + key + "'"};
  }
  try {
    return body.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw HttpError{400, "BadRequest", std::string("field '") + key + "' has the wrong type"};
  }
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceConfig cfg)
      : config(std::move(cfg)),
        store(config.data_dir / "artifacts"),
        jobs(config.data_dir / "jobs") {
    for (const auto& [name, spec] : config.backends) {
      backends[name] = std::make_unique<BackendSlot>();
      backends[name]->spec = spec;
    }
    Routes();
  }

  ~Impl() {
    server.stop();
    {
      std::lock_guard lock(queue_mu);
      stopping = true;
    }
    queue_cv.notify_all();
    for (auto& t : workers) t.join();
  }

  void StartWorkers() {
    std::lock_guard lock(queue_mu);
    if (!workers.empty()) return;
    for (int i = 0; i < config.workers; ++i) workers.emplace_back([this] { WorkerLoop(); });
  }

  // --- backends -----------------------------------------------------------

  BackendSlot& Slot(const std::string& name) {
    auto it = backends.find(name);
    if (it == backends.end()) throw HttpError{404, "UnknownBackend", "no backend '" + name + "'"};
    return *it->second;
  }

  // Runs fn with exclusive use of the backend, spawning it if needed. A
  // backend that fails at the transport level is dropped and respawned on
  // the next call.
  template <typename Fn>
  auto WithBackend(BackendSlot& slot, Fn&& fn) {
    std::lock_guard lock(slot.mu);
    if (!slot.detector) slot.detector = MakeBackend(slot.spec, config.backend_options);
    try {
      return fn(*slot.detector);
    } catch (const Error& e) {
      if (StatusFor(e.code()) == 502) slot.detector.reset();
      throw;
    }
  }

  // --- jobs ---------------------------------------------------------------

  using Task = std::function<std::pair<std::string, nlohmann::json>(const ProgressFn&)>;

  std::string Enqueue(JobKind kind, nlohmann::json request, Task task) {
    std::lock_guard lock(queue_mu);
    if (jobs.ActiveCount() >= config.queue_bound) {
      throw HttpError{429, "QueueFull", "job queue is full"};
    }
    const Job job = jobs.Create(kind, std::move(request));
    tasks[job.job_id] = std::move(task);
    queue.push_back(job.job_id);
    queue_cv.notify_one();
    return job.job_id;
  }

  void WorkerLoop() {
    for (;;) {
      std::string id;
      Task task;
      {
        std::unique_lock lock(queue_mu);
        queue_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        id = queue.front();
        queue.pop_front();
        task = std::move(tasks.at(id));
        tasks.erase(id);
      }
      try {
        jobs.MarkRunning(id);
        auto [ref, result] = task([&](double p) { jobs.SetProgress(id, p); });
        jobs.MarkDone(id, std::move(ref), std::move(result));
      } catch (const HttpError& e) {
        jobs.MarkFailed(id, e.name + ": " + e.message);
      } catch (const std::exception& e) {
        jobs.MarkFailed(id, e.what());
      }
    }
  }

  // --- shared lookups -----------------------------------------------------

  ImageBuffer LoadImage(const std::string& image_id) {
    const auto bytes = store.Get(image_id);
    if (!bytes) throw HttpError{404, "UnknownImage", "no image '" + image_id + "'"};
    return DecodePng(*bytes);
  }

  // Resolves a target against the latest detection set for (image, backend).
  Detection ResolveTarget(const nlohmann::json& body, const std::string& image_id,
                          const std::string& backend) {
    const auto index = Field<long long>(body, "target_index");
    std::lock_guard lock(det_mu);
    const auto it = detection_sets.find({image_id, backend});
    if (it == detection_sets.end()) {
      throw HttpError{409, "TargetIndexStale", "run /api/detect for this image first"};
    }
    if (body.contains("generation") &&
        Field<std::uint64_t>(body, "generation") != it->second.generation) {
      throw HttpError{409, "TargetIndexStale", "detections were re-run since selection"};
    }
    if (index < 0 || static_cast<std::size_t>(index) >= it->second.detections.size()) {
      throw HttpError{409, "TargetIndexStale", "target_index out of range"};
    }
    return it->second.detections[static_cast<std::size_t>(index)];
  }

  // --- handlers -----------------------------------------------------------

  nlohmann::json PostImage(const httplib::Request& req) {
    if (req.body.size() > config.max_upload_bytes) {
      throw HttpError{413, "TooLarge", "upload exceeds " + std::to_string(config.max_upload_bytes) +
                                           " bytes"};
    }
    const std::span<const std::uint8_t> bytes(
        reinterpret_cast<const std::uint8_t*>(req.body.data()), req.body.size());
    std::optional<ImageBuffer> image;
    try {
      image = DecodePng(bytes);
    } catch (const Error& e) {
      throw HttpError{400, "BadImage", e.what()};
    }
    const std::string id = store.Put(bytes);
    return {{"image_id", id}, {"width", image->width()}, {"height", image->height()}};
  }

  // Stores arbitrary bytes, such as a saliency map produced elsewhere.
  nlohmann::json PostArtifact(const httplib::Request& req) {
    if (req.body.size() > config.max_upload_bytes) {
      throw HttpError{413, "TooLarge", "upload exceeds " + std::to_string(config.max_upload_bytes) +
                                           " bytes"};
    }
    return {{"ref", store.Put(std::string_view(req.body))}, {"size", req.body.size()}};
  }

  nlohmann::json PostDetect(const httplib::Request& req) {
    const auto body = ParseBody(req);
    const auto image_id = Field<std::string>(body, "image_id");
    const auto backend = Field<std::string>(body, "backend");
    BackendSlot& slot = Slot(backend);
    const ImageBuffer image = LoadImage(image_id);
    std::vector<std::string> classes;
    const auto dets = WithBackend(slot, [&](Detector& d) {
      classes = d.descriptor().class_names;
      return d.Detect(std::span<const ImageBuffer>(&image, 1)).at(0);
    });
    std::uint64_t generation = 0;
    {
      std::lock_guard lock(det_mu);
      generation = ++next_generation;
      detection_sets[{image_id, backend}] = {generation, dets};
    }
    nlohmann::json out = {{"image_id", image_id},
                          {"backend", backend},
                          {"generation", generation},
                          {"detections", nlohmann::json::array()}};
    for (std::size_t i = 0; i < dets.size(); ++i) {
      out["detections"].push_back(DetectionJson(dets[i], i, classes));
    }
    return out;
  }

  nlohmann::json PostExplain(const httplib::Request& req) {
    const auto body = ParseBody(req);
    const auto image_id = Field<std::string>(body, "image_id");
    const auto backend = Field<std::string>(body, "backend");
    BackendSlot& slot = Slot(backend);
    if (!store.Contains(image_id)) throw HttpError{404, "UnknownImage", "no image " + image_id};
    ExplainerConfig cfg;
    try {
      nlohmann::json overrides = body.value("config", nlohmann::json::object());
      if (!overrides.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be an object");
      overrides["method"] = Field<std::string>(body, "method");
      cfg = ExplainerConfigFromJson(overrides);
    } catch (const Error& e) {
      throw HttpError{400, "BadRequest", e.what()};
    }
    const Detection target = ResolveTarget(body, image_id, backend);
    const auto target_index = Field<std::size_t>(body, "target_index");
    const std::string job_id = Enqueue(
        JobKind::kExplain, body,
        [this, &slot, image_id, target, target_index, cfg](const ProgressFn& progress) {
          progress(0.0);
          const ImageBuffer image = LoadImage(image_id);
          const TargetSpec spec{target, image_id};
          const ExplanationResult ex = WithBackend(
              slot, [&](Detector& d) { return Explain(d, image, spec, target_index, cfg); });
          const Bytes pgm = EncodePgm16(ex.saliency);
          const std::string saliency_ref = store.Put(pgm);
          const nlohmann::json sidecar = ExplanationSidecar(ex, spec);
          const std::string sidecar_ref = store.Put(sidecar.dump(2));
          return std::pair{saliency_ref, nlohmann::json{{"saliency_ref", saliency_ref},
                                                        {"sidecar_ref", sidecar_ref},
                                                        {"sidecar", sidecar}}};
        });
    return {{"job_id", job_id}};
  }

  nlohmann::json PostEvaluate(const httplib::Request& req) {
    const auto body = ParseBody(req);
    const auto image_id = Field<std::string>(body, "image_id");
    const auto backend = Field<std::string>(body, "backend");
    const auto saliency_ref = Field<std::string>(body, "saliency_ref");
    BackendSlot& slot = Slot(backend);
    const ImageBuffer image = LoadImage(image_id);
    const auto pgm = store.Get(saliency_ref);
    if (!pgm) throw HttpError{404, "UnknownArtifact", "no artifact " + saliency_ref};
    std::optional<SaliencyMap> map;
    try {
      map = DecodePgm(*pgm);
    } catch (const Error& e) {
      throw HttpError{400, "BadRequest", std::string("saliency is not a PGM: ") + e.what()};
    }
    if (map->width() != image.width() || map->height() != image.height()) {
      throw HttpError{422, "DimensionMismatch", "saliency and image dimensions differ"};
    }
    MetricsConfig cfg;
    try {
      cfg = MetricsConfigFromJson(body.value("config", nlohmann::json::object()));
    } catch (const Error& e) {
      throw HttpError{400, "BadRequest", e.what()};
    }
    const Detection target = ResolveTarget(body, image_id, backend);
    BBox roi = target.bbox();
    if (body.contains("roi")) {
      try {
        const auto r = body["roi"].get<std::vector<double>>();
        if (r.size() != 4) throw Error(ErrorCode::kInvalidArgument, "roi needs four numbers");
        roi = BBox(r[0], r[1], r[2], r[3]);
      } catch (const std::exception& e) {
        throw HttpError{400, "BadRequest", std::string("bad roi: ") + e.what()};
      }
    }
    const std::string method = body.value("method", std::string("external"));
    const double elapsed = body.value("elapsed_s", 0.0);
    const std::string instance_id = std::to_string(Field<long long>(body, "target_index"));
    const std::string job_id = Enqueue(
        JobKind::kEvaluate, body,
        [this, &slot, image, map = *map, target, roi, cfg, method, elapsed, image_id, backend,
         instance_id](const ProgressFn& progress) {
          progress(0.0);
          ExplanationResult ex{map, elapsed, Method::kDrise, ""};
          const RecordLabels labels{method, backend, "interactive", image_id, instance_id,
                                    static_cast<int>(target.label())};
          const EvaluationRecord record = WithBackend(slot, [&](Detector& d) {
            return EvaluateAll(d, image, ex, target, roi, cfg, labels);
          });
          const SpiderAxes axes =
              ComputeSpiderAxes(Aggregate({record}), SpiderMode::kThreeAxis);
          nlohmann::json result = {{"record", ToJson(record)}, {"axes", ToJson(axes)}};
          const std::string ref = store.Put(result.dump(2));
          return std::pair{ref, result};
        });
    return {{"job_id", job_id}};
  }

  nlohmann::json PostBench(const httplib::Request& req) {
    const auto body = ParseBody(req);
    const auto kind = body.value("dataset", std::string("coco"));
    const auto ann = Field<std::string>(body, "ann");
    const auto images = body.value("images", std::string());
    const auto names = Field<std::vector<std::string>>(body, "backends");
    const auto method_names = Field<std::vector<std::string>>(body, "methods");
    if (kind != "coco" && kind != "voc") throw HttpError{400, "BadRequest", "dataset must be coco or voc"};
    std::vector<BackendSlot*> slots;
    for (const auto& n : names) slots.push_back(&Slot(n));
    BenchmarkConfig cfg;
    std::vector<Method> methods;
    try {
      for (const auto& m : method_names) methods.push_back(ParseMethod(m));
      cfg.explainer = ExplainerConfigFromJson(body.value("config", nlohmann::json::object()));
      cfg.metrics = MetricsConfigFromJson(body.value("metrics", nlohmann::json::object()));
      if (body.contains("limit")) cfg.sample_limit = Field<std::size_t>(body, "limit");
    } catch (const Error& e) {
      throw HttpError{400, "BadRequest", e.what()};
    }
    const auto out_root = config.data_dir / "reports";
    const std::string job_id = Enqueue(
        JobKind::kBench, body,
        [this, kind, ann, images, names, slots, methods, cfg, out_root](
            const ProgressFn& progress) {
          const DatasetIndex index = kind == "coco" ? LoadCoco(ann, images) : LoadVoc(ann);
          // Hold every backend for the whole run.
          std::vector<std::unique_lock<std::mutex>> locks;
          std::vector<NamedBackend> named;
          for (std::size_t i = 0; i < slots.size(); ++i) {
            locks.emplace_back(slots[i]->mu);
            if (!slots[i]->detector) {
              slots[i]->detector = MakeBackend(slots[i]->spec, config.backend_options);
            }
            named.push_back({names[i], slots[i]->detector.get()});
          }
          const BenchmarkReport report = RunBenchmark(index, named, methods, cfg, progress);
          const std::string ref = store.Put(ToJson(report).dump(2));
          WriteReportBundle(out_root / ref.substr(0, 16), report);
          nlohmann::json aggregates = nlohmann::json::array();
          for (const auto& a : report.aggregates) aggregates.push_back(ToJson(a));
          return std::pair{ref, nlohmann::json{{"report_ref", ref},
                                               {"records", report.records.size()},
                                               {"skips", report.skips.size()},
                                               {"aggregates", aggregates}}};
        });
    return {{"job_id", job_id}};
  }

  // --- routing ------------------------------------------------------------

  using Handler = std::function<nlohmann::json(const httplib::Request&)>;

  httplib::Server::Handler Wrap(Handler h, int ok_status = 200) {
    return [h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
      auto fail = [&](int status, const std::string& name, const std::string& msg) {
        res.status = status;
        res.set_content(nlohmann::json{{"error", name}, {"message", msg}}.dump(),
                        "application/json");
      };
      try {
        const nlohmann::json out = h(req);
        res.status = ok_status;
        res.set_content(out.dump(), "application/json");
      } catch (const HttpError& e) {
        fail(e.status, e.name, e.message);
      } catch (const Error& e) {
        const int status = StatusFor(e.code());
        const std::string name = status == 502 ? "BackendUnavailable"
                                               : std::string(ErrorCodeName(e.code()));
        fail(status, name, e.what());
      } catch (const std::exception& e) {
        fail(500, "Internal", e.what());
      }
    };
  }

  void Routes() {
    server.set_payload_max_length(config.max_upload_bytes + 1);
    // Failures raised by the HTTP layer itself (oversize payloads, unknown
    // routes) get the same JSON error shape as handler failures.
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const std::string name = res.status == 413   ? "TooLarge"
                               : res.status == 404 ? "NotFound"
                                                   : "HttpError";
      res.set_content(nlohmann::json{{"error", name}, {"message", httplib::status_message(res.status)}}
                          .dump(),
                      "application/json");
      return httplib::Server::HandlerResponse::Handled;
    });
    server.Get("/api/health", Wrap([](const httplib::Request&) {
                 return nlohmann::json{{"status", "ok"}};
               }));
    server.Get("/api/backends", Wrap([this](const httplib::Request&) {
                 nlohmann::json out = nlohmann::json::array();
                 for (const auto& [name, slot] : backends) {
                   out.push_back({{"name", name}, {"spec", slot->spec}});
                 }
                 return nlohmann::json{{"backends", out}};
               }));
    server.Post("/api/images", Wrap([this](const auto& r) { return PostImage(r); }));
    server.Post("/api/artifacts", Wrap([this](const auto& r) { return PostArtifact(r); }));
    server.Post("/api/detect", Wrap([this](const auto& r) { return PostDetect(r); }));
    server.Post("/api/explain", Wrap([this](const auto& r) { return PostExplain(r); }, 202));
    server.Post("/api/evaluate", Wrap([this](const auto& r) { return PostEvaluate(r); }, 202));
    server.Post("/api/bench", Wrap([this](const auto& r) { return PostBench(r); }, 202));
    server.Get(R"(/api/jobs/([A-Za-z0-9\-]+))", Wrap([this](const httplib::Request& r) {
                 const auto job = jobs.Get(r.matches[1]);
                 if (!job) throw HttpError{404, "UnknownJob", "no job " + r.matches[1].str()};
                 return ToJson(*job);
               }));
    server.Get(R"(/api/artifacts/([^/]+))",
               [this](const httplib::Request& r, httplib::Response& res) {
                 const std::string ref = r.matches[1];
                 const auto bytes = store.Get(ref);
                 if (!bytes) {
                   res.status = 404;
                   res.set_content(nlohmann::json{{"error", "UnknownArtifact"},
                                                  {"message", "no artifact " + ref}}
                                       .dump(),
                                   "application/json");
                   return;
                 }
                 res.set_header("Cache-Control", "public, max-age=31536000, immutable");
                 res.set_content(std::string(bytes->begin(), bytes->end()),
                                 "application/octet-stream");
               });
    if (!config.ui_dir.empty()) server.set_mount_point("/ui", config.ui_dir.string());
  }

  ServiceConfig config;
  ArtifactStore store;
  JobStore jobs;
  httplib::Server server;
  std::map<std::string, std::unique_ptr<BackendSlot>> backends;

  std::mutex det_mu;
  std::map<std::pair<std::string, std::string>, DetectionSet> detection_sets;
  std::uint64_t next_generation = 0;

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::deque<std::string> queue;
  std::map<std::string, Task> tasks;
  std::vector<std::thread> workers;
  bool stopping = false;
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  if (impl_->config.autostart_workers) impl_->StartWorkers();
}

Service::~Service() = default;

int Service::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIoError, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::Listen() { impl_->server.listen_after_bind(); }
void Service::Stop() { impl_->server.stop(); }
void Service::StartWorkers() { impl_->StartWorkers(); }
ArtifactStore& Service::artifacts() { return impl_->store; }
JobStore& Service::jobs() { return impl_->jobs; }

}  // namespace odexai
