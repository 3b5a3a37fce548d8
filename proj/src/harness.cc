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

#include "odexai/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "odexai/error.h"
#include "odexai/image_io.h"
#include "odexai/rng.h"
#include "odexai/table_format.h"

namespace odexai {

const ImageEntry* DatasetIndex::FindImage(const std::string& image_id) const {
  for (const auto& e : images) {
    if (e.image_id == image_id) return &e;
  }
  return nullptr;
}

namespace {

std::string IdString(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorCode::kParseError, "id must be an integer or string");
}

BBox CheckedBox(double x1, double y1, double x2, double y2, const ImageEntry& img,
                const std::string& what) {
  try {
    BBox box(x1, y1, x2, y2);
    if (img.width > 0 && img.height > 0 && !box.FitsWithin(img.width, img.height)) {
      throw Error(ErrorCode::kParseError, what + " exceeds image bounds");
    }
    return box;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw;
    throw Error(ErrorCode::kParseError, what + ": " + e.what());
  }
}

}  // namespace

DatasetIndex LoadCoco(const std::filesystem::path& annotation_file,
                      const std::filesystem::path& image_dir) {
  nlohmann::json doc;
  try {
    const Bytes raw = ReadFileBytes(annotation_file);
    doc = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("invalid COCO JSON: ") + e.what());
  }
  DatasetIndex index;
  index.name = annotation_file.stem().string();
  try {
    for (const auto& c : doc.at("categories")) {
      index.categories[c.at("id").get<int>()] = c.at("name").get<std::string>();
    }
    for (const auto& im : doc.at("images")) {
      ImageEntry e;
      e.image_id = IdString(im.at("id"));
      e.path = image_dir / im.at("file_name").get<std::string>();
      e.width = im.at("width").get<int>();
      e.height = im.at("height").get<int>();
      if (!std::filesystem::exists(e.path)) {
        throw Error(ErrorCode::kMissingImage, "image file not found: " + e.path.string());
      }
      index.annotations[e.image_id];
      index.images.push_back(std::move(e));
    }
    for (const auto& a : doc.at("annotations")) {
      const std::string image_id = IdString(a.at("image_id"));
      const ImageEntry* img = index.FindImage(image_id);
      if (img == nullptr) {
        throw Error(ErrorCode::kParseError,
                    "annotation references unknown image_id " + image_id);
      }
      const int category = a.at("category_id").get<int>();
      if (!index.categories.contains(category)) {
        throw Error(ErrorCode::kParseError,
                    "annotation references unknown category " + std::to_string(category));
      }
      const auto& b = a.at("bbox");
      if (!b.is_array() || b.size() != 4) {
        throw Error(ErrorCode::kParseError, "bbox must have four numbers");
      }
      const double x = b[0].get<double>(), y = b[1].get<double>();
      const double w = b[2].get<double>(), h = b[3].get<double>();
      GroundTruthInstance gt{CheckedBox(x, y, x + w, y + h, *img, "bbox"), category,
                             IdString(a.at("id")),
                             a.contains("iscrowd") && a["iscrowd"].get<int>() != 0};
      index.annotations[image_id].push_back(std::move(gt));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed COCO file: ") + e.what());
  }
  return index;
}

DatasetIndex LoadVoc(const std::filesystem::path& dataset_dir) {
  namespace pt = boost::property_tree;
  const auto ann_dir = std::filesystem::is_directory(dataset_dir / "Annotations")
                           ? dataset_dir / "Annotations"
                           : dataset_dir;
  const auto img_dir = std::filesystem::is_directory(dataset_dir / "JPEGImages")
                           ? dataset_dir / "JPEGImages"
                           : dataset_dir;
  if (!std::filesystem::is_directory(ann_dir)) {
    throw Error(ErrorCode::kParseError, "not a directory: " + ann_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(ann_dir)) {
    if (f.path().extension() == ".xml") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());

  struct RawObject {
    std::string name;
    double x1, y1, x2, y2;
    bool difficult;
  };
  DatasetIndex index;
  index.name = dataset_dir.filename().string();
  std::vector<std::pair<ImageEntry, std::vector<RawObject>>> parsed;
  std::set<std::string> names;
  for (const auto& file : files) {
    pt::ptree tree;
    try {
      pt::read_xml(file.string(), tree);
      const pt::ptree& ann = tree.get_child("annotation");
      ImageEntry e;
      e.image_id = file.stem().string();
      e.path = img_dir / ann.get<std::string>("filename");
      e.width = ann.get<int>("size.width");
      e.height = ann.get<int>("size.height");
      std::vector<RawObject> objects;
      for (const auto& [key, node] : ann) {
        if (key != "object") continue;
        RawObject o{node.get<std::string>("name"),
                    node.get<double>("bndbox.xmin"),
                    node.get<double>("bndbox.ymin"),
                    node.get<double>("bndbox.xmax"),
                    node.get<double>("bndbox.ymax"),
                    node.get<int>("difficult", 0) != 0};
        names.insert(o.name);
        objects.push_back(std::move(o));
      }
      parsed.emplace_back(std::move(e), std::move(objects));
    } catch (const pt::ptree_error& err) {
      throw Error(ErrorCode::kParseError, file.string() + ": " + err.what());
    }
  }
  std::map<std::string, int> ids;
  for (const auto& n : names) {
    const int id = static_cast<int>(ids.size());
    ids[n] = id;
    index.categories[id] = n;
  }
  for (auto& [entry, objects] : parsed) {
    auto& list = index.annotations[entry.image_id];
    for (std::size_t k = 0; k < objects.size(); ++k) {
      const auto& o = objects[k];
      list.push_back({CheckedBox(o.x1, o.y1, o.x2, o.y2, entry, "bndbox"), ids.at(o.name),
                      entry.image_id + "_" + std::to_string(k), o.difficult});
    }
    index.images.push_back(std::move(entry));
  }
  return index;
}

BlobSample MakeBlobSample(std::uint64_t seed, int width, int height) {
  constexpr int kMinSide = 14, kMaxSide = 22, kMargin = 2;
  if (width < kMaxSide + 2 * kMargin || height < kMaxSide + 2 * kMargin) {
    throw Error(ErrorCode::kInvalidArgument, "image too small for a blob");
  }
  const CounterRng rng(seed);
  auto pick = [&](std::uint64_t key, int lo, int hi) {
    return lo + static_cast<int>(rng.Uniform({key}) * (hi - lo + 1));
  };
  const int label = pick(0, 0, 2);
  const int bw = pick(1, kMinSide, kMaxSide);
  const int bh = pick(2, kMinSide, kMaxSide);
  const int x0 = pick(3, kMargin, width - bw - kMargin);
  const int y0 = pick(4, kMargin, height - bh - kMargin);
  const double fx = 0.5 + rng.Uniform({5}), fy = 0.5 + rng.Uniform({6});
  const double px = rng.Uniform({7}), py = rng.Uniform({8});

  std::vector<float> px_values(static_cast<std::size_t>(width) * height * 3);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t p = (static_cast<std::size_t>(r) * width + c) * 3;
      const bool in_blob = c >= x0 && c < x0 + bw && r >= y0 && r < y0 + bh;
      if (in_blob) {
        for (int ch = 0; ch < 3; ++ch) px_values[p + ch] = ch == label ? 0.95f : 0.05f;
      } else {
        const double g = 0.45 +
                         0.1 * std::sin(2 * std::numbers::pi * (fx * c / width + px)) +
                         0.1 * std::cos(2 * std::numbers::pi * (fy * r / height + py));
        for (int ch = 0; ch < 3; ++ch) px_values[p + ch] = static_cast<float>(g);
      }
    }
  }
  return {ImageBuffer(width, height, std::move(px_values)),
          BBox(x0, y0, x0 + bw, y0 + bh), label};
}

std::filesystem::path WriteBlobDataset(const std::filesystem::path& dir, int count,
                                       std::uint64_t seed, int width, int height) {
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "count must be >= 1");
  const CounterRng rng(seed);
  nlohmann::json doc;
  doc["images"] = nlohmann::json::array();
  doc["annotations"] = nlohmann::json::array();
  doc["categories"] = {{{"id", 1}, {"name", "red"}},
                       {{"id", 2}, {"name", "green"}},
                       {{"id", 3}, {"name", "blue"}}};
  for (int i = 0; i < count; ++i) {
    const BlobSample s = MakeBlobSample(rng.Bits({static_cast<std::uint64_t>(i)}), width,
                                        height);
    char name[32];
    std::snprintf(name, sizeof(name), "blob_%03d.png", i);
    WritePngFile(dir / "images" / name, s.image);
    doc["images"].push_back(
        {{"id", i + 1}, {"file_name", name}, {"width", width}, {"height", height}});
    doc["annotations"].push_back({{"id", i + 1},
                                  {"image_id", i + 1},
                                  {"category_id", s.label + 1},
                                  {"bbox",
                                   {s.bbox.x1(), s.bbox.y1(), s.bbox.width(),
                                    s.bbox.height()}},
                                  {"area", s.bbox.area()},
                                  {"iscrowd", 0}});
  }
  const auto path = dir / "annotations.json";
  WriteFileAtomic(path, doc.dump(1));
  return path;
}

nlohmann::json ToJson(const BenchmarkConfig& cfg) {
  nlohmann::json explainer = ToJson(cfg.explainer);
  explainer.erase("method");
  return {{"explainer", explainer},
          {"metrics", ToJson(cfg.metrics)},
          {"sample_limit", cfg.sample_limit},
          {"workers", cfg.workers}};
}

namespace {

// Serializes access to a backend that is not safe to share across threads.
class SerializedDetector final : public Detector {
 public:
  explicit SerializedDetector(Detector& inner) : inner_(inner) {}
  const BackendDescriptor& descriptor() const override { return inner_.descriptor(); }
  DetectionLists Detect(std::span<const ImageBuffer> images) override {
    std::lock_guard lock(mu_);
    return inner_.Detect(images);
  }
  WhiteBoxCapture Capture(const ImageBuffer& image, const std::string& layer,
                          std::size_t target_index) override {
    std::lock_guard lock(mu_);
    return inner_.Capture(image, layer, target_index);
  }

 protected:
  DetectionLists DetectChunk(std::span<const ImageBuffer> images) override {
    return Detect(images);
  }

 private:
  Detector& inner_;
  std::mutex mu_;
};

bool ThreadSafe(Detector* d) {
  return dynamic_cast<BackendPool*>(d) != nullptr ||
         dynamic_cast<SyntheticDetector*>(d) != nullptr;
}

struct Sample {
  std::string image_id;
  const GroundTruthInstance* gt;
};

}  // namespace

BenchmarkReport RunBenchmark(const DatasetIndex& index,
                             const std::vector<NamedBackend>& backends,
                             const std::vector<Method>& methods,
                             const BenchmarkConfig& cfg, const ProgressFn& progress) {
  if (backends.empty() || methods.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one backend and one method");
  }
  if (cfg.sample_limit < 1) throw Error(ErrorCode::kInvalidArgument, "sample_limit must be >= 1");
  if (cfg.workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  cfg.explainer.Validate();
  cfg.metrics.Validate();

  std::vector<Sample> samples;
  for (const auto& [image_id, list] : index.annotations) {
    for (const auto& gt : list) samples.push_back({image_id, &gt});
  }
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
    return std::tie(a.image_id, a.gt->instance_id) < std::tie(b.image_id, b.gt->instance_id);
  });
  if (samples.size() > cfg.sample_limit) samples.resize(cfg.sample_limit);

  BenchmarkReport report;
  report.config = ToJson(cfg);
  report.config["dataset"] = index.name;
  report.config["methods"] = nlohmann::json::array();
  for (Method m : methods) report.config["methods"].push_back(MethodName(m));
  report.config["backends"] = nlohmann::json::array();
  for (const auto& b : backends) report.config["backends"].push_back(b.name);

  // Decode each image once.
  std::map<std::string, std::optional<ImageBuffer>> images;
  std::map<std::string, std::string> load_errors;
  for (const auto& s : samples) {
    if (images.contains(s.image_id)) continue;
    const ImageEntry* entry = index.FindImage(s.image_id);
    try {
      if (entry == nullptr) throw Error(ErrorCode::kMissingImage, "image not indexed");
      images[s.image_id] = ReadPngFile(entry->path);
    } catch (const std::exception& e) {
      images[s.image_id] = std::nullopt;
      load_errors[s.image_id] = e.what();
    }
  }

  std::vector<std::unique_ptr<SerializedDetector>> wrappers;
  std::vector<Detector*> handles;
  for (const auto& b : backends) {
    if (b.detector == nullptr) throw Error(ErrorCode::kInvalidArgument, "null backend");
    if (ThreadSafe(b.detector) || cfg.workers == 1) {
      handles.push_back(b.detector);
    } else {
      wrappers.push_back(std::make_unique<SerializedDetector>(*b.detector));
      handles.push_back(wrappers.back().get());
    }
  }

  struct Item {
    std::size_t backend;
    Method method;
    std::size_t sample;
  };
  std::vector<Item> items;
  for (std::size_t b = 0; b < backends.size(); ++b) {
    for (Method m : methods) {
      for (std::size_t s = 0; s < samples.size(); ++s) items.push_back({b, m, s});
    }
  }

  // Detections per (backend, image), computed lazily once.
  std::vector<std::map<std::string, std::shared_ptr<std::vector<Detection>>>> det_cache(
      backends.size());
  std::mutex cache_mu;
  auto detections_for = [&](std::size_t b, const std::string& image_id) {
    {
      std::lock_guard lock(cache_mu);
      auto it = det_cache[b].find(image_id);
      if (it != det_cache[b].end()) return it->second;
    }
    const ImageBuffer& img = *images.at(image_id);
    auto dets = std::make_shared<std::vector<Detection>>(
        handles[b]->Detect(std::span<const ImageBuffer>(&img, 1)).at(0));
    std::lock_guard lock(cache_mu);
    return det_cache[b].emplace(image_id, dets).first->second;
  };

  std::vector<std::optional<EvaluationRecord>> results(items.size());
  std::vector<std::string> reasons(items.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mu;
  std::size_t done = 0;

  auto run_item = [&](const Item& item) -> EvaluationRecord {
    const Sample& s = samples[item.sample];
    if (!images.at(s.image_id)) throw Error(ErrorCode::kMissingImage, load_errors.at(s.image_id));
    const ImageBuffer& image = *images.at(s.image_id);
    Detector& backend = *handles[item.backend];
    const auto& classes = backend.descriptor().class_names;
    const auto cat = index.categories.find(s.gt->label);
    if (cat == index.categories.end()) {
      throw Error(ErrorCode::kNotFound, "unknown category " + std::to_string(s.gt->label));
    }
    const auto cls = std::find(classes.begin(), classes.end(), cat->second);
    if (cls == classes.end()) {
      throw Error(ErrorCode::kNotFound, "category '" + cat->second + "' not in backend classes");
    }
    const auto cls_index = static_cast<std::size_t>(cls - classes.begin());
    const auto dets = detections_for(item.backend, s.image_id);
    std::optional<std::size_t> match;
    double best_iou = 0.0;
    for (std::size_t i = 0; i < dets->size(); ++i) {
      const Detection& d = (*dets)[i];
      if (d.label() != cls_index) continue;
      const double iou = Iou(d.bbox(), s.gt->bbox);
      if (iou >= cfg.metrics.gamma && (!match || iou > best_iou)) {
        match = i;
        best_iou = iou;
      }
    }
    if (!match) throw Error(ErrorCode::kNotFound, "no matching detection");
    const Detection& target = (*dets)[*match];
    ExplainerConfig ecfg = cfg.explainer;
    ecfg.method = item.method;
    const ExplanationResult ex =
        Explain(backend, image, TargetSpec{target, s.image_id}, *match, ecfg);
    return EvaluateAll(backend, image, ex, target, s.gt->bbox, cfg.metrics,
                       {std::string(MethodName(item.method)), backends[item.backend].name,
                        index.name, s.image_id, s.gt->instance_id, s.gt->label});
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        results[i] = run_item(items[i]);
      } catch (const std::exception& e) {
        reasons[i] = e.what();
      }
      if (progress) {
        std::lock_guard lock(progress_mu);
        progress(static_cast<double>(++done) / static_cast<double>(items.size()));
      }
    }
  };
  const int n_threads =
      std::min<int>(cfg.workers, static_cast<int>(std::max<std::size_t>(items.size(), 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < items.size(); ++i) {
    if (results[i]) {
      report.records.push_back(std::move(*results[i]));
    } else {
      const Sample& s = samples[items[i].sample];
      report.skips.push_back({std::string(MethodName(items[i].method)),
                              backends[items[i].backend].name, s.image_id,
                              s.gt->instance_id, reasons[i]});
    }
  }
  if (!report.records.empty()) report.aggregates = Aggregate(report.records);
  if (progress && items.empty()) progress(1.0);
  return report;
}

namespace {

auto RecordKey(const EvaluationRecord& r) {
  return std::tie(r.image_id, r.instance_id, r.category, r.ins_auc, r.del_auc, r.oa, r.pg_hit,
                  r.ebpg, r.sparsity, r.time_s);
}

double Mean(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

std::vector<AggregateRow> Aggregate(const std::vector<EvaluationRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyGroup, "no records to aggregate");
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const EvaluationRecord*>> groups;
  for (const auto& r : records) groups[{r.method, r.model, r.dataset}].push_back(&r);

  std::vector<AggregateRow> rows;
  for (auto& [key, group] : groups) {
    // A canonical order makes floating-point sums independent of input order.
    std::sort(group.begin(), group.end(),
              [](const auto* a, const auto* b) { return RecordKey(*a) < RecordKey(*b); });
    AggregateRow row;
    std::tie(row.method, row.model, row.dataset) = key;
    row.count = group.size();
    std::vector<double> ins, del, sparsity, time, pg_all, ebpg_all;
    std::map<int, std::vector<double>> pg_cat, ebpg_cat;
    for (const auto* r : group) {
      ins.push_back(r->ins_auc);
      del.push_back(r->del_auc);
      sparsity.push_back(r->sparsity);
      time.push_back(r->time_s);
      pg_all.push_back(r->pg_hit ? 1.0 : 0.0);
      pg_cat[r->category].push_back(r->pg_hit ? 1.0 : 0.0);
      if (r->ebpg) {
        ebpg_all.push_back(*r->ebpg);
        ebpg_cat[r->category].push_back(*r->ebpg);
      }
    }
    row.ins = Mean(ins);
    row.del = Mean(del);
    row.oa = row.ins - row.del;
    row.sparsity = Mean(sparsity);
    row.time_s = Mean(time);
    row.pg_record = Mean(pg_all);
    std::vector<double> per_cat;
    for (const auto& [cat, hits] : pg_cat) per_cat.push_back(Mean(hits));
    row.pg = Mean(per_cat);
    if (!ebpg_all.empty()) {
      row.ebpg_record = Mean(ebpg_all);
      per_cat.clear();
      for (const auto& [cat, vals] : ebpg_cat) per_cat.push_back(Mean(vals));
      row.ebpg = Mean(per_cat);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

nlohmann::json OptJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> OptFromJson(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

nlohmann::json ToJson(const AggregateRow& row) {
  return {{"method", row.method},     {"model", row.model},
          {"dataset", row.dataset},   {"count", row.count},
          {"ins", row.ins},           {"del", row.del},
          {"oa", row.oa},             {"pg", row.pg},
          {"pg_record", row.pg_record}, {"ebpg", OptJson(row.ebpg)},
          {"ebpg_record", OptJson(row.ebpg_record)}, {"sparsity", row.sparsity},
          {"time_s", row.time_s}};
}

AggregateRow AggregateRowFromJson(const nlohmann::json& j) {
  try {
    AggregateRow row;
    row.method = j.at("method").get<std::string>();
    row.model = j.at("model").get<std::string>();
    row.dataset = j.at("dataset").get<std::string>();
    row.count = j.at("count").get<std::size_t>();
    row.ins = j.at("ins").get<double>();
    row.del = j.at("del").get<double>();
    row.oa = j.at("oa").get<double>();
    row.pg = j.at("pg").get<double>();
    row.pg_record = j.at("pg_record").get<double>();
    row.ebpg = OptFromJson(j.at("ebpg"));
    row.ebpg_record = OptFromJson(j.at("ebpg_record"));
    row.sparsity = j.at("sparsity").get<double>();
    row.time_s = j.at("time_s").get<double>();
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad aggregate row: ") + e.what());
  }
}

nlohmann::json ToJson(const BenchmarkReport& report) {
  nlohmann::json j;
  j["config"] = report.config;
  j["records"] = nlohmann::json::array();
  for (const auto& r : report.records) j["records"].push_back(ToJson(r));
  j["skips"] = nlohmann::json::array();
  for (const auto& s : report.skips) {
    j["skips"].push_back({{"method", s.method},
                          {"model", s.model},
                          {"image_id", s.image_id},
                          {"instance_id", s.instance_id},
                          {"reason", s.reason}});
  }
  j["aggregates"] = nlohmann::json::array();
  for (const auto& a : report.aggregates) j["aggregates"].push_back(ToJson(a));
  return j;
}

BenchmarkReport BenchmarkReportFromJson(const nlohmann::json& j) {
  try {
    BenchmarkReport report;
    report.config = j.at("config");
    for (const auto& r : j.at("records")) report.records.push_back(EvaluationRecordFromJson(r));
    for (const auto& s : j.at("skips")) {
      report.skips.push_back({s.at("method").get<std::string>(), s.at("model").get<std::string>(),
                              s.at("image_id").get<std::string>(),
                              s.at("instance_id").get<std::string>(),
                              s.at("reason").get<std::string>()});
    }
    for (const auto& a : j.at("aggregates")) report.aggregates.push_back(AggregateRowFromJson(a));
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad report: ") + e.what());
  }
}

namespace {

struct AxisDef {
  const char* name;
  bool lower_is_better;
  std::optional<double> (*get)(const AggregateRow&);
};

const std::vector<AxisDef>& AxisDefs(SpiderMode mode) {
  static const std::vector<AxisDef> three = {
      {"OA", false, [](const AggregateRow& r) -> std::optional<double> { return r.oa; }},
      {"EBPG", false, [](const AggregateRow& r) { return r.ebpg; }},
      {"Sparsity", false,
       [](const AggregateRow& r) -> std::optional<double> { return r.sparsity; }},
  };
  static const std::vector<AxisDef> all = {
      {"OA", false, [](const AggregateRow& r) -> std::optional<double> { return r.oa; }},
      {"Ins", false, [](const AggregateRow& r) -> std::optional<double> { return r.ins; }},
      {"Del", true, [](const AggregateRow& r) -> std::optional<double> { return r.del; }},
      {"PG", false, [](const AggregateRow& r) -> std::optional<double> { return r.pg; }},
      {"EBPG", false, [](const AggregateRow& r) { return r.ebpg; }},
      {"Sparsity", false,
       [](const AggregateRow& r) -> std::optional<double> { return r.sparsity; }},
      {"Time(s)", true,
       [](const AggregateRow& r) -> std::optional<double> { return r.time_s; }},
  };
  return mode == SpiderMode::kThreeAxis ? three : all;
}

std::string Fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string XmlEscape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SpiderAxes ComputeSpiderAxes(const std::vector<AggregateRow>& rows, SpiderMode mode) {
  SpiderAxes out;
  const auto& defs = AxisDefs(mode);
  for (const auto& d : defs) {
    out.axis_names.push_back(d.name);
    out.lower_is_better.push_back(d.lower_is_better);
  }
  for (const auto& r : rows) {
    SpiderSeries s;
    s.label = r.method + "/" + r.model + "/" + r.dataset;
    for (const auto& d : defs) s.raw.push_back(d.get(r));
    s.axes.assign(defs.size(), 0.0);
    out.series.push_back(std::move(s));
  }
  for (std::size_t a = 0; a < defs.size(); ++a) {
    std::optional<double> lo, hi;
    for (const auto& s : out.series) {
      if (!s.raw[a]) continue;
      lo = lo ? std::min(*lo, *s.raw[a]) : *s.raw[a];
      hi = hi ? std::max(*hi, *s.raw[a]) : *s.raw[a];
    }
    for (auto& s : out.series) {
      if (!s.raw[a]) continue;
      if (*hi == *lo) {
        s.axes[a] = 1.0;
      } else if (defs[a].lower_is_better) {
        s.axes[a] = (*hi - *s.raw[a]) / (*hi - *lo);
      } else {
        s.axes[a] = (*s.raw[a] - *lo) / (*hi - *lo);
      }
    }
  }
  return out;
}

nlohmann::json ToJson(const SpiderAxes& axes) {
  nlohmann::json j;
  j["axis_names"] = axes.axis_names;
  j["lower_is_better"] = axes.lower_is_better;
  j["series"] = nlohmann::json::array();
  for (const auto& s : axes.series) {
    nlohmann::json raw = nlohmann::json::array();
    for (const auto& v : s.raw) raw.push_back(OptJson(v));
    j["series"].push_back({{"label", s.label}, {"axes", s.axes}, {"raw", raw}});
  }
  return j;
}

std::string EmitSpiderSvg(const SpiderAxes& axes) {
  static constexpr const char* kColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                            "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  constexpr double kCx = 260, kCy = 230, kR = 150;
  const std::size_t n = axes.axis_names.size();
  auto point = [&](std::size_t i, double v) {
    const double angle = -std::numbers::pi / 2 + 2 * std::numbers::pi * i / n;
    return std::pair{kCx + kR * v * std::cos(angle), kCy + kR * v * std::sin(angle)};
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\""
      << 460 + 18 * axes.series.size() << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (double ring : {0.25, 0.5, 0.75, 1.0}) {
    svg << "<polygon fill=\"none\" stroke=\"#cccccc\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = point(i, ring);
      svg << (i ? " " : "") << Fixed(x, 3) << "," << Fixed(y, 3);
    }
    svg << "\"/>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, y] = point(i, 1.0);
    const auto [lx, ly] = point(i, 1.12);
    svg << "<line x1=\"" << Fixed(kCx, 3) << "\" y1=\"" << Fixed(kCy, 3) << "\" x2=\""
        << Fixed(x, 3) << "\" y2=\"" << Fixed(y, 3) << "\" stroke=\"#999999\"/>\n";
    svg << "<text x=\"" << Fixed(lx, 3) << "\" y=\"" << Fixed(ly, 3)
        << "\" text-anchor=\"middle\">" << XmlEscape(axes.axis_names[i])
        << (axes.lower_is_better[i] ? " (lower better)" : "") << "</text>\n";
  }
  for (std::size_t s = 0; s < axes.series.size(); ++s) {
    const auto& series = axes.series[s];
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = point(i, series.axes[i]);
      svg << (i ? " " : "") << Fixed(x, 3) << "," << Fixed(y, 3);
    }
    svg << "\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = point(i, series.axes[i]);
      svg << "<circle cx=\"" << Fixed(x, 3) << "\" cy=\"" << Fixed(y, 3) << "\" r=\"3\" fill=\""
          << color << "\"><title>" << XmlEscape(series.label) << " "
          << XmlEscape(axes.axis_names[i]) << " = "
          << (series.raw[i] ? FormatExact(*series.raw[i]) : std::string(kMissingCell))
          << "</title></circle>\n";
    }
    svg << "<text x=\"20\" y=\"" << 450 + 18 * s << "\" fill=\"" << color << "\">"
        << XmlEscape(series.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string EmitSpiderSvg(const BenchmarkReport& report, SpiderMode mode) {
  return EmitSpiderSvg(ComputeSpiderAxes(report.aggregates, mode));
}

namespace {

const std::vector<std::string>& MetricRowNames() {
  static const std::vector<std::string> names = {"Ins", "Del", "OA", "PG",
                                                 "EBPG", "Sparsity", "Time(s)"};
  return names;
}

std::vector<std::vector<std::string>> ParseCsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw Error(ErrorCode::kParseError, "unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double ParseCell(const std::string& cell) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) {
    throw Error(ErrorCode::kParseError, "bad numeric cell '" + cell + "'");
  }
  return v;
}

}  // namespace

std::string EmitTableCsv(const std::vector<AggregateRow>& rows) {
  std::string out;
  auto header = [&](const char* name, auto field) {
    out += name;
    for (const auto& r : rows) out += "," + CsvEscape(field(r));
    out += "\n";
  };
  header("dataset", [](const AggregateRow& r) { return r.dataset; });
  header("model", [](const AggregateRow& r) { return r.model; });
  header("method", [](const AggregateRow& r) { return r.method; });
  const auto& defs = AxisDefs(SpiderMode::kAllMetrics);
  for (const auto& name : MetricRowNames()) {
    const auto def = std::find_if(defs.begin(), defs.end(),
                                  [&](const AxisDef& d) { return d.name == name; });
    out += CsvEscape(name);
    for (const auto& r : rows) {
      const auto v = def->get(r);
      out += "," + (v ? FormatExact(*v) : std::string(kMissingCell));
    }
    out += "\n";
  }
  return out;
}

std::vector<AggregateRow> ParseTableCsv(const std::string& csv) {
  const auto table = ParseCsv(csv);
  const auto& names = MetricRowNames();
  if (table.size() != 3 + names.size()) {
    throw Error(ErrorCode::kParseError, "unexpected table row count");
  }
  const std::size_t cols = table[0].size();
  const char* headers[] = {"dataset", "model", "method"};
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].size() != cols) throw Error(ErrorCode::kParseError, "ragged table");
    const std::string expected = i < 3 ? headers[i] : names[i - 3];
    if (table[i][0] != expected) {
      throw Error(ErrorCode::kParseError, "expected row '" + expected + "'");
    }
  }
  std::vector<AggregateRow> rows(cols - 1);
  for (std::size_t c = 1; c < cols; ++c) {
    AggregateRow& r = rows[c - 1];
    r.dataset = table[0][c];
    r.model = table[1][c];
    r.method = table[2][c];
    auto num = [&](std::size_t row) { return ParseCell(table[row][c]); };
    r.ins = num(3);
    r.del = num(4);
    r.oa = num(5);
    r.pg = num(6);
    if (table[7][c] != kMissingCell) r.ebpg = num(7);
    r.sparsity = num(8);
    r.time_s = num(9);
  }
  return rows;
}

void WriteReportBundle(const std::filesystem::path& dir, const BenchmarkReport& report) {
  std::filesystem::create_directories(dir);
  WriteFileAtomic(dir / "report.json", ToJson(report).dump(2) + "\n");
  WriteFileAtomic(dir / "report.csv", EmitTableCsv(report.aggregates));
  WriteFileAtomic(dir / "spider_3axis.svg", EmitSpiderSvg(report, SpiderMode::kThreeAxis));
  WriteFileAtomic(dir / "spider_all.svg", EmitSpiderSvg(report, SpiderMode::kAllMetrics));
  WriteFileAtomic(dir / "config.json", report.config.dump(2) + "\n");
  std::string skips;
  for (const auto& s : report.skips) {
    skips += s.method + "\t" + s.model + "\t" + s.image_id + "\t" + s.instance_id + "\t" +
             s.reason + "\n";
  }
  WriteFileAtomic(dir / "skips.log", skips);
  std::string jsonl, csv = RecordCsvHeader() + "\n";
  for (const auto& r : report.records) {
    jsonl += ToJson(r).dump() + "\n";
    csv += RecordCsvRow(r) + "\n";
  }
  WriteFileAtomic(dir / "records.jsonl", jsonl);
  WriteFileAtomic(dir / "records.csv", csv);
}

}  // namespace odexai
