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

#ifndef ODEXAI_HARNESS_H_
#define ODEXAI_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "odexai/core.h"
#include "odexai/detectors.h"
#include "odexai/explainers.h"
#include "odexai/metrics.h"

namespace odexai {

struct ImageEntry {
  std::string image_id;
  std::filesystem::path path;
  int width = 0;
  int height = 0;
};

struct DatasetIndex {
  std::string name;
  std::vector<ImageEntry> images;
  std::map<std::string, std::vector<GroundTruthInstance>> annotations;
  std::map<int, std::string> categories;

  // nullptr when absent.
  const ImageEntry* FindImage(const std::string& image_id) const;
};

// COCO instance annotations. Boxes [x, y, w, h] become corner form and
// iscrowd maps to GroundTruthInstance::difficult. Throws kParseError on
// malformed input and kMissingImage when a listed image file is absent.
DatasetIndex LoadCoco(const std::filesystem::path& annotation_file,
                      const std::filesystem::path& image_dir);

// One XML file per image, read from <dir>/Annotations when that exists and
// from <dir> otherwise. Images resolve to <dir>/JPEGImages/<filename> or
// <dir>/<filename>. Category ids are assigned in sorted name order.
DatasetIndex LoadVoc(const std::filesystem::path& dataset_dir);

// A single axis-aligned colour blob on a smooth grey background, drawn
// deterministically from `seed`. label indexes the synthetic classes.
struct BlobSample {
  ImageBuffer image;
  BBox bbox;
  int label;
};
BlobSample MakeBlobSample(std::uint64_t seed, int width = 64, int height = 64);

// Writes <dir>/images/blob_NNN.png plus <dir>/annotations.json (COCO form)
// and returns the annotation path.
std::filesystem::path WriteBlobDataset(const std::filesystem::path& dir, int count,
                                       std::uint64_t seed, int width = 64,
                                       int height = 64);

struct NamedBackend {
  std::string name;
  Detector* detector = nullptr;
};

struct BenchmarkConfig {
  ExplainerConfig explainer;  // method is overridden per run
  MetricsConfig metrics;
  std::size_t sample_limit = std::numeric_limits<std::size_t>::max();
  int workers = 1;
};

nlohmann::json ToJson(const BenchmarkConfig& cfg);

struct SkipEntry {
  std::string method;
  std::string model;
  std::string image_id;
  std::string instance_id;
  std::string reason;

  friend bool operator==(const SkipEntry&, const SkipEntry&) = default;
};

// Per (method, model, dataset) means. pg and ebpg average per category
// first; the *_record fields are plain means over records.
struct AggregateRow {
  std::string method;
  std::string model;
  std::string dataset;
  std::size_t count = 0;
  double ins = 0.0;
  double del = 0.0;
  double oa = 0.0;
  double pg = 0.0;
  double pg_record = 0.0;
  std::optional<double> ebpg;
  std::optional<double> ebpg_record;
  double sparsity = 0.0;
  double time_s = 0.0;

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct BenchmarkReport {
  nlohmann::json config;
  std::vector<EvaluationRecord> records;
  std::vector<SkipEntry> skips;
  std::vector<AggregateRow> aggregates;

  friend bool operator==(const BenchmarkReport&, const BenchmarkReport&) = default;
};

using ProgressFn = std::function<void(double)>;

// Instances are visited in (image_id, instance_id) order and truncated at
// cfg.sample_limit. Records come back in (backend, method, instance) order
// regardless of cfg.workers.
BenchmarkReport RunBenchmark(const DatasetIndex& index,
                             const std::vector<NamedBackend>& backends,
                             const std::vector<Method>& methods,
                             const BenchmarkConfig& cfg,
                             const ProgressFn& progress = {});

// Groups sorted by (method, model, dataset). Throws kEmptyGroup on empty
// input. Independent of record order.
std::vector<AggregateRow> Aggregate(const std::vector<EvaluationRecord>& records);

nlohmann::json ToJson(const AggregateRow& row);
AggregateRow AggregateRowFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const BenchmarkReport& report);
BenchmarkReport BenchmarkReportFromJson(const nlohmann::json& j);

enum class SpiderMode {
  kThreeAxis,   // OA, EBPG, Sparsity
  kAllMetrics,  // OA, Ins, Del, PG, EBPG, Sparsity, Time
};

struct SpiderSeries {
  std::string label;
  std::vector<double> axes;                // normalized, in [0,1]
  std::vector<std::optional<double>> raw;  // unnormalized metric values
};

struct SpiderAxes {
  std::vector<std::string> axis_names;
  std::vector<bool> lower_is_better;
  std::vector<SpiderSeries> series;
};

// Per axis v' = (v - worst) / (best - worst); an axis on which all series
// agree is 1 for everyone; a missing value is 0.
SpiderAxes ComputeSpiderAxes(const std::vector<AggregateRow>& rows, SpiderMode mode);
nlohmann::json ToJson(const SpiderAxes& axes);
std::string EmitSpiderSvg(const SpiderAxes& axes);
std::string EmitSpiderSvg(const BenchmarkReport& report, SpiderMode mode);

// Metric rows (Ins, Del, OA, PG, EBPG, Sparsity, Time(s)) by one column per
// aggregate, preceded by dataset/model/method header rows. Missing values
// print as kMissingCell; PG and EBPG are fractions.
std::string EmitTableCsv(const std::vector<AggregateRow>& rows);
// Inverse of EmitTableCsv for the fields it carries (count and the
// record-level alternatives are left at their defaults).
std::vector<AggregateRow> ParseTableCsv(const std::string& csv);

// report.json, report.csv, spider_3axis.svg, spider_all.svg, skips.log,
// config.json, records.jsonl and records.csv.
void WriteReportBundle(const std::filesystem::path& dir, const BenchmarkReport& report);

}  // namespace odexai

#endif  // ODEXAI_HARNESS_H_
