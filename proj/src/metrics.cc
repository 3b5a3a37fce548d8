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

#include "odexai/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "odexai/error.h"
#include "odexai/imageproc.h"
#include "odexai/table_format.h"

namespace odexai {

void MetricsConfig::Validate() const {
  if (steps < 2) throw Error(ErrorCode::kInvalidArgument, "steps must be >= 2");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0,1]");
  }
  if (!(blur_sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "blur_sigma must be positive");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
}

nlohmann::json ToJson(const MetricsConfig& cfg) {
  return {{"steps", cfg.steps},
          {"gamma", cfg.gamma},
          {"score_mode", cfg.score_mode == ScoreMode::kProbOnly ? "prob" : "prob_x_objectness"},
          {"insertion_baseline",
           cfg.insertion_baseline == InsertionBaseline::kBlur ? "blur" : "black"},
          {"blur_sigma", cfg.blur_sigma}};
}

MetricsConfig MetricsConfigFromJson(const nlohmann::json& j) {
  MetricsConfig cfg;
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be an object");
  try {
    if (j.contains("steps")) cfg.steps = j["steps"].get<int>();
    if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
    if (j.contains("score_mode")) {
      const auto m = j["score_mode"].get<std::string>();
      if (m == "prob") {
        cfg.score_mode = ScoreMode::kProbOnly;
      } else if (m == "prob_x_objectness") {
        cfg.score_mode = ScoreMode::kProbTimesObjectness;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown score_mode '" + m + "'");
      }
    }
    if (j.contains("insertion_baseline")) {
      const auto b = j["insertion_baseline"].get<std::string>();
      if (b == "blur") {
        cfg.insertion_baseline = InsertionBaseline::kBlur;
      } else if (b == "black") {
        cfg.insertion_baseline = InsertionBaseline::kBlack;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown insertion_baseline '" + b + "'");
      }
    }
    if (j.contains("blur_sigma")) cfg.blur_sigma = j["blur_sigma"].get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad metrics config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

nlohmann::json ToJson(const EvaluationRecord& r) {
  return {{"method", r.method},
          {"model", r.model},
          {"dataset", r.dataset},
          {"image_id", r.image_id},
          {"instance_id", r.instance_id},
          {"category", r.category},
          {"ins_auc", r.ins_auc},
          {"del_auc", r.del_auc},
          {"oa", r.oa},
          {"pg_hit", r.pg_hit},
          {"ebpg", r.ebpg ? nlohmann::json(*r.ebpg) : nlohmann::json(nullptr)},
          {"sparsity", r.sparsity},
          {"time_s", r.time_s}};
}

EvaluationRecord EvaluationRecordFromJson(const nlohmann::json& j) {
  try {
    EvaluationRecord r;
    r.method = j.at("method").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.instance_id = j.at("instance_id").get<std::string>();
    r.category = j.at("category").get<int>();
    r.ins_auc = j.at("ins_auc").get<double>();
    r.del_auc = j.at("del_auc").get<double>();
    r.oa = j.at("oa").get<double>();
    r.pg_hit = j.at("pg_hit").get<bool>();
    if (!j.at("ebpg").is_null()) r.ebpg = j.at("ebpg").get<double>();
    r.sparsity = j.at("sparsity").get<double>();
    r.time_s = j.at("time_s").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad evaluation record: ") + e.what());
  }
}

std::string RecordCsvHeader() {
  return "method,model,dataset,image_id,instance_id,category,Ins,Del,OA,PG,EBPG,"
         "Sparsity,Time(s)";
}

std::string RecordCsvRow(const EvaluationRecord& r) {
  std::string row;
  for (const std::string* s : {&r.method, &r.model, &r.dataset, &r.image_id, &r.instance_id}) {
    row += CsvEscape(*s) + ",";
  }
  row += std::to_string(r.category) + ",";
  row += FormatExact(r.ins_auc) + "," + FormatExact(r.del_auc) + "," + FormatExact(r.oa) +
         ",";
  row += std::string(r.pg_hit ? "1" : "0") + ",";
  row += (r.ebpg ? FormatExact(*r.ebpg) : std::string(kMissingCell)) + ",";
  row += FormatExact(r.sparsity) + "," + FormatExact(r.time_s);
  return row;
}

bool PointingGameHit(const SaliencyMap& map, const BBox& roi) {
  const auto& v = map.values();
  const double peak = *std::max_element(v.begin(), v.end());
  for (int row = 0; row < map.height(); ++row) {
    for (int col = 0; col < map.width(); ++col) {
      if (map.at(row, col) == peak && roi.ContainsPixel(row, col)) return true;
    }
  }
  return false;
}

double PgAccuracy(std::size_t hits, std::size_t misses) {
  if (hits + misses == 0) {
    throw Error(ErrorCode::kEmptySample, "pointing game needs at least one sample");
  }
  return static_cast<double>(hits) / static_cast<double>(hits + misses);
}

double Ebpg(const SaliencyMap& map, const BBox& roi) {
  double inside = 0.0, outside = 0.0;
  for (int row = 0; row < map.height(); ++row) {
    for (int col = 0; col < map.width(); ++col) {
      const double e = std::max(0.0, map.at(row, col));
      (roi.ContainsPixel(row, col) ? inside : outside) += e;
    }
  }
  const double total = inside + outside;
  if (total == 0.0) throw Error(ErrorCode::kZeroEnergy, "saliency map has zero energy");
  return std::clamp(inside / total, 0.0, 1.0);
}

double TargetScore(const std::vector<Detection>& detections, const Detection& target,
                   double gamma, ScoreMode mode) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must lie in (0,1]");
  }
  const std::size_t label = target.label();
  double best = 0.0;
  for (const auto& d : detections) {
    if (d.label() != label || d.class_probs().size() != target.class_probs().size()) continue;
    if (Iou(d.bbox(), target.bbox()) < gamma) continue;
    const double prob = d.class_probs()[label];
    best = std::max(best, mode == ScoreMode::kProbOnly ? prob : prob * d.objectness());
  }
  return best;
}

std::vector<std::size_t> RankPixels(const SaliencyMap& map) {
  std::vector<std::size_t> order(map.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& v = map.values();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return order;
}

namespace {

// Builds the image for step k: pixels order[0 .. count_k) come from `top`,
// the rest from `rest`.
ImageBuffer Compose(const ImageBuffer& top, const ImageBuffer& rest,
                    const std::vector<std::size_t>& order, std::size_t count) {
  std::vector<float> px = rest.pixels();
  const auto& src = top.pixels();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = order[i] * ImageBuffer::kChannels;
    for (int c = 0; c < ImageBuffer::kChannels; ++c) px[p + c] = src[p + c];
  }
  return ImageBuffer(rest.width(), rest.height(), std::move(px));
}

PerturbationCurve RunCurve(Detector& backend, const ImageBuffer& top,
                           const ImageBuffer& rest, const SaliencyMap& map,
                           const Detection& target, const MetricsConfig& cfg,
                           CurveDirection direction) {
  cfg.Validate();
  if (map.width() != top.width() || map.height() != top.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "saliency and image dims differ");
  }
  const std::vector<std::size_t> order = RankPixels(map);
  const std::size_t n = order.size();
  PerturbationCurve curve;
  curve.direction = direction;
  std::vector<ImageBuffer> batch;
  std::vector<int> batch_steps;
  auto flush = [&] {
    if (batch.empty()) return;
    const DetectionLists dets = backend.Detect(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      curve.points.push_back({static_cast<double>(batch_steps[i]) / cfg.steps,
                              TargetScore(dets[i], target, cfg.gamma, cfg.score_mode)});
    }
    batch.clear();
    batch_steps.clear();
  };
  for (int k = 0; k <= cfg.steps; ++k) {
    const std::size_t count = n * static_cast<std::size_t>(k) / static_cast<std::size_t>(cfg.steps);
    batch.push_back(Compose(top, rest, order, count));
    batch_steps.push_back(k);
    if (static_cast<int>(batch.size()) >= cfg.batch_size) flush();
  }
  flush();
  curve.auc = Auc(curve.points);
  return curve;
}

}  // namespace

PerturbationCurve DeletionCurve(Detector& backend, const ImageBuffer& image,
                                const SaliencyMap& map, const Detection& target,
                                const MetricsConfig& cfg) {
  // Removing the top-ranked pixels == the black canvas supplies them.
  const ImageBuffer black(image.width(), image.height());
  return RunCurve(backend, black, image, map, target, cfg, CurveDirection::kDeletion);
}

PerturbationCurve InsertionCurve(Detector& backend, const ImageBuffer& image,
                                 const SaliencyMap& map, const Detection& target,
                                 const MetricsConfig& cfg) {
  const ImageBuffer canvas = cfg.insertion_baseline == InsertionBaseline::kBlur
                                 ? GaussianBlur(image, cfg.blur_sigma)
                                 : ImageBuffer(image.width(), image.height());
  return RunCurve(backend, image, canvas, map, target, cfg, CurveDirection::kInsertion);
}

double Auc(const std::vector<CurvePoint>& points) {
  if (points.size() < 2 || points.front().fraction != 0.0 ||
      points.back().fraction != 1.0) {
    throw Error(ErrorCode::kBadDomain, "curve must span [0,1] with at least two points");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].fraction - points[i - 1].fraction;
    if (!(dx > 0.0)) {
      throw Error(ErrorCode::kBadDomain, "curve fractions must be strictly increasing");
    }
    area += dx * (points[i].score + points[i - 1].score) / 2.0;
  }
  return area;
}

double Overall(double ins_auc, double del_auc) { return ins_auc - del_auc; }

double Sparsity(const SaliencyMap& map) {
  const SaliencyMap normalized = MinMaxNormalize(map);
  const auto& v = normalized.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return 1.0 / mean;
}

EvaluationRecord EvaluateAll(Detector& backend, const ImageBuffer& image,
                             const ExplanationResult& explanation,
                             const Detection& target, const BBox& ground_truth_roi,
                             const MetricsConfig& cfg, const RecordLabels& labels) {
  const SaliencyMap& map = explanation.saliency;
  if (map.width() != image.width() || map.height() != image.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "saliency and image dims differ");
  }
  EvaluationRecord r;
  r.method = labels.method;
  r.model = labels.model;
  r.dataset = labels.dataset;
  r.image_id = labels.image_id;
  r.instance_id = labels.instance_id;
  r.category = labels.category;
  r.del_auc = DeletionCurve(backend, image, map, target, cfg).auc;
  r.ins_auc = InsertionCurve(backend, image, map, target, cfg).auc;
  r.oa = Overall(r.ins_auc, r.del_auc);
  r.pg_hit = PointingGameHit(map, ground_truth_roi);
  try {
    r.ebpg = Ebpg(map, ground_truth_roi);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroEnergy) throw;
  }
  r.sparsity = Sparsity(map);
  r.time_s = explanation.elapsed_s;
  return r;
}

}  // namespace odexai
