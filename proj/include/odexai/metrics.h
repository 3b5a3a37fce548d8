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

#ifndef ODEXAI_METRICS_H_
#define ODEXAI_METRICS_H_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "odexai/core.h"
#include "odexai/detectors.h"
#include "odexai/explainers.h"

namespace odexai {

enum class CurveDirection { kDeletion, kInsertion };

struct CurvePoint {
  double fraction;
  double score;
};

struct PerturbationCurve {
  std::vector<CurvePoint> points;
  double auc = 0.0;
  CurveDirection direction = CurveDirection::kDeletion;
};

enum class ScoreMode {
  kProbTimesObjectness,  // class probability x objectness
  kProbOnly,
};

enum class InsertionBaseline { kBlack, kBlur };

struct MetricsConfig {
  int steps = 100;
  double gamma = 0.5;
  ScoreMode score_mode = ScoreMode::kProbTimesObjectness;
  InsertionBaseline insertion_baseline = InsertionBaseline::kBlack;
  double blur_sigma = 5.0;
  // Perturbed images sent to the backend per call.
  int batch_size = 64;

  void Validate() const;
};

nlohmann::json ToJson(const MetricsConfig& cfg);
MetricsConfig MetricsConfigFromJson(const nlohmann::json& j);

// One Table-1 cell group: the seven metric values for a single
// (method, model, dataset, image, target) tuple.
struct EvaluationRecord {
  std::string method;
  std::string model;
  std::string dataset;
  std::string image_id;
  std::string instance_id;
  int category = 0;
  double ins_auc = 0.0;
  double del_auc = 0.0;
  double oa = 0.0;
  bool pg_hit = false;
  std::optional<double> ebpg;  // absent when the map has zero energy
  double sparsity = 1.0;
  double time_s = 0.0;

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

nlohmann::json ToJson(const EvaluationRecord& record);
EvaluationRecord EvaluationRecordFromJson(const nlohmann::json& j);
// Column order of RecordCsvRow.
std::string RecordCsvHeader();
std::string RecordCsvRow(const EvaluationRecord& record);

// True iff any pixel attaining the global maximum lies inside roi
// (pixel-centre rule).
bool PointingGameHit(const SaliencyMap& map, const BBox& roi);

// hits / (hits + misses); throws kEmptySample when both are zero.
double PgAccuracy(std::size_t hits, std::size_t misses);

// Energy inside roi over total energy, negatives clamped to 0. Throws
// kZeroEnergy when the clamped map sums to 0.
double Ebpg(const SaliencyMap& map, const BBox& roi);

// Best score among detections that share the target's argmax class and
// overlap it with IoU >= gamma; 0 when none qualifies.
double TargetScore(const std::vector<Detection>& detections, const Detection& target,
                   double gamma, ScoreMode mode = ScoreMode::kProbTimesObjectness);

// Pixel indices sorted by saliency descending, ties by row-major index.
std::vector<std::size_t> RankPixels(const SaliencyMap& map);

PerturbationCurve DeletionCurve(Detector& backend, const ImageBuffer& image,
                                const SaliencyMap& map, const Detection& target,
                                const MetricsConfig& cfg);
PerturbationCurve InsertionCurve(Detector& backend, const ImageBuffer& image,
                                 const SaliencyMap& map, const Detection& target,
                                 const MetricsConfig& cfg);

// Trapezoid rule. Throws kBadDomain unless x is strictly increasing from 0
// to 1.
double Auc(const std::vector<CurvePoint>& points);

double Overall(double ins_auc, double del_auc);

// 1 / mean(min-max normalized map); constant maps give 1.
double Sparsity(const SaliencyMap& map);

struct RecordLabels {
  std::string method;
  std::string model;
  std::string dataset;
  std::string image_id;
  std::string instance_id;
  int category = 0;
};

// Computes all seven metrics. EBPG is left empty on zero energy.
EvaluationRecord EvaluateAll(Detector& backend, const ImageBuffer& image,
                             const ExplanationResult& explanation,
                             const Detection& target, const BBox& ground_truth_roi,
                             const MetricsConfig& cfg, const RecordLabels& labels);

}  // namespace odexai

#endif  // ODEXAI_METRICS_H_
