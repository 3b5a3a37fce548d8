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

#ifndef ODEXAI_EXPLAINERS_H_
#define ODEXAI_EXPLAINERS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "odexai/core.h"
#include "odexai/detectors.h"
#include "odexai/imageproc.h"
#include "odexai/whitebox.h"

namespace odexai {

enum class Method { kDrise, kDclose, kGcame };

std::string_view MethodName(Method method);  // "drise" | "dclose" | "gcame"
Method ParseMethod(std::string_view name);   // case-insensitive, '-' ignored

enum class FusionRule {
  kRunningAverage,  // F = (F_prev + level) / 2, finest level first
  kMean,            // equal-weight mean of normalized level maps
};

struct TargetSpec {
  Detection detection;
  std::string image_id;
};

struct ExplainerConfig {
  Method method = Method::kDrise;
  int n_masks = 2000;
  int rise_grid = 16;
  double rise_p = 0.5;
  std::vector<int> dclose_levels = {50, 150, 300, 600};
  double dclose_keep_p = 0.5;
  FusionRule dclose_fusion = FusionRule::kRunningAverage;
  double slic_compactness = 10.0;
  double gamma_iou = 0.5;
  double gcame_sigma_scale = 0.25;
  std::string gcame_layer;
  std::uint64_t rng_seed = 0;
  // Masked images sent to the backend per call.
  int batch_size = 64;

  // Throws kInvalidArgument when an invariant is violated.
  void Validate() const;
};

nlohmann::json ToJson(const ExplainerConfig& cfg);
ExplainerConfig ExplainerConfigFromJson(const nlohmann::json& j);
// sha256 of the canonical JSON form.
std::string ConfigDigest(const ExplainerConfig& cfg);

struct ExplanationResult {
  SaliencyMap saliency;
  double elapsed_s = 0.0;
  Method method = Method::kDrise;
  std::string config_digest;
};

// Counter-based RISE masks: a grid x grid Bernoulli(p) pattern per mask,
// bilinearly upsampled to (out_w + cell_w, out_h + cell_h) and cropped at a
// random shift in [0, cell) per axis.
MaskGrid RiseMask(std::uint64_t seed, std::uint64_t index, int grid, double p,
                  int out_w, int out_h);
std::vector<MaskGrid> GenerateRiseMasks(std::uint64_t seed, int n, int grid,
                                        double p, int out_w, int out_h);

// iou * max(0, cosine) * proposal objectness; zero-norm probability vectors
// contribute a factor of 0.
double DriseSimilarity(const Detection& target, const Detection& proposal);

// Max similarity over proposals, 0 for an empty list.
double BestSimilarity(const Detection& target, const std::vector<Detection>& proposals);

ExplanationResult ExplainDrise(Detector& backend, const ImageBuffer& image,
                               const TargetSpec& target, const ExplainerConfig& cfg);

// Keep-mask for one D-CLOSE sample: each segment kept with probability
// cfg.dclose_keep_p, keyed by (seed, level index, mask index, segment).
MaskGrid SegmentMask(const SegmentLabelMap& segments, std::uint64_t seed,
                     std::uint64_t level_index, std::uint64_t mask_index,
                     double keep_p);

ExplanationResult ExplainDclose(Detector& backend, const ImageBuffer& image,
                                const TargetSpec& target, const ExplainerConfig& cfg);

// (1 / 2 pi sigma^2) exp(-(dx^2 + dy^2) / 2 sigma^2).
double GaussianValue(double dx, double dy, double sigma);

// Kernel sampled at cell centres (col + 0.5, row + 0.5) of a w x h grid.
std::vector<double> GaussianKernel(double center_x, double center_y, double sigma,
                                   int w, int h);

// Throws kCaptureMismatch when the target centre maps outside the feature
// grid.
ExplanationResult ExplainGcame(const WhiteBoxCapture& capture, int image_width,
                               int image_height, const TargetSpec& target,
                               const ExplainerConfig& cfg);

// Dispatches on cfg.method. G-CAME obtains its capture from backend.Capture
// using the target's index in the backend's detections on `image`.
ExplanationResult Explain(Detector& backend, const ImageBuffer& image,
                          const TargetSpec& target, std::size_t target_index,
                          const ExplainerConfig& cfg);

// Writes <stem>.pgm (16-bit) and <stem>.json next to each other.
void SaveExplanation(const std::filesystem::path& dir, const std::string& stem,
                     const ExplanationResult& result, const TargetSpec& target);
nlohmann::json ExplanationSidecar(const ExplanationResult& result,
                                  const TargetSpec& target);

}  // namespace odexai

#endif  // ODEXAI_EXPLAINERS_H_
