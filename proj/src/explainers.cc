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

#include "odexai/explainers.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cctype>
#include <numbers>

#include "odexai/error.h"
#include "odexai/image_io.h"
#include "odexai/rng.h"

namespace odexai {
namespace {

using Clock = std::chrono::steady_clock;

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Sends masked copies of `image` to the backend in batches and returns one
// weight per mask. `make_mask(i)` must be a pure function of i. `on_batch`
// sees each batch's masks and weights in index order.
template <typename MakeMask, typename OnBatch>
void WeighMasks(Detector& backend, const ImageBuffer& image, const Detection& target,
                int n, int batch_size, MakeMask make_mask, OnBatch on_batch) {
  const ImageBuffer black(image.width(), image.height());
  const int batch = std::max(batch_size, 1);
  std::vector<MaskGrid> masks;
  std::vector<ImageBuffer> masked;
  for (int begin = 0; begin < n; begin += batch) {
    const int end = std::min(n, begin + batch);
    masks.clear();
    masked.clear();
    for (int i = begin; i < end; ++i) {
      masks.push_back(make_mask(i));
      masked.push_back(ApplyMask(image, masks.back(), black));
    }
    const DetectionLists detections = backend.Detect(masked);
    std::vector<double> weights(masks.size());
    for (std::size_t k = 0; k < masks.size(); ++k) {
      weights[k] = BestSimilarity(target, detections[k]);
    }
    on_batch(masks, weights);
  }
}

void CheckImage(const ImageBuffer& image) {
  if (image.width() <= 0 || image.height() <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty image");
  }
}

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kDrise: return "drise";
    case Method::kDclose: return "dclose";
    case Method::kGcame: return "gcame";
  }
  return "unknown";
}

Method ParseMethod(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "drise") return Method::kDrise;
  if (key == "dclose") return Method::kDclose;
  if (key == "gcame") return Method::kGcame;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(name) + "'");
}

void ExplainerConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, what);
  };
  if (n_masks < 1) fail("n_masks must be >= 1");
  if (rise_grid < 2) fail("rise_grid must be >= 2");
  if (!(rise_p >= 0.0 && rise_p <= 1.0)) fail("rise_p must lie in [0,1]");
  if (dclose_levels.empty()) fail("dclose_levels must be nonempty");
  for (std::size_t i = 0; i < dclose_levels.size(); ++i) {
    if (dclose_levels[i] < 1) fail("dclose_levels must be positive");
    if (i > 0 && dclose_levels[i] <= dclose_levels[i - 1]) {
      fail("dclose_levels must be strictly increasing");
    }
  }
  if (!(dclose_keep_p > 0.0 && dclose_keep_p < 1.0)) fail("dclose_keep_p must lie in (0,1)");
  if (!(slic_compactness > 0.0)) fail("slic_compactness must be positive");
  if (!(gamma_iou > 0.0 && gamma_iou <= 1.0)) fail("gamma_iou must lie in (0,1]");
  if (!(gcame_sigma_scale > 0.0)) fail("gcame_sigma_scale must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
}

nlohmann::json ToJson(const ExplainerConfig& cfg) {
  return {
      {"method", MethodName(cfg.method)},
      {"n_masks", cfg.n_masks},
      {"rise_grid", cfg.rise_grid},
      {"rise_p", cfg.rise_p},
      {"dclose_levels", cfg.dclose_levels},
      {"dclose_keep_p", cfg.dclose_keep_p},
      {"dclose_fusion",
       cfg.dclose_fusion == FusionRule::kRunningAverage ? "running_average" : "mean"},
      {"slic_compactness", cfg.slic_compactness},
      {"gamma_iou", cfg.gamma_iou},
      {"gcame_sigma_scale", cfg.gcame_sigma_scale},
      {"gcame_layer", cfg.gcame_layer},
      {"rng_seed", cfg.rng_seed},
  };
}

ExplainerConfig ExplainerConfigFromJson(const nlohmann::json& j) {
  ExplainerConfig cfg;
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be an object");
  try {
    if (j.contains("method")) cfg.method = ParseMethod(j["method"].get<std::string>());
    if (j.contains("n_masks")) cfg.n_masks = j["n_masks"].get<int>();
    if (j.contains("rise_grid")) cfg.rise_grid = j["rise_grid"].get<int>();
    if (j.contains("rise_p")) cfg.rise_p = j["rise_p"].get<double>();
    if (j.contains("dclose_levels")) cfg.dclose_levels = j["dclose_levels"].get<std::vector<int>>();
    if (j.contains("dclose_keep_p")) cfg.dclose_keep_p = j["dclose_keep_p"].get<double>();
    if (j.contains("dclose_fusion")) {
      const auto f = j["dclose_fusion"].get<std::string>();
      if (f == "running_average") {
        cfg.dclose_fusion = FusionRule::kRunningAverage;
      } else if (f == "mean") {
        cfg.dclose_fusion = FusionRule::kMean;
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown dclose_fusion '" + f + "'");
      }
    }
    if (j.contains("slic_compactness")) cfg.slic_compactness = j["slic_compactness"].get<double>();
    if (j.contains("gamma_iou")) cfg.gamma_iou = j["gamma_iou"].get<double>();
    if (j.contains("gcame_sigma_scale")) cfg.gcame_sigma_scale = j["gcame_sigma_scale"].get<double>();
    if (j.contains("gcame_layer")) cfg.gcame_layer = j["gcame_layer"].get<std::string>();
    if (j.contains("rng_seed")) cfg.rng_seed = j["rng_seed"].get<std::uint64_t>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

std::string ConfigDigest(const ExplainerConfig& cfg) {
  return Sha256Hex(ToJson(cfg).dump());
}

// ---------------------------------------------------------------------------
// D-RISE

MaskGrid RiseMask(std::uint64_t seed, std::uint64_t index, int grid, double p,
                  int out_w, int out_h) {
  if (grid < 2) throw Error(ErrorCode::kInvalidArgument, "grid must be >= 2");
  const CounterRng rng(seed);
  std::vector<float> cells(static_cast<std::size_t>(grid) * grid);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cells[c] = rng.Uniform({index, 0, c}) < p ? 1.0f : 0.0f;
  }
  const int cell_w = (out_w + grid - 1) / grid;
  const int cell_h = (out_h + grid - 1) / grid;
  const double shift_x = rng.Uniform({index, 1, 0}) * cell_w;
  const double shift_y = rng.Uniform({index, 1, 1}) * cell_h;
  return UpsampleAndCrop(MaskGrid(grid, grid, std::move(cells)), out_w + cell_w,
                         out_h + cell_h, out_w, out_h, shift_x, shift_y);
}

std::vector<MaskGrid> GenerateRiseMasks(std::uint64_t seed, int n, int grid, double p,
                                        int out_w, int out_h) {
  std::vector<MaskGrid> masks;
  masks.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) masks.push_back(RiseMask(seed, i, grid, p, out_w, out_h));
  return masks;
}

double DriseSimilarity(const Detection& target, const Detection& proposal) {
  if (target.class_probs().size() != proposal.class_probs().size()) {
    throw Error(ErrorCode::kInvalidArgument, "class vectors differ in length");
  }
  const double iou = Iou(target.bbox(), proposal.bbox());
  if (iou == 0.0) return 0.0;
  double cosine = 0.0;
  try {
    cosine = CosineSim(target.class_probs(), proposal.class_probs());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroVector) throw;
  }
  return iou * std::max(0.0, cosine) * proposal.objectness();
}

double BestSimilarity(const Detection& target, const std::vector<Detection>& proposals) {
  double best = 0.0;
  for (const auto& p : proposals) best = std::max(best, DriseSimilarity(target, p));
  return best;
}

ExplanationResult ExplainDrise(Detector& backend, const ImageBuffer& image,
                               const TargetSpec& target, const ExplainerConfig& cfg) {
  cfg.Validate();
  if (cfg.method != Method::kDrise) {
    throw Error(ErrorCode::kInvalidArgument, "config method is not D-RISE");
  }
  CheckImage(image);
  const auto start = Clock::now();
  const int w = image.width(), h = image.height();
  std::vector<double> acc(image.pixel_count(), 0.0);
  WeighMasks(
      backend, image, target.detection, cfg.n_masks, cfg.batch_size,
      [&](int i) { return RiseMask(cfg.rng_seed, i, cfg.rise_grid, cfg.rise_p, w, h); },
      [&](const std::vector<MaskGrid>& masks, const std::vector<double>& weights) {
        for (std::size_t k = 0; k < masks.size(); ++k) {
          if (weights[k] == 0.0) continue;
          const auto& m = masks[k].values();
          for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += weights[k] * m[p];
        }
      });
  SaliencyMap saliency = MinMaxNormalize(SaliencyMap(w, h, std::move(acc)));
  return {std::move(saliency), SecondsSince(start), Method::kDrise, ConfigDigest(cfg)};
}

// ---------------------------------------------------------------------------
// D-CLOSE

MaskGrid SegmentMask(const SegmentLabelMap& segments, std::uint64_t seed,
                     std::uint64_t level_index, std::uint64_t mask_index,
                     double keep_p) {
  const CounterRng rng(seed);
  std::vector<float> keep(static_cast<std::size_t>(segments.segment_count()));
  for (std::size_t s = 0; s < keep.size(); ++s) {
    keep[s] = rng.Uniform({level_index, mask_index, s}) < keep_p ? 1.0f : 0.0f;
  }
  std::vector<float> values(segments.labels().size());
  for (std::size_t p = 0; p < values.size(); ++p) values[p] = keep[segments.labels()[p]];
  return MaskGrid(segments.width(), segments.height(), std::move(values));
}

ExplanationResult ExplainDclose(Detector& backend, const ImageBuffer& image,
                                const TargetSpec& target, const ExplainerConfig& cfg) {
  cfg.Validate();
  if (cfg.method != Method::kDclose) {
    throw Error(ErrorCode::kInvalidArgument, "config method is not D-CLOSE");
  }
  CheckImage(image);
  const auto start = Clock::now();
  const int w = image.width(), h = image.height();
  const std::size_t n_levels = cfg.dclose_levels.size();
  const int per_level = std::max(1, cfg.n_masks / static_cast<int>(n_levels));

  std::vector<SaliencyMap> level_maps;
  for (std::size_t li = 0; li < n_levels; ++li) {
    const SegmentLabelMap segments =
        SlicSegment(image, cfg.dclose_levels[li], {cfg.slic_compactness, 10});
    std::vector<double> weighted(image.pixel_count(), 0.0);
    std::vector<double> density(image.pixel_count(), 0.0);
    WeighMasks(
        backend, image, target.detection, per_level, cfg.batch_size,
        [&](int i) { return SegmentMask(segments, cfg.rng_seed, li, i, cfg.dclose_keep_p); },
        [&](const std::vector<MaskGrid>& masks, const std::vector<double>& weights) {
          for (std::size_t k = 0; k < masks.size(); ++k) {
            const auto& m = masks[k].values();
            for (std::size_t p = 0; p < m.size(); ++p) {
              density[p] += m[p];
              weighted[p] += weights[k] * m[p];
            }
          }
        });
    for (std::size_t p = 0; p < weighted.size(); ++p) {
      weighted[p] = density[p] > 0.0 ? weighted[p] / density[p] : 0.0;
    }
    level_maps.push_back(MinMaxNormalize(SaliencyMap(w, h, std::move(weighted))));
  }

  // Levels are listed coarse to fine (increasing segment count); fuse from the
  // finest one outwards.
  std::vector<double> fused = level_maps.back().values();
  if (cfg.dclose_fusion == FusionRule::kRunningAverage) {
    for (std::size_t li = n_levels - 1; li-- > 0;) {
      const auto& level = level_maps[li].values();
      for (std::size_t p = 0; p < fused.size(); ++p) fused[p] = (fused[p] + level[p]) / 2.0;
    }
  } else {
    for (std::size_t li = n_levels - 1; li-- > 0;) {
      const auto& level = level_maps[li].values();
      for (std::size_t p = 0; p < fused.size(); ++p) fused[p] += level[p];
    }
    for (double& v : fused) v /= static_cast<double>(n_levels);
  }
  SaliencyMap saliency = MinMaxNormalize(SaliencyMap(w, h, std::move(fused)));
  return {std::move(saliency), SecondsSince(start), Method::kDclose, ConfigDigest(cfg)};
}

// ---------------------------------------------------------------------------
// G-CAME

double GaussianValue(double dx, double dy, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  const double s2 = sigma * sigma;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
}

std::vector<double> GaussianKernel(double center_x, double center_y, double sigma,
                                   int w, int h) {
  std::vector<double> k(static_cast<std::size_t>(w) * h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      k[static_cast<std::size_t>(i) * w + j] =
          GaussianValue(j + 0.5 - center_x, i + 0.5 - center_y, sigma);
    }
  }
  return k;
}

ExplanationResult ExplainGcame(const WhiteBoxCapture& capture, int image_width,
                               int image_height, const TargetSpec& target,
                               const ExplainerConfig& cfg) {
  cfg.Validate();
  if (cfg.method != Method::kGcame) {
    throw Error(ErrorCode::kInvalidArgument, "config method is not G-CAME");
  }
  if (image_width <= 0 || image_height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image dims must be positive");
  }
  const auto start = Clock::now();
  const int fw = capture.width(), fh = capture.height();
  const double cx = capture.center_x() / capture.stride();
  const double cy = capture.center_y() / capture.stride();
  if (!(cx >= 0.0 && cx < fw && cy >= 0.0 && cy < fh)) {
    throw Error(ErrorCode::kCaptureMismatch,
                "target centre falls outside the feature grid");
  }
  const BBox& box = target.detection.bbox();
  const double sigma =
      cfg.gcame_sigma_scale * std::max(box.width(), box.height()) / capture.stride();
  const std::vector<double> kernel = GaussianKernel(cx, cy, sigma, fw, fh);

  const std::size_t plane = static_cast<std::size_t>(fw) * fh;
  std::vector<double> positive(plane, 0.0), negative(plane, 0.0);
  for (int k = 0; k < capture.channels(); ++k) {
    const auto grad = capture.gradient(k);
    double alpha = 0.0;
    for (float g : grad) alpha += g;
    alpha /= static_cast<double>(plane);
    const auto feat = capture.feature(k);
    auto& sink = alpha >= 0.0 ? positive : negative;
    const double weight = std::abs(alpha);
    for (std::size_t p = 0; p < plane; ++p) sink[p] += kernel[p] * weight * feat[p];
  }
  std::vector<double> cam(plane);
  for (std::size_t p = 0; p < plane; ++p) cam[p] = std::max(0.0, positive[p] - negative[p]);

  std::vector<double> upsampled = ResizeBilinear(cam, fw, fh, image_width, image_height);
  SaliencyMap saliency =
      MinMaxNormalize(SaliencyMap(image_width, image_height, std::move(upsampled)));
  return {std::move(saliency), SecondsSince(start), Method::kGcame, ConfigDigest(cfg)};
}

ExplanationResult Explain(Detector& backend, const ImageBuffer& image,
                          const TargetSpec& target, std::size_t target_index,
                          const ExplainerConfig& cfg) {
  switch (cfg.method) {
    case Method::kDrise:
      return ExplainDrise(backend, image, target, cfg);
    case Method::kDclose:
      return ExplainDclose(backend, image, target, cfg);
    case Method::kGcame: {
      const auto start = Clock::now();
      const WhiteBoxCapture capture = backend.Capture(image, cfg.gcame_layer, target_index);
      ExplanationResult result =
          ExplainGcame(capture, image.width(), image.height(), target, cfg);
      // Runtime covers the capture round trip as well as the map itself.
      result.elapsed_s = SecondsSince(start);
      return result;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method");
}

nlohmann::json ExplanationSidecar(const ExplanationResult& result,
                                  const TargetSpec& target) {
  const BBox& b = target.detection.bbox();
  return {{"method", MethodName(result.method)},
          {"config_digest", result.config_digest},
          {"elapsed_s", result.elapsed_s},
          {"image_id", target.image_id},
          {"target_bbox", {b.x1(), b.y1(), b.x2(), b.y2()}},
          {"target_label", target.detection.label()},
          {"width", result.saliency.width()},
          {"height", result.saliency.height()}};
}

void SaveExplanation(const std::filesystem::path& dir, const std::string& stem,
                     const ExplanationResult& result, const TargetSpec& target) {
  WriteFileAtomic(dir / (stem + ".pgm"), EncodePgm16(result.saliency));
  WriteFileAtomic(dir / (stem + ".json"), ExplanationSidecar(result, target).dump(2));
}

}  // namespace odexai
