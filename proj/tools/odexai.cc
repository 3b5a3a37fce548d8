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

// Command-line front end: benchmark runs, single explanations, evaluation of
// external saliency maps, the REST service and a synthetic protocol backend.

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "odexai/detectors.h"
#include "odexai/error.h"
#include "odexai/explainers.h"
#include "odexai/harness.h"
#include "odexai/image_io.h"
#include "odexai/metrics.h"
#include "odexai/service.h"
#include "odexai/wire_protocol.h"

namespace fs = std::filesystem;
using namespace odexai;

namespace {

std::vector<std::string> SplitComma(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "name=spec" or a bare spec (named after its scheme).
std::pair<std::string, std::string> SplitBackend(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq != std::string::npos && arg.find(':') > eq) return {arg.substr(0, eq), arg.substr(eq + 1)};
  const auto colon = arg.find(':');
  return {colon == std::string::npos ? arg : arg.substr(0, colon), arg};
}

// Picks the detection to explain: the explicit index, or the highest scoring
// one when the index is negative.
std::size_t PickTarget(const std::vector<Detection>& dets, long index) {
  if (dets.empty()) throw Error(ErrorCode::kNotFound, "the backend found no objects");
  if (index >= 0) {
    if (static_cast<std::size_t>(index) >= dets.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "target index " + std::to_string(index) + " out of range (" +
                      std::to_string(dets.size()) + " detections)");
    }
    return static_cast<std::size_t>(index);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < dets.size(); ++i) {
    const auto score = [&](std::size_t k) {
      return dets[k].objectness() * dets[k].class_probs()[dets[k].label()];
    };
    if (score(i) > score(best)) best = i;
  }
  return best;
}

BBox ParseRoi(const std::string& text) {
  const auto parts = SplitComma(text);
  if (parts.size() != 4) throw Error(ErrorCode::kInvalidArgument, "--roi needs x1,y1,x2,y2");
  return BBox(std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]),
              std::stod(parts[3]));
}

Service* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"odexai: explain object detectors and score the explanations"};
  app.require_subcommand(1);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a dataset benchmark and write a report bundle");
  std::string b_dataset = "coco", b_ann, b_images, b_methods = "drise,dclose,gcame", b_out;
  std::vector<std::string> b_backends;
  int b_masks = 2000, b_steps = 100, b_workers = 1;
  double b_gamma = 0.5;
  std::uint64_t b_seed = 0;
  std::size_t b_limit = 0, b_pool = 1;
  bench->add_option("--dataset", b_dataset, "coco or voc")->check(CLI::IsMember({"coco", "voc"}));
  bench->add_option("--ann", b_ann, "COCO annotation JSON or VOC directory")->required();
  bench->add_option("--images", b_images, "COCO image directory");
  bench->add_option("--backend", b_backends, "Backend spec, optionally name=spec; repeatable")
      ->required();
  bench->add_option("--methods", b_methods, "Comma-separated explainers");
  bench->add_option("--masks", b_masks, "Masks per explanation");
  bench->add_option("--steps", b_steps, "Deletion/insertion steps");
  bench->add_option("--gamma", b_gamma, "IoU threshold for target matching");
  bench->add_option("--seed", b_seed, "RNG seed");
  bench->add_option("--limit", b_limit, "Maximum number of instances (0 = all)");
  bench->add_option("--workers", b_workers, "Concurrent records");
  bench->add_option("--pool", b_pool, "Backend instances per backend");
  bench->add_option("--out", b_out, "Report directory")->required();

  // explain
  auto* explain = app.add_subcommand("explain", "Explain one detection in one image");
  std::string e_image, e_backend = "synthetic", e_method = "drise", e_out;
  long e_index = -1;
  int e_masks = 2000;
  std::uint64_t e_seed = 0;
  explain->add_option("--image", e_image, "PNG image")->required();
  explain->add_option("--backend", e_backend, "Backend spec");
  explain->add_option("--method", e_method, "drise, dclose or gcame");
  explain->add_option("--target-index", e_index, "Detection index (default: best scoring)");
  explain->add_option("--masks", e_masks, "Masks per explanation");
  explain->add_option("--seed", e_seed, "RNG seed");
  explain->add_option("--out", e_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score an externally produced saliency map");
  std::string v_saliency, v_image, v_backend = "synthetic", v_roi, v_out, v_method = "external";
  long v_index = -1;
  int v_steps = 100;
  double v_gamma = 0.5;
  eval->add_option("--saliency", v_saliency, "16-bit or 8-bit PGM")->required();
  eval->add_option("--image", v_image, "PNG image")->required();
  eval->add_option("--backend", v_backend, "Backend spec");
  eval->add_option("--roi", v_roi, "Ground-truth box x1,y1,x2,y2 (default: target box)");
  eval->add_option("--target-index", v_index, "Detection index (default: best scoring)");
  eval->add_option("--method", v_method, "Label stored in the record");
  eval->add_option("--steps", v_steps, "Deletion/insertion steps");
  eval->add_option("--gamma", v_gamma, "IoU threshold for target matching");
  eval->add_option("--out", v_out, "Output directory")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the REST service");
  std::string s_config, s_host = "127.0.0.1", s_data;
  int s_port = 8080;
  serve->add_option("--config", s_config, "TOML configuration");
  serve->add_option("--host", s_host, "Listen address");
  serve->add_option("--port", s_port, "Listen port");
  serve->add_option("--data-dir", s_data, "Artifact and job directory");

  // synthetic-backend
  auto* synth_backend = app.add_subcommand(
      "synthetic-backend", "Serve the synthetic detector over the wire protocol on stdio");
  std::string sb_captures = (fs::temp_directory_path() / "odexai-captures").string();
  synth_backend->add_option("--capture-dir", sb_captures, "Where capture bundles go");

  // synth-dataset
  auto* synth_data = app.add_subcommand("synth-dataset", "Write a seeded blob dataset");
  std::string sd_out;
  int sd_count = 10, sd_size = 64;
  std::uint64_t sd_seed = 0;
  synth_data->add_option("--out", sd_out, "Output directory")->required();
  synth_data->add_option("--count", sd_count, "Number of images");
  synth_data->add_option("--size", sd_size, "Image side length");
  synth_data->add_option("--seed", sd_seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      const DatasetIndex index =
          b_dataset == "coco" ? LoadCoco(b_ann, b_images) : LoadVoc(b_ann);
      std::vector<std::unique_ptr<Detector>> owned;
      std::vector<NamedBackend> backends;
      for (const auto& arg : b_backends) {
        auto [name, spec] = SplitBackend(arg);
        owned.push_back(MakeBackend(spec, {.pool_size = b_pool}));
        backends.push_back({name, owned.back().get()});
      }
      std::vector<Method> methods;
      for (const auto& m : SplitComma(b_methods)) methods.push_back(ParseMethod(m));
      BenchmarkConfig cfg;
      cfg.explainer.n_masks = b_masks;
      cfg.explainer.rng_seed = b_seed;
      cfg.explainer.gamma_iou = b_gamma;
      cfg.metrics.steps = b_steps;
      cfg.metrics.gamma = b_gamma;
      cfg.workers = b_workers;
      if (b_limit > 0) cfg.sample_limit = b_limit;
      const BenchmarkReport report =
          RunBenchmark(index, backends, methods, cfg, [](double p) {
            std::cerr << "\rprogress " << static_cast<int>(p * 100) << "%" << std::flush;
          });
      std::cerr << "\n";
      WriteReportBundle(b_out, report);
      std::cout << EmitTableCsv(report.aggregates);
      std::cerr << report.records.size() << " records, " << report.skips.size()
                << " skipped; bundle in " << b_out << "\n";
      return 0;
    }

    if (*explain) {
      const ImageBuffer image = ReadPngFile(e_image);
      auto backend = MakeBackend(e_backend);
      const auto dets = backend->Detect(std::span<const ImageBuffer>(&image, 1)).at(0);
      const std::size_t target_index = PickTarget(dets, e_index);
      ExplainerConfig cfg;
      cfg.method = ParseMethod(e_method);
      cfg.n_masks = e_masks;
      cfg.rng_seed = e_seed;
      const TargetSpec target{dets[target_index], fs::path(e_image).stem().string()};
      const ExplanationResult result = Explain(*backend, image, target, target_index, cfg);
      const std::string stem = target.image_id + "_" + std::string(MethodName(cfg.method));
      SaveExplanation(e_out, stem, result, target);
      std::cout << (fs::path(e_out) / (stem + ".pgm")).string() << "\n";
      return 0;
    }

    if (*eval) {
      const ImageBuffer image = ReadPngFile(v_image);
      const SaliencyMap map = DecodePgm(ReadFileBytes(v_saliency));
      auto backend = MakeBackend(v_backend);
      const auto dets = backend->Detect(std::span<const ImageBuffer>(&image, 1)).at(0);
      const std::size_t target_index = PickTarget(dets, v_index);
      const Detection& target = dets[target_index];
      const BBox roi = v_roi.empty() ? target.bbox() : ParseRoi(v_roi);
      MetricsConfig cfg;
      cfg.steps = v_steps;
      cfg.gamma = v_gamma;
      const ExplanationResult ex{map, 0.0, Method::kDrise, ""};
      const std::string image_id = fs::path(v_image).stem().string();
      const EvaluationRecord record =
          EvaluateAll(*backend, image, ex, target, roi, cfg,
                      {v_method, v_backend, "external", image_id,
                       std::to_string(target_index), static_cast<int>(target.label())});
      fs::create_directories(v_out);
      WriteFileAtomic(fs::path(v_out) / "record.json", ToJson(record).dump(2) + "\n");
      WriteFileAtomic(fs::path(v_out) / "record.csv",
                      RecordCsvHeader() + "\n" + RecordCsvRow(record) + "\n");
      std::cout << ToJson(record).dump(2) << "\n";
      return 0;
    }

    if (*serve) {
      ServiceConfig cfg = s_config.empty() ? ServiceConfig{} : LoadServiceConfig(s_config);
      if (!s_data.empty()) cfg.data_dir = s_data;
      Service service(std::move(cfg));
      const int port = service.Bind(s_host, s_port);
      g_service = &service;
      std::signal(SIGINT, [](int) {
        if (g_service) g_service->Stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_service) g_service->Stop();
      });
      std::cerr << "listening on http://" << s_host << ":" << port << "\n";
      service.Listen();
      g_service = nullptr;
      return 0;
    }

    if (*synth_backend) {
      SyntheticDetector detector;
      wire::ServeLoop(detector, std::cin, std::cout, sb_captures);
      return 0;
    }

    if (*synth_data) {
      std::cout << WriteBlobDataset(sd_out, sd_count, sd_seed, sd_size, sd_size).string()
                << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "odexai: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
