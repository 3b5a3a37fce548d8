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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Tolerances and runtime budgets are the
// constants below; they are not tuned per run.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "odexai/detectors.h"
#include "odexai/error.h"
#include "odexai/explainers.h"
#include "odexai/harness.h"
#include "odexai/image_io.h"
#include "odexai/imageproc.h"
#include "odexai/metrics.h"
#include "odexai/whitebox.h"
#include "test_util.h"

namespace odexai {
namespace {

using Clock = std::chrono::steady_clock;
using namespace std::chrono_literals;

constexpr double kTableTol = 1e-3;
constexpr double kExactTol = 1e-9;
constexpr double kOracleTol = 1e-6;
constexpr int kOracleSamples = 100000;
constexpr int kSyntheticRuns = 20;
constexpr int kSyntheticRequired = 18;
constexpr double kKernelCosine = 0.999;

double Seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

// Collects failed checks for one criterion.
class Checker {
 public:
  void Expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    failed_ += ok ? 0 : 1;
  }
  void Near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << std::setprecision(17) << got << ", want " << want;
    Expect(std::abs(got - want) <= tol, s.str());
  }
  void Code(ErrorCode want, const std::function<void()>& fn, const std::string& what) {
    try {
      fn();
      Expect(false, what + ": no error");
    } catch (const Error& e) {
      Expect(e.code() == want, what + ": got " + std::string(ErrorCodeName(e.code())));
    }
  }
  bool ok() const { return failed_ == 0; }
  std::string Summary() const {
    std::ostringstream s;
    s << checks_ - failed_ << "/" << checks_ << " checks";
    for (const auto& f : failures_) s << "; " << f;
    return s.str();
  }
  void Note(const std::string& n) { notes_ += (notes_.empty() ? "" : ", ") + n; }
  const std::string& notes() const { return notes_; }

 private:
  int checks_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
  std::string notes_;
};

// ---------------------------------------------------------------------------
// 1. Published table arithmetic: Ins - Del = OA for all twelve columns.

void TableArithmetic(Checker& c) {
  struct Column {
    const char* dataset;
    const char* model;
    const char* method;
    double ins, del, oa;
  };
  const Column table[] = {
      {"MS-COCO", "YOLOX", "D-CLOSE", 0.908, 0.027, 0.881},
      {"MS-COCO", "YOLOX", "G-CAME", 0.703, 0.059, 0.644},
      {"MS-COCO", "YOLOX", "D-RISE", 0.812, 0.043, 0.769},
      {"MS-COCO", "Faster R-CNN", "D-CLOSE", 0.912, 0.049, 0.863},
      {"MS-COCO", "Faster R-CNN", "G-CAME", 0.718, 0.169, 0.549},
      {"MS-COCO", "Faster R-CNN", "D-RISE", 0.867, 0.152, 0.715},
      {"PASCAL VOC", "YOLOX", "D-CLOSE", 0.804, 0.128, 0.676},
      {"PASCAL VOC", "YOLOX", "G-CAME", 0.512, 0.183, 0.329},
      {"PASCAL VOC", "YOLOX", "D-RISE", 0.775, 0.103, 0.672},
      {"PASCAL VOC", "Faster R-CNN", "D-CLOSE", 0.826, 0.171, 0.655},
      {"PASCAL VOC", "Faster R-CNN", "G-CAME", 0.534, 0.284, 0.250},
      {"PASCAL VOC", "Faster R-CNN", "D-RISE", 0.783, 0.206, 0.577},
  };
  for (const auto& col : table) {
    c.Near(Overall(col.ins, col.del), col.oa, kTableTol,
           std::string(col.dataset) + "/" + col.model + "/" + col.method);
  }
  c.Note(std::to_string(std::size(table)) + " columns");
}

// ---------------------------------------------------------------------------
// 2. Metric exactness on handcrafted maps.

SaliencyMap MapWith(int w, int h, double fill, const std::vector<std::pair<int, int>>& peaks,
                    double peak) {
  std::vector<double> v(static_cast<std::size_t>(w) * h, fill);
  for (const auto& [x, y] : peaks) v[static_cast<std::size_t>(y) * w + x] = peak;
  return SaliencyMap(w, h, std::move(v));
}

void MetricExactness(Checker& c) {
  const BBox roi(40, 40, 60, 60);
  c.Expect(PointingGameHit(MapWith(100, 100, 0, {{50, 50}}, 1), roi), "PG unique max inside");
  c.Expect(!PointingGameHit(MapWith(100, 100, 0, {{5, 5}}, 1), roi), "PG unique max outside");
  c.Expect(PointingGameHit(MapWith(100, 100, 0, {{5, 5}, {50, 50}}, 1), roi), "PG tie, one inside");
  c.Near(PgAccuracy(7, 3), 0.7, kExactTol, "PG accuracy 7/3");
  c.Near(PgAccuracy(0, 5), 0.0, kExactTol, "PG accuracy 0/5");
  c.Near(PgAccuracy(10, 0), 1.0, kExactTol, "PG accuracy 10/0");
  c.Code(ErrorCode::kEmptySample, [] { PgAccuracy(0, 0); }, "PG accuracy 0/0");

  c.Near(Ebpg(MapWith(100, 100, 0, {{45, 45}, {50, 52}, {59, 40}}, 3), roi), 1.0, kExactTol,
         "EBPG all inside");
  c.Near(Ebpg(SaliencyMap(100, 100, 0.3), BBox(0, 0, 50, 50)), 0.25, kExactTol,
         "EBPG uniform quarter");
  c.Near(Ebpg(MapWith(100, 100, -2, {{50, 50}}, 1), roi), 1.0, kExactTol,
         "EBPG negatives clamped");
  c.Code(ErrorCode::kZeroEnergy, [] { Ebpg(SaliencyMap(10, 10, 0.0), BBox(0, 0, 5, 5)); },
         "EBPG zero map");

  c.Near(Sparsity(SaliencyMap(30, 20, 0.7)), 1.0, kExactTol, "sparsity constant");
  {
    std::vector<double> v(200);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 2 ? 5.0 : -1.0;
    c.Near(Sparsity(SaliencyMap(20, 10, v)), 2.0, kExactTol, "sparsity half at max");
  }
  c.Near(Sparsity(MapWith(16, 16, 0.25, {{3, 9}}, 4.0)), 256.0, kExactTol, "sparsity single max");

  c.Near(Auc({{0, 1}, {0.5, 1}, {1, 1}}), 1.0, kExactTol, "AUC constant");
  c.Near(Auc({{0, 1}, {1, 0}}), 0.5, kExactTol, "AUC linear");
  c.Near(Auc({{0, 1}, {0.5, 1}, {1, 0}}), 0.75, kExactTol, "AUC knee");
  c.Code(ErrorCode::kBadDomain, [] { Auc({{0, 1}, {0.9, 0}}); }, "AUC short domain");

  c.Near(Overall(0.908, 0.027), 0.881, kExactTol, "OA 0.908/0.027");
  c.Near(Overall(0.912, 0.049), 0.863, kExactTol, "OA 0.912/0.049");
  c.Near(Overall(0.5, 0.5), 0.0, kExactTol, "OA equal");
}

// ---------------------------------------------------------------------------
// 3. Trapezoid AUC against a midpoint Riemann sum of the interpolated curve.

double RiemannOracle(const std::vector<CurvePoint>& pts, int samples) {
  double sum = 0.0;
  std::size_t seg = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = (i + 0.5) / samples;
    while (pts[seg + 1].fraction < x) ++seg;
    const auto& a = pts[seg];
    const auto& b = pts[seg + 1];
    const double t = (x - a.fraction) / (b.fraction - a.fraction);
    sum += a.score + t * (b.score - a.score);
  }
  return sum / samples;
}

void AucOracle(Checker& c) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int interior = 1 + static_cast<int>(rng() % 60);
    std::vector<double> xs{0.0, 1.0};
    while (static_cast<int>(xs.size()) < interior + 2) {
      const double x = u(rng);
      if (x > 0.0 && x < 1.0) xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<CurvePoint> pts;
    for (double x : xs) pts.push_back({x, u(rng)});
    const double diff = std::abs(Auc(pts) - RiemannOracle(pts, kOracleSamples));
    worst = std::max(worst, diff);
    std::ostringstream s;
    s << "curve " << t << " diff " << diff;
    c.Expect(diff <= kOracleTol, s.str());
  }
  std::ostringstream n;
  n << "max diff " << std::scientific << std::setprecision(2) << worst;
  c.Note(n.str());
}

// ---------------------------------------------------------------------------
// 4 and 5. Faithfulness and localization on seeded single-blob images.

SaliencyMap Inverted(const SaliencyMap& map) {
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  std::vector<double> v(map.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = *lo + *hi - map.values()[i];
  return SaliencyMap(map.width(), map.height(), std::move(v));
}

struct SyntheticTally {
  int faithful = 0;
  int localized = 0;
  int concentrated = 0;
  int missing_target = 0;
};

// Detection of the synthetic detector that best overlaps the blob.
std::optional<Detection> BlobTarget(const BlobSample& s) {
  std::optional<Detection> best;
  double best_iou = 0.0;
  for (const auto& d : SyntheticDetector::DetectOne(s.image)) {
    const double iou = Iou(d.bbox(), s.bbox);
    if (iou > best_iou) best = d, best_iou = iou;
  }
  return best;
}

std::map<Method, SyntheticTally> RunSynthetic() {
  SyntheticDetector det;
  std::map<Method, SyntheticTally> tally;
  const MetricsConfig mcfg;
  for (Method m : {Method::kDrise, Method::kDclose}) {
    ExplainerConfig cfg;
    cfg.method = m;
    cfg.n_masks = m == Method::kDrise ? 500 : 400;
    cfg.dclose_levels = {50, 150};
    SyntheticTally& t = tally[m];
    for (int seed = 0; seed < kSyntheticRuns; ++seed) {
      const BlobSample s = MakeBlobSample(static_cast<std::uint64_t>(seed));
      const auto target = BlobTarget(s);
      if (!target) {
        ++t.missing_target;
        continue;
      }
      cfg.rng_seed = static_cast<std::uint64_t>(seed);
      const TargetSpec spec{*target, "blob" + std::to_string(seed)};
      const SaliencyMap map = Explain(det, s.image, spec, 0, cfg).saliency;
      const SaliencyMap inv = Inverted(map);
      const double del = DeletionCurve(det, s.image, map, *target, mcfg).auc;
      const double del_inv = DeletionCurve(det, s.image, inv, *target, mcfg).auc;
      const double ins = InsertionCurve(det, s.image, map, *target, mcfg).auc;
      const double ins_inv = InsertionCurve(det, s.image, inv, *target, mcfg).auc;
      t.faithful += (del < del_inv && ins > ins_inv) ? 1 : 0;
      t.localized += PointingGameHit(map, s.bbox) ? 1 : 0;
      const double uniform = Ebpg(SaliencyMap(map.width(), map.height(), 1.0), s.bbox);
      t.concentrated += Ebpg(map, s.bbox) > uniform ? 1 : 0;
    }
  }
  return tally;
}

const std::map<Method, SyntheticTally>& SyntheticResults(double* seconds = nullptr) {
  static double elapsed = 0.0;
  static const auto results = [] {
    const auto start = Clock::now();
    auto r = RunSynthetic();
    elapsed = Seconds(Clock::now() - start);
    return r;
  }();
  if (seconds) *seconds = elapsed;
  return results;
}

void SyntheticFaithfulness(Checker& c) {
  for (const auto& [m, t] : SyntheticResults()) {
    const std::string name(MethodName(m));
    c.Expect(t.faithful >= kSyntheticRequired, name + " faithful " + std::to_string(t.faithful));
    c.Note(name + " " + std::to_string(t.faithful) + "/" + std::to_string(kSyntheticRuns));
    c.Expect(t.missing_target == 0, name + " blobs without detection " +
                                        std::to_string(t.missing_target));
  }
}

void SyntheticLocalization(Checker& c) {
  for (const auto& [m, t] : SyntheticResults()) {
    const std::string name(MethodName(m));
    c.Expect(t.localized >= kSyntheticRequired, name + " argmax in box " + std::to_string(t.localized));
    c.Expect(t.concentrated >= kSyntheticRequired,
             name + " EBPG above uniform " + std::to_string(t.concentrated));
    c.Note(name + " PG " + std::to_string(t.localized) + "/" + std::to_string(kSyntheticRuns) +
           " EBPG " + std::to_string(t.concentrated) + "/" + std::to_string(kSyntheticRuns));
  }
}

// ---------------------------------------------------------------------------
// 6. Determinism across runs and worker counts.

std::vector<EvaluationRecord> Timeless(std::vector<EvaluationRecord> records) {
  for (auto& r : records) r.time_s = 0.0;
  return records;
}

void Determinism(Checker& c) {
  const BlobSample s = MakeBlobSample(7);
  const auto target = BlobTarget(s);
  c.Expect(target.has_value(), "blob detected");
  if (!target) return;
  const TargetSpec spec{*target, "blob7"};
  SyntheticDetector single;
  std::vector<std::unique_ptr<Detector>> members;
  for (int i = 0; i < 4; ++i) members.push_back(std::make_unique<SyntheticDetector>());
  BackendPool pool(std::move(members));
  for (Method m : {Method::kDrise, Method::kDclose, Method::kGcame}) {
    ExplainerConfig cfg;
    cfg.method = m;
    cfg.n_masks = 200;
    cfg.dclose_levels = {50, 150};
    cfg.rng_seed = 99;
    const std::string name(MethodName(m));
    const ExplanationResult a = Explain(single, s.image, spec, 0, cfg);
    const ExplanationResult b = Explain(single, s.image, spec, 0, cfg);
    const ExplanationResult p = Explain(pool, s.image, spec, 0, cfg);
    c.Expect(a.saliency == b.saliency, name + " saliency differs between runs");
    c.Expect(a.saliency == p.saliency, name + " saliency differs on a pool of 4");
    const RecordLabels labels{name, "synthetic", "blobs", "blob7", "0", s.label};
    const auto ra = EvaluateAll(single, s.image, a, *target, s.bbox, {}, labels);
    const auto rb = EvaluateAll(pool, s.image, b, *target, s.bbox, {}, labels);
    c.Expect(Timeless({ra}) == Timeless({rb}), name + " records differ");
  }

  testing::TempDir dir;
  const auto ann = WriteBlobDataset(dir.path(), 4, 31);
  const DatasetIndex index = LoadCoco(ann, dir.path() / "images");
  BenchmarkConfig cfg;
  cfg.explainer.n_masks = 100;
  cfg.explainer.dclose_levels = {50, 150};
  cfg.metrics.steps = 20;
  const std::vector<Method> methods{Method::kDrise, Method::kDclose, Method::kGcame};
  std::vector<std::vector<EvaluationRecord>> runs;
  for (int workers : {1, 4, 1, 4}) {
    cfg.workers = workers;
    SyntheticDetector det;
    runs.push_back(Timeless(RunBenchmark(index, {{"synthetic", &det}}, methods, cfg).records));
  }
  c.Expect(runs[0].size() == 12, "benchmark record count " + std::to_string(runs[0].size()));
  for (std::size_t i = 1; i < runs.size(); ++i) {
    c.Expect(runs[i] == runs[0], "benchmark run " + std::to_string(i) + " differs");
  }
  c.Note("3 methods, workers {1,4}");
}

// ---------------------------------------------------------------------------
// 7. G-CAME on controlled captures, and its speed relative to D-RISE.

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

void GcameBehaviour(Checker& c) {
  ExplainerConfig cfg;
  cfg.method = Method::kGcame;
  cfg.gcame_sigma_scale = 0.5;
  const int fh = 16, fw = 16, img = 64;
  const double stride = 4, cx = 30, cy = 26;
  const Detection target(BBox(14, 10, 46, 42), 1.0, {1.0});
  {
    const std::vector<float> f(fh * fw, 2.0f), g(fh * fw, 0.7f);
    const WhiteBoxCapture cap("l", 1, fh, fw, f, g, stride, cx, cy);
    const auto r = ExplainGcame(cap, img, img, {target, "x"}, cfg);
    // Continuous Gaussian in image pixels: sigma scales with the box size.
    const double sigma_px = cfg.gcame_sigma_scale * 32;
    std::vector<double> oracle(img * img);
    for (int y = 0; y < img; ++y) {
      for (int x = 0; x < img; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        oracle[y * img + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma_px * sigma_px));
      }
    }
    const double cos = Cosine(r.saliency.values(), oracle);
    std::ostringstream s;
    s << "cosine " << std::setprecision(6) << cos;
    c.Expect(cos > kKernelCosine, s.str());
    c.Note(s.str());
  }
  {
    const std::vector<float> f(2 * fh * fw, 1.0f), g(2 * fh * fw, 0.0f);
    const WhiteBoxCapture cap("l", 2, fh, fw, f, g, stride, cx, cy);
    const auto r = ExplainGcame(cap, img, img, {target, "x"}, cfg);
    const auto [lo, hi] = std::minmax_element(r.saliency.values().begin(), r.saliency.values().end());
    c.Expect(*lo == *hi, "zero gradients give a non-constant map");
  }

  // Timing on a real capture from the synthetic detector.
  SyntheticDetector det;
  const BlobSample s = MakeBlobSample(3);
  const auto t = BlobTarget(s);
  c.Expect(t.has_value(), "blob detected");
  if (!t) return;
  const WhiteBoxCapture cap = det.Capture(s.image, "", 0);
  const auto g0 = Clock::now();
  ExplainGcame(cap, s.image.width(), s.image.height(), {*t, "blob3"}, cfg);
  const double gcame_s = Seconds(Clock::now() - g0);
  ExplainerConfig drise;
  drise.n_masks = 2000;
  const auto d0 = Clock::now();
  ExplainDrise(det, s.image, {*t, "blob3"}, drise);
  const double drise_s = Seconds(Clock::now() - d0);
  c.Expect(gcame_s < 1.0, "G-CAME took " + std::to_string(gcame_s) + " s");
  c.Expect(gcame_s < drise_s, "G-CAME not faster than D-RISE");
  std::ostringstream n;
  n << "G-CAME " << std::scientific << std::setprecision(2) << gcame_s << " s vs D-RISE(2000) "
    << drise_s << " s";
  c.Note(n.str());
}

// ---------------------------------------------------------------------------
// 8. Benchmark bundle round trip.

std::string ReadText(const std::filesystem::path& p) {
  const Bytes b = ReadFileBytes(p);
  return std::string(b.begin(), b.end());
}

void HarnessRoundTrip(Checker& c) {
  testing::TempDir dir;
  const auto ann = WriteBlobDataset(dir.path() / "data", 10, 5);
  const DatasetIndex index = LoadCoco(ann, dir.path() / "data/images");
  c.Expect(index.images.size() == 10, "dataset size");
  SyntheticDetector det;
  BenchmarkConfig cfg;
  cfg.explainer.n_masks = 300;
  cfg.explainer.dclose_levels = {50, 150};
  const auto report = RunBenchmark(index, {{"synthetic", &det}},
                                   {Method::kDclose, Method::kGcame, Method::kDrise}, cfg);
  c.Expect(report.records.size() == 30, "record count " + std::to_string(report.records.size()));
  const auto out = dir.path() / "bundle";
  WriteReportBundle(out, report);
  for (const char* f : {"report.json", "report.csv", "spider_3axis.svg", "spider_all.svg"}) {
    c.Expect(std::filesystem::exists(out / f), std::string("missing ") + f);
  }
  c.Expect(BenchmarkReportFromJson(nlohmann::json::parse(ReadText(out / "report.json"))) == report,
           "report.json does not round-trip");
  const auto parsed = ParseTableCsv(ReadText(out / "report.csv"));
  c.Expect(parsed.size() == report.aggregates.size(), "table rows");
  for (std::size_t i = 0; i < std::min(parsed.size(), report.aggregates.size()); ++i) {
    const AggregateRow& a = report.aggregates[i];
    const AggregateRow& p = parsed[i];
    const bool same = p.method == a.method && p.model == a.model && p.dataset == a.dataset &&
                      p.ins == a.ins && p.del == a.del && p.oa == a.oa && p.pg == a.pg &&
                      p.ebpg == a.ebpg && p.sparsity == a.sparsity && p.time_s == a.time_s;
    c.Expect(same, "CSV row " + std::to_string(i) + " differs from the aggregate");
    c.Near(a.oa, a.ins - a.del, kExactTol, a.method + " aggregate OA identity");
  }
  c.Note(std::to_string(report.records.size()) + " records");
}

// ---------------------------------------------------------------------------
// 9. Protocol conformance with the scripted fake backend, and ODT rejection.

std::string Fake(const std::string& mode) { return std::string(FAKE_BACKEND) + " " + mode; }

void ProtocolConformance(Checker& c) {
  {
    SubprocessDetector ok(Fake("ok"));
    c.Expect(ok.descriptor().class_names.size() == 3, "handshake classes");
    const std::vector<ImageBuffer> imgs{testing::BlobImage(32, 32, 4, 4, 12, 12, 2)};
    const auto dets = ok.Detect(imgs);
    c.Expect(dets.size() == 1 && dets[0].size() == 1 && dets[0][0].label() == 2, "detect answer");
  }
  const std::vector<ImageBuffer> one{ImageBuffer(8, 8)};
  c.Code(ErrorCode::kBackendUnavailable, [] { SubprocessDetector d(Fake("bad_handshake")); },
         "bad handshake");
  c.Code(ErrorCode::kBackendUnavailable,
         [] { SubprocessDetector d(Fake("slow_handshake"), {300ms, 300ms}); }, "slow handshake");
  for (const char* mode : {"malformed", "wrong_id", "bad_classes"}) {
    c.Code(ErrorCode::kProtocolViolation, [&] {
      SubprocessDetector d(Fake(mode));
      d.Detect(one);
    }, mode);
  }
  c.Code(ErrorCode::kBackendUnavailable, [&] {
    SubprocessDetector d(Fake("die"));
    d.Detect(one);
  }, "backend died");
  c.Code(ErrorCode::kTimeout, [&] {
    SubprocessDetector d(Fake("hang"), {2000ms, 300ms});
    d.Detect(one);
  }, "detect timeout");

  // A valid bundle, then truncations and a NaN gradient.
  const float marker = 0.8125f;
  std::vector<float> f(2 * 4 * 4), g(2 * 4 * 4, marker);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(i);
  const Bytes bundle = EncodeWhiteBoxCapture(WhiteBoxCapture("l", 2, 4, 4, f, g, 8, 12, 20));
  c.Expect(DecodeWhiteBoxCapture(bundle).gradient(1)[3] == marker, "valid bundle decodes");
  for (std::size_t cut : {std::size_t{0}, std::size_t{4}, bundle.size() / 3, bundle.size() - 1}) {
    c.Code(ErrorCode::kFormatError,
           [&] { DecodeWhiteBoxCapture(std::span(bundle.data(), cut)); },
           "truncated at " + std::to_string(cut));
  }
  Bytes poisoned = bundle;
  std::uint8_t pattern[4], nan_bytes[4];
  const float nan = std::nanf("");
  std::memcpy(pattern, &marker, 4);
  std::memcpy(nan_bytes, &nan, 4);
  const auto it = std::search(poisoned.begin(), poisoned.end(), pattern, pattern + 4);
  c.Expect(it != poisoned.end(), "gradient bytes located");
  if (it != poisoned.end()) std::copy(nan_bytes, nan_bytes + 4, it);
  c.Code(ErrorCode::kNonFiniteTensor, [&] { DecodeWhiteBoxCapture(poisoned); }, "NaN gradient");
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<void(Checker&)> run;
};

}  // namespace
}  // namespace odexai

int main() {
  using namespace odexai;
  const std::vector<Criterion> criteria = {
      {1, "published table arithmetic (Ins - Del = OA)", 1.0, TableArithmetic},
      {2, "metric exactness on handcrafted maps", 1.0, MetricExactness},
      {3, "trapezoid AUC vs Riemann oracle", 5.0, AucOracle},
      {4, "synthetic faithfulness vs inverted maps", 300.0, SyntheticFaithfulness},
      {5, "synthetic localization (PG, EBPG)", 300.0, SyntheticLocalization},
      {6, "determinism across runs and workers", 120.0, Determinism},
      {7, "G-CAME kernel, constant map and speed", 60.0, GcameBehaviour},
      {8, "benchmark bundle round trip", 300.0, HarnessRoundTrip},
      {9, "protocol conformance and ODT rejection", 10.0, ProtocolConformance},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Checker c;
    const auto start = Clock::now();
    std::string crash;
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      crash = e.what();
    }
    double elapsed = Seconds(Clock::now() - start);
    // Criteria 4 and 5 share one set of synthetic runs and report its time.
    if (cr.id == 4 || cr.id == 5) SyntheticResults(&elapsed);
    const bool in_budget = elapsed <= cr.budget_s;
    const bool pass = crash.empty() && c.ok() && in_budget;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << cr.id << ": " << cr.name << " ["
              << std::fixed << std::setprecision(2) << elapsed << " s of " << cr.budget_s
              << " s budget";
    if (!c.notes().empty()) std::cout << "; " << c.notes();
    std::cout << "]";
    if (!pass) {
      std::cout << " " << c.Summary();
      if (!crash.empty()) std::cout << "; exception: " << crash;
      if (!in_budget) std::cout << "; over budget";
    }
    std::cout << std::endl;
  }
  std::cout << (failed == 0 ? "ALL CRITERIA PASSED" : std::to_string(failed) + " CRITERIA FAILED")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
