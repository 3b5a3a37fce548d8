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
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "odexai/error.h"
#include "odexai/table_format.h"
#include "test_util.h"

namespace odexai {
namespace {

using testing::BlobImage;
using testing::IndicatorMap;
using testing::InvertMap;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

// Synthetic detector that keeps every image it is asked about.
class RecordingDetector final : public Detector {
 public:
  const BackendDescriptor& descriptor() const override { return inner_.descriptor(); }
  std::vector<ImageBuffer> seen;
  int calls = 0;

 protected:
  DetectionLists DetectChunk(std::span<const ImageBuffer> images) override {
    ++calls;
    seen.insert(seen.end(), images.begin(), images.end());
    return inner_.Detect(images);
  }

 private:
  SyntheticDetector inner_;
};

// Midpoint Riemann sum of the piecewise-linear interpolant on n cells.
double RiemannOracle(const std::vector<CurvePoint>& pts, int n) {
  double sum = 0.0;
  std::size_t seg = 1;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    while (pts[seg].fraction < x) ++seg;
    const CurvePoint& a = pts[seg - 1];
    const CurvePoint& b = pts[seg];
    const double t = (x - a.fraction) / (b.fraction - a.fraction);
    sum += a.score + t * (b.score - a.score);
  }
  return sum / n;
}

SaliencyMap PeakMap(int w, int h, std::vector<std::pair<int, int>> peaks) {
  std::vector<double> v(static_cast<std::size_t>(w) * h, 0.1);
  for (auto [r, c] : peaks) v[static_cast<std::size_t>(r) * w + c] = 1.0;
  return SaliencyMap(w, h, std::move(v));
}

TEST(PointingGameTest, Examples) {
  const BBox roi(40, 40, 60, 60);
  EXPECT_TRUE(PointingGameHit(PeakMap(100, 100, {{50, 50}}), roi));
  EXPECT_FALSE(PointingGameHit(PeakMap(100, 100, {{5, 5}}), roi));
  EXPECT_TRUE(PointingGameHit(PeakMap(100, 100, {{5, 5}, {50, 50}}), roi));
  // Constant map: every pixel is a maximum.
  EXPECT_TRUE(PointingGameHit(SaliencyMap(100, 100, 0.3), roi));
}

TEST(PointingGameTest, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(20 * 15);
    for (auto& x : v) x = u(rng);
    const SaliencyMap map(20, 15, v);
    const BBox roi = testing::RandomBox(rng, 15);
    std::vector<double> e(v.size()), c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      e[i] = std::exp(3 * v[i]);
      c[i] = std::pow(v[i], 3) * 7 - 2;
    }
    EXPECT_EQ(PointingGameHit(map, roi), PointingGameHit(SaliencyMap(20, 15, e), roi));
    EXPECT_EQ(PointingGameHit(map, roi), PointingGameHit(SaliencyMap(20, 15, c), roi));
  }
}

TEST(PgAccuracyTest, Examples) {
  EXPECT_DOUBLE_EQ(PgAccuracy(7, 3), 0.7);
  EXPECT_EQ(PgAccuracy(0, 5), 0.0);
  EXPECT_EQ(PgAccuracy(10, 0), 1.0);
  EXPECT_EQ(CodeOf([] { PgAccuracy(0, 0); }), ErrorCode::kEmptySample);
}

TEST(EbpgTest, Examples) {
  const BBox roi(0, 0, 10, 10);
  EXPECT_EQ(Ebpg(IndicatorMap(20, 20, BBox(2, 2, 8, 8)), roi), 1.0);
  EXPECT_NEAR(Ebpg(SaliencyMap(20, 20, 0.7), roi), 0.25, 1e-12);
  EXPECT_EQ(CodeOf([&] { Ebpg(SaliencyMap(20, 20, 0.0), roi); }), ErrorCode::kZeroEnergy);
  // Negatives are clamped before summing.
  std::vector<double> v(400, -1.0);
  v[0] = 2.0;
  EXPECT_EQ(Ebpg(SaliencyMap(20, 20, v), BBox(10, 10, 20, 20)), 0.0);
  EXPECT_EQ(CodeOf([] { Ebpg(SaliencyMap(4, 4, -1.0), BBox(0, 0, 2, 2)); }),
            ErrorCode::kZeroEnergy);
}

TEST(EbpgTest, InsideAndOutsideSumToOne) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.2, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(16 * 16);
    for (auto& x : v) x = u(rng);
    const SaliencyMap map(16, 16, v);
    const BBox roi = testing::RandomBox(rng, 16);
    // Oracle: clamp and split by the pixel-centre rule by hand.
    double in = 0, total = 0;
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        const double e = std::max(0.0, v[r * 16 + c]);
        total += e;
        if (c + 0.5 >= roi.x1() && c + 0.5 < roi.x2() && r + 0.5 >= roi.y1() && r + 0.5 < roi.y2()) {
          in += e;
        }
      }
    }
    const double got = Ebpg(map, roi);
    EXPECT_NEAR(got, in / total, 1e-12);
    EXPECT_NEAR(got + (total - in) / total, 1.0, 1e-9);
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(TargetScoreTest, Examples) {
  const Detection target(BBox(0, 0, 10, 10), 1.0, {1.0, 0.0});
  EXPECT_EQ(TargetScore({target}, target, 0.5), 1.0);
  EXPECT_EQ(TargetScore({}, target, 0.5), 0.0);
  // IoU = 40 / 100.
  const Detection shifted(BBox(0, 0, 10, 4), 1.0, {1.0, 0.0});
  ASSERT_NEAR(Iou(shifted.bbox(), target.bbox()), 0.4, 1e-12);
  EXPECT_EQ(TargetScore({shifted}, target, 0.5), 0.0);
  EXPECT_EQ(TargetScore({shifted}, target, 0.4), 1.0);
  const Detection other_class(BBox(0, 0, 10, 10), 1.0, {0.4, 0.6});
  EXPECT_EQ(TargetScore({other_class}, target, 0.5), 0.0);
  const Detection weaker(BBox(0, 0, 10, 10), 0.5, {0.8, 0.2});
  EXPECT_DOUBLE_EQ(TargetScore({weaker}, target, 0.5), 0.4);
  EXPECT_DOUBLE_EQ(TargetScore({weaker}, target, 0.5, ScoreMode::kProbOnly), 0.8);
  EXPECT_DOUBLE_EQ(TargetScore({weaker, target}, target, 0.5), 1.0);
  EXPECT_THROW(TargetScore({}, target, 0.0), Error);
  EXPECT_THROW(TargetScore({}, target, 1.5), Error);
}

TEST(AucTest, Examples) {
  EXPECT_DOUBLE_EQ(Auc({{0, 1}, {0.3, 1}, {1, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(Auc({{0, 1}, {1, 0}}), 0.5);
  const std::vector<CurvePoint> p{{0, 1}, {0.5, 1}, {1, 0}};
  EXPECT_DOUBLE_EQ(Auc(p), 0.75);
  EXPECT_NEAR(Auc(p), RiemannOracle(p, 100000), 1e-9);
}

TEST(AucTest, BadDomain) {
  for (const auto& pts : std::vector<std::vector<CurvePoint>>{
           {},
           {{0, 1}},
           {{0.1, 1}, {1, 1}},
           {{0, 1}, {0.9, 1}},
           {{0, 1}, {0.5, 1}, {0.5, 1}, {1, 1}},
           {{0, 1}, {0.6, 1}, {0.4, 1}, {1, 1}}}) {
    EXPECT_EQ(CodeOf([&] { Auc(pts); }), ErrorCode::kBadDomain);
  }
}

TEST(AucTest, MatchesRiemannOracleOnRandomCurves) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const int knots = 2 + static_cast<int>(rng() % 30);
    std::vector<double> xs{0.0, 1.0};
    while (static_cast<int>(xs.size()) < knots) xs.push_back(u(rng));
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::vector<CurvePoint> pts;
    for (double x : xs) pts.push_back({x, u(rng)});
    EXPECT_NEAR(Auc(pts), RiemannOracle(pts, 100000), 1e-6);
  }
}

TEST(OverallTest, Examples) {
  EXPECT_NEAR(Overall(0.908, 0.027), 0.881, 1e-12);
  EXPECT_NEAR(Overall(0.912, 0.049), 0.863, 1e-12);
  EXPECT_EQ(Overall(0.5, 0.5), 0.0);
}

TEST(SparsityTest, Examples) {
  EXPECT_EQ(Sparsity(SaliencyMap(8, 8, 0.3)), 1.0);
  std::vector<double> half(64, 0.2);
  std::fill(half.begin(), half.begin() + 32, 0.9);
  EXPECT_DOUBLE_EQ(Sparsity(SaliencyMap(8, 8, half)), 2.0);
  std::vector<double> one(64, -3.0);
  one[17] = 4.0;
  EXPECT_DOUBLE_EQ(Sparsity(SaliencyMap(8, 8, one)), 64.0);
}

TEST(SparsityTest, AtLeastOneAndAffineInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(10 * 7), s(v.size());
    for (auto& x : v) x = u(rng);
    const double a = 0.1 + 10 * std::abs(u(rng)), b = 5 * u(rng);
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = a * v[i] + b;
    const double sp = Sparsity(SaliencyMap(10, 7, v));
    EXPECT_GE(sp, 1.0);
    EXPECT_NEAR(sp, Sparsity(SaliencyMap(10, 7, s)), 1e-9 * sp);
  }
}

TEST(RankPixelsTest, DescendingWithRowMajorTies) {
  const SaliencyMap m(3, 2, std::vector<double>{0.5, 1.0, 0.5, 0.0, 1.0, 0.5});
  EXPECT_EQ(RankPixels(m), (std::vector<std::size_t>{1, 4, 0, 2, 5, 3}));
}

class BlobCurveTest : public ::testing::Test {
 protected:
  const BBox blob{20, 16, 36, 32};
  const ImageBuffer image = BlobImage(64, 64, 20, 16, 16, 16, 0);
  const Detection target = SyntheticDetector::DetectOne(image).at(0);
  const SaliencyMap ideal = IndicatorMap(64, 64, blob);
  const SaliencyMap anti = InvertMap(ideal);
  SyntheticDetector det;
};

TEST_F(BlobCurveTest, DeletionPrefersIdealMap) {
  MetricsConfig cfg;
  cfg.steps = 10;
  const auto good = DeletionCurve(det, image, ideal, target, cfg);
  const auto bad = DeletionCurve(det, image, anti, target, cfg);
  ASSERT_EQ(good.points.size(), 11u);
  EXPECT_EQ(good.direction, CurveDirection::kDeletion);
  // 10% of 4096 pixels already covers the 256-pixel blob.
  EXPECT_EQ(good.points[1].score, 0.0);
  const double original = TargetScore(det.Detect(std::vector{image})[0], target, 0.5);
  EXPECT_GT(original, 0.0);
  EXPECT_EQ(good.points[0].score, original);
  EXPECT_EQ(bad.points[0].score, original);
  EXPECT_LT(good.auc, bad.auc);
  EXPECT_EQ(bad.points.back().score, 0.0);
  for (const auto& c : {good, bad}) {
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      EXPECT_DOUBLE_EQ(c.points[i].fraction, i / 10.0);
    }
    EXPECT_NEAR(c.auc, Auc(c.points), 1e-9);
  }
}

TEST_F(BlobCurveTest, InsertionPrefersIdealMap) {
  MetricsConfig cfg;
  cfg.steps = 10;
  const auto good = InsertionCurve(det, image, ideal, target, cfg);
  const auto bad = InsertionCurve(det, image, anti, target, cfg);
  EXPECT_EQ(good.direction, CurveDirection::kInsertion);
  const double original = TargetScore(det.Detect(std::vector{image})[0], target, 0.5);
  EXPECT_EQ(good.points.front().score, 0.0);
  EXPECT_EQ(good.points.back().score, original);
  EXPECT_EQ(bad.points.back().score, original);
  EXPECT_GT(good.auc, bad.auc);
}

TEST_F(BlobCurveTest, BlurBaselineRevealsTheOriginalAtTheEnd) {
  MetricsConfig cfg;
  cfg.steps = 5;
  cfg.insertion_baseline = InsertionBaseline::kBlur;
  const auto c = InsertionCurve(det, image, ideal, target, cfg);
  EXPECT_EQ(c.points.back().score, SyntheticDetector::DetectOne(image)[0].objectness());
}

TEST(CurveTest, SharedOrderingBetweenDeletionAndInsertion) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  const ImageBuffer image = BlobImage(24, 20, 4, 4, 10, 9, 2, 0.3f);
  std::vector<double> v(24 * 20);
  for (auto& x : v) x = std::round(u(rng) * 5) / 5;  // plenty of ties
  const SaliencyMap map(24, 20, v);
  const Detection target = SyntheticDetector::DetectOne(image).at(0);
  MetricsConfig cfg;
  cfg.steps = 7;
  RecordingDetector del, ins;
  DeletionCurve(del, image, map, target, cfg);
  InsertionCurve(ins, image, map, target, cfg);
  ASSERT_EQ(del.seen.size(), 8u);
  ASSERT_EQ(ins.seen.size(), 8u);
  for (std::size_t k = 0; k < 8; ++k) {
    for (int r = 0; r < 20; ++r) {
      for (int c = 0; c < 24; ++c) {
        const bool removed = del.seen[k].at(r, c, 2) == 0.0f && del.seen[k].at(r, c, 0) == 0.0f;
        const bool revealed = ins.seen[k].at(r, c, 2) != 0.0f || ins.seen[k].at(r, c, 0) != 0.0f;
        ASSERT_EQ(removed, revealed) << k << " " << r << " " << c;
      }
    }
  }
}

TEST(CurveTest, ConstantMapFollowsRowMajorOrder) {
  const ImageBuffer image = BlobImage(8, 6, 1, 1, 6, 5, 1, 0.5f);
  const Detection target = SyntheticDetector::DetectOne(image).at(0);
  MetricsConfig cfg;
  cfg.steps = 2;
  RecordingDetector rec;
  DeletionCurve(rec, image, SaliencyMap(8, 6, 1.0), target, cfg);
  ASSERT_EQ(rec.seen.size(), 3u);
  EXPECT_EQ(rec.seen[0], image);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 8; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        EXPECT_EQ(rec.seen[1].at(r, c, ch), r < 3 ? 0.0f : image.at(r, c, ch));
        EXPECT_EQ(rec.seen[2].at(r, c, ch), 0.0f);
      }
    }
  }
}

TEST(CurveTest, BatchingDoesNotChangeTheCurve) {
  const ImageBuffer image = BlobImage(32, 32, 6, 8, 14, 12, 0);
  const Detection target = SyntheticDetector::DetectOne(image).at(0);
  const SaliencyMap map = IndicatorMap(32, 32, BBox(6, 8, 13, 20));
  MetricsConfig cfg;
  cfg.steps = 20;
  RecordingDetector a, b;
  const auto big = DeletionCurve(a, image, map, target, cfg);
  cfg.batch_size = 3;
  const auto small = DeletionCurve(b, image, map, target, cfg);
  EXPECT_EQ(a.calls, 1);
  EXPECT_EQ(b.calls, 7);
  ASSERT_EQ(big.points.size(), small.points.size());
  for (std::size_t i = 0; i < big.points.size(); ++i) {
    EXPECT_EQ(big.points[i].score, small.points[i].score);
  }
  EXPECT_EQ(big.auc, small.auc);
}

TEST(CurveTest, DimensionMismatch) {
  SyntheticDetector det;
  const ImageBuffer image(16, 16);
  const Detection target(BBox(0, 0, 4, 4), 1.0, {1, 0, 0});
  EXPECT_EQ(CodeOf([&] { DeletionCurve(det, image, SaliencyMap(8, 16, 1.0), target, {}); }),
            ErrorCode::kDimensionMismatch);
}

TEST(MetricsConfigTest, ValidationAndJson) {
  MetricsConfig cfg;
  EXPECT_EQ(cfg.steps, 100);
  EXPECT_EQ(cfg.gamma, 0.5);
  cfg.score_mode = ScoreMode::kProbOnly;
  cfg.insertion_baseline = InsertionBaseline::kBlur;
  const MetricsConfig back = MetricsConfigFromJson(ToJson(cfg));
  EXPECT_EQ(ToJson(back), ToJson(cfg));
  EXPECT_EQ(ToJson(cfg)["score_mode"], "prob");
  for (auto mutate : std::vector<std::function<void(MetricsConfig&)>>{
           [](auto& c) { c.steps = 1; }, [](auto& c) { c.gamma = 0.0; },
           [](auto& c) { c.gamma = 1.01; }, [](auto& c) { c.blur_sigma = 0.0; },
           [](auto& c) { c.batch_size = 0; }}) {
    MetricsConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.Validate(), Error);
  }
}

TEST_F(BlobCurveTest, EvaluateAllOnIdealMap) {
  const ExplanationResult expl{ideal, 0.25, Method::kDrise, "d"};
  MetricsConfig cfg;
  cfg.steps = 20;
  const RecordLabels labels{"drise", "synthetic", "blobs", "img1", "img1_0", 1};
  const EvaluationRecord r = EvaluateAll(det, image, expl, target, blob, cfg, labels);
  EXPECT_TRUE(r.pg_hit);
  ASSERT_TRUE(r.ebpg.has_value());
  EXPECT_EQ(*r.ebpg, 1.0);
  EXPECT_EQ(r.oa, r.ins_auc - r.del_auc);
  EXPECT_DOUBLE_EQ(r.sparsity, 4096.0 / 256.0);
  EXPECT_EQ(r.time_s, 0.25);
  EXPECT_EQ(r.method, "drise");
  EXPECT_EQ(r.category, 1);
  EXPECT_EQ(EvaluateAll(det, image, expl, target, blob, cfg, labels), r);
  EXPECT_GT(r.oa, 0.0);
}

TEST_F(BlobCurveTest, EvaluateAllZeroEnergyLeavesEbpgEmpty) {
  const ExplanationResult expl{SaliencyMap(64, 64, 0.0), 0.0, Method::kGcame, "d"};
  MetricsConfig cfg;
  cfg.steps = 4;
  const EvaluationRecord r = EvaluateAll(det, image, expl, target, blob, cfg, {});
  EXPECT_FALSE(r.ebpg.has_value());
  EXPECT_TRUE(r.pg_hit);
  EXPECT_EQ(r.sparsity, 1.0);
  EXPECT_EQ(CodeOf([&] {
              EvaluateAll(det, image, {SaliencyMap(32, 64, 0.0), 0, Method::kGcame, ""}, target,
                          blob, cfg, {});
            }),
            ErrorCode::kDimensionMismatch);
}

TEST(RecordTest, JsonAndCsv) {
  EvaluationRecord r{"dclose", "yolox", "coco", "42", "42_1", 3, 0.908, 0.027, 0.881,
                     true, std::nullopt, 2.5, 12.25};
  EXPECT_EQ(EvaluationRecordFromJson(ToJson(r)), r);
  EXPECT_TRUE(ToJson(r)["ebpg"].is_null());
  EXPECT_EQ(RecordCsvHeader(),
            "method,model,dataset,image_id,instance_id,category,Ins,Del,OA,PG,EBPG,Sparsity,"
            "Time(s)");
  EXPECT_EQ(RecordCsvRow(r), "dclose,yolox,coco,42,42_1,3," + FormatExact(0.908) + "," +
                                 FormatExact(0.027) + "," + FormatExact(0.881) + ",1," +
                                 std::string(kMissingCell) + ",2.5,12.25");
  EXPECT_EQ(std::stod(FormatExact(0.1 + 0.2)), 0.1 + 0.2);
  r.ebpg = 0.5;
  r.image_id = "a,b";
  EXPECT_EQ(EvaluationRecordFromJson(ToJson(r)), r);
  EXPECT_NE(RecordCsvRow(r).find("\"a,b\""), std::string::npos);
  EXPECT_THROW(EvaluationRecordFromJson(nlohmann::json::object()), Error);
}

}  // namespace
}  // namespace odexai
