#include <gtest/gtest.h>

#include <cmath>

#include "mycoeval/error.hpp"
#include "mycoeval/matching.hpp"
#include "mycoeval/random.hpp"
#include "mycoeval/synth.hpp"

namespace mycoeval {
namespace {

Box gt(double x0, double y0, double x1, double y1, ClassId c = ClassId::kFungal) {
  return Box(x0, y0, x1, y1, c);
}

Box pred(double x0, double y0, double x1, double y1, double conf,
         ClassId c = ClassId::kFungal) {
  return Box(x0, y0, x1, y1, c, conf);
}

TEST(MatchImageTest, SinglePerfectMatch) {
  const std::vector<Box> gts{gt(0, 0, 10, 10)};
  const std::vector<Box> preds{pred(0, 0, 10, 10, 0.9)};
  const auto m = match_image(gts, preds, {});
  ASSERT_EQ(m.tp_pairs.size(), 1u);
  EXPECT_EQ(m.tp_pairs[0], (TpPair{0, 0, 1.0, ClassId::kFungal}));
  EXPECT_TRUE(m.fp_pred_indices.empty());
  EXPECT_TRUE(m.fn_gt_indices.empty());
}

TEST(MatchImageTest, ClassAwareNeverCrossMatches) {
  const std::vector<Box> gts{gt(0, 0, 10, 10, ClassId::kFungal)};
  const std::vector<Box> preds{pred(0, 0, 10, 10, 0.9, ClassId::kArtefact)};
  const auto m = match_image(gts, preds, {});
  EXPECT_TRUE(m.tp_pairs.empty());
  EXPECT_EQ(m.fp_pred_indices, std::vector<std::size_t>{0});
  EXPECT_EQ(m.fn_gt_indices, std::vector<std::size_t>{0});
  EXPECT_EQ(m.counts(ClassId::kArtefact), (ClassCounts{0, 1, 0}));
  EXPECT_EQ(m.counts(ClassId::kFungal), (ClassCounts{0, 0, 1}));
}

TEST(MatchImageTest, GreedyByConfidenceNotByIou) {
  const std::vector<Box> gts{gt(0, 0, 100, 100)};
  // IoU 0.6 at conf 0.9 and IoU 0.9 at conf 0.8.
  const std::vector<Box> preds{pred(0, 0, 100, 60, 0.9), pred(0, 0, 100, 90, 0.8)};
  ASSERT_DOUBLE_EQ(iou(gts[0], preds[0]), 0.6);
  ASSERT_DOUBLE_EQ(iou(gts[0], preds[1]), 0.9);
  const auto m = match_image(gts, preds, {});
  ASSERT_EQ(m.tp_pairs.size(), 1u);
  EXPECT_EQ(m.tp_pairs[0].pred_index, 0u);
  EXPECT_EQ(m.fp_pred_indices, std::vector<std::size_t>{1});
  EXPECT_EQ(m, reference_match(gts, preds, {}));
}

TEST(MatchImageTest, ConfidenceTieGoesToHigherBestIou) {
  const std::vector<Box> gts{gt(0, 0, 100, 100)};
  const std::vector<Box> preds{pred(0, 0, 100, 60, 0.7), pred(0, 0, 100, 90, 0.7)};
  const auto m = match_image(gts, preds, {});
  ASSERT_EQ(m.tp_pairs.size(), 1u);
  EXPECT_EQ(m.tp_pairs[0].pred_index, 1u);
}

TEST(MatchImageTest, FullTieGoesToInputOrderAndLowerGtIndex) {
  const std::vector<Box> gts{gt(0, 0, 10, 10), gt(0, 0, 10, 10)};
  const std::vector<Box> preds{pred(0, 0, 10, 10, 0.5), pred(0, 0, 10, 10, 0.5)};
  const auto m = match_image(gts, preds, {});
  ASSERT_EQ(m.tp_pairs.size(), 2u);
  EXPECT_EQ(m.tp_pairs[0], (TpPair{0, 0, 1.0, ClassId::kFungal}));
  EXPECT_EQ(m.tp_pairs[1], (TpPair{1, 1, 1.0, ClassId::kFungal}));
}

TEST(MatchImageTest, ConfidenceThresholdIsInclusive) {
  const std::vector<Box> gts{gt(0, 0, 10, 10)};
  const std::vector<Box> preds{pred(0, 0, 10, 10, 0.25), pred(20, 20, 30, 30, 0.2499)};
  const auto m = match_image(gts, preds, {});
  EXPECT_EQ(m.tp_pairs.size(), 1u);
  EXPECT_EQ(m.discarded_pred_indices, std::vector<std::size_t>{1});
  EXPECT_TRUE(m.fp_pred_indices.empty());
}

TEST(MatchImageTest, BelowIouThresholdIsFpAndFn) {
  const std::vector<Box> gts{gt(0, 0, 10, 10)};
  const std::vector<Box> preds{pred(5, 0, 15, 10, 0.9)};  // IoU 1/3
  const auto m = match_image(gts, preds, {});
  EXPECT_EQ(m.fp_pred_indices, std::vector<std::size_t>{0});
  EXPECT_EQ(m.fn_gt_indices, std::vector<std::size_t>{0});
  const auto loose = match_image(gts, preds, {0.25, 0.3});
  EXPECT_EQ(loose.tp_pairs.size(), 1u);
}

TEST(MatchImageTest, EmptyScene) {
  const auto m = match_image({}, {}, {});
  EXPECT_EQ(m, MatchReport{});
  EXPECT_THROW(match_image({}, {}, {0.0, 0.5}), Error);
  EXPECT_THROW(match_image({}, {}, {0.25, 1.5}), Error);
}

std::vector<Box> random_scene(Stream& rng, int n, bool with_conf) {
  std::vector<Box> out;
  for (int i = 0; i < n; ++i) {
    const double x = rng.between(0, 12) * 5.0;
    const double y = rng.between(0, 12) * 5.0;
    const double w = rng.between(1, 6) * 5.0;
    const double h = rng.between(1, 6) * 5.0;
    const ClassId c = rng.bernoulli(0.5) ? ClassId::kFungal : ClassId::kArtefact;
    std::optional<double> conf;
    if (with_conf) conf = rng.between(0, 20) / 20.0;  // coarse grid forces ties
    out.emplace_back(x, y, x + w, y + h, c, conf);
  }
  return out;
}

TEST(MatchImageTest, CountIdentitiesAndReferenceEquivalence) {
  Stream rng(1234);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto gts = random_scene(rng, rng.between(0, 12), false);
    const auto preds = random_scene(rng, rng.between(0, 12), true);
    const OperatingPoint op{rng.between(1, 10) / 10.0, rng.between(1, 19) / 20.0};
    const auto m = match_image(gts, preds, op);
    ASSERT_EQ(m, reference_match(gts, preds, op));
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cls = static_cast<ClassId>(c);
      std::size_t n_gt = 0;
      std::size_t n_kept = 0;
      for (const auto& g : gts) n_gt += g.class_id() == cls;
      for (const auto& p : preds) n_kept += p.class_id() == cls && op.keeps(*p.confidence());
      EXPECT_EQ(m.counts(cls).tp + m.counts(cls).fn, n_gt);
      EXPECT_EQ(m.counts(cls).tp + m.counts(cls).fp, n_kept);
    }
    for (const auto& pair : m.tp_pairs) EXPECT_GE(pair.iou, op.iou_threshold);
  }
}

TEST(MatchImageTest, RaisingConfidenceThresholdNeverAddsTpOrFp) {
  Stream rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto gts = random_scene(rng, rng.between(0, 10), false);
    const auto preds = random_scene(rng, rng.between(0, 10), true);
    ClassCounts prev{~std::size_t{0}, ~std::size_t{0}, 0};
    for (int t = 1; t <= 10; ++t) {
      const auto m = match_image(gts, preds, {t / 10.0, 0.5});
      ClassCounts total;
      for (int c = 0; c < kNumClasses; ++c) total += m.per_class[c];
      EXPECT_LE(total.tp, prev.tp);
      EXPECT_LE(total.fp, prev.fp);
      prev = total;
    }
  }
}

// Independent oracle: every (tp, fp, fn) with tp <= 200 whose rounded P and
// R equal the reference 0.8043 / 0.9737 and whose fp = 9, fn = 1.
TEST(CountsToPrfTest, ReferenceObjectCountsAreUniqueAndReproduced) {
  std::vector<std::array<int, 3>> hits;
  for (int tp = 1; tp <= 200; ++tp) {
    for (int fp = 0; fp <= 200; ++fp) {
      for (int fn = 0; fn <= 200; ++fn) {
        const double p = static_cast<double>(tp) / (tp + fp);
        const double r = static_cast<double>(tp) / (tp + fn);
        if (std::round(p * 1e4) == 8043 && std::round(r * 1e4) == 9737 && fp == 9 && fn == 1) {
          hits.push_back({tp, fp, fn});
        }
      }
    }
  }
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0], (std::array<int, 3>{37, 9, 1}));

  const auto s = counts_to_prf(37, 9, 1);
  EXPECT_NEAR(s.precision, 0.8043, 5e-5);
  EXPECT_NEAR(s.recall, 0.9737, 5e-5);
  EXPECT_NEAR(s.f1, 0.8810, 5e-5);
}

TEST(CountsToPrfTest, Conventions) {
  const auto empty = counts_to_prf(0, 0, 0);
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f1, 0.0);
  const auto perfect = counts_to_prf(5, 0, 0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
}

TEST(CountsToPrfTest, F1LiesBetweenPrecisionAndRecall) {
  for (std::size_t tp = 1; tp < 40; ++tp) {
    for (std::size_t fp = 0; fp < 40; ++fp) {
      for (std::size_t fn = 0; fn < 40; fn += 3) {
        const auto s = counts_to_prf(tp, fp, fn);
        EXPECT_GE(s.f1, std::min(s.precision, s.recall) - 1e-15);
        EXPECT_LE(s.f1, std::max(s.precision, s.recall) + 1e-15);
        EXPECT_NEAR(s.f1, 2.0 * s.precision * s.recall / (s.precision + s.recall), 1e-15);
      }
    }
  }
}

TEST(MeanMatchedIouTest, ArithmeticMeanAndUndefined) {
  MatchReport a;
  a.tp_pairs = {{0, 0, 0.6, ClassId::kFungal}};
  MatchReport b;
  b.tp_pairs = {{0, 0, 0.9, ClassId::kFungal}, {1, 1, 0.1, ClassId::kArtefact}};
  const std::vector<MatchReport> reports{a, b};
  EXPECT_DOUBLE_EQ(mean_matched_iou(reports, ClassId::kFungal), 0.75);
  EXPECT_NEAR(mean_matched_iou(reports), (0.6 + 0.9 + 0.1) / 3.0, 1e-15);
  try {
    mean_matched_iou(std::vector<MatchReport>{MatchReport{}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUndefinedMean);
  }
}

TEST(MeanMatchedIouTest, AllPerfectIsOne) {
  const std::vector<Box> gts{gt(0, 0, 10, 10), gt(20, 20, 40, 30)};
  const std::vector<Box> preds{pred(0, 0, 10, 10, 0.9), pred(20, 20, 40, 30, 0.8)};
  const std::vector<MatchReport> reports{match_image(gts, preds, {})};
  EXPECT_EQ(mean_matched_iou(reports), 1.0);
}

TEST(EvaluateObjectsTest, PerfectPredictions) {
  ImageRecord r;
  r.image_id = "a";
  r.dims = {100, 100};
  r.ground_truth = {gt(0, 0, 10, 10), gt(50, 50, 60, 70, ClassId::kArtefact)};
  r.predictions = {pred(0, 0, 10, 10, 0.9), pred(50, 50, 60, 70, 0.8, ClassId::kArtefact)};
  const auto m = evaluate_objects(Dataset({r}), {});
  for (int c = 0; c < kNumClasses; ++c) {
    EXPECT_EQ(m.per_class[c].prf.precision, 1.0);
    EXPECT_EQ(m.per_class[c].prf.recall, 1.0);
    EXPECT_EQ(m.per_class[c].ap50, 1.0);
    EXPECT_EQ(m.per_class[c].ap50_95, 1.0);
    EXPECT_EQ(m.per_class[c].mean_iou, 1.0);
  }
  EXPECT_EQ(m.macro.prf.f1, 1.0);
  EXPECT_EQ(m.macro.ap50, 1.0);
}

TEST(EvaluateObjectsTest, NoPredictionsGivesZeroPrecisionAndRecall) {
  ImageRecord r;
  r.image_id = "a";
  r.dims = {100, 100};
  r.ground_truth = {gt(0, 0, 10, 10)};
  const auto m = evaluate_objects(Dataset({r}), {});
  const auto& f = m.of(ClassId::kFungal);
  EXPECT_EQ(f.prf.precision, 0.0);
  EXPECT_EQ(f.prf.recall, 0.0);
  EXPECT_EQ(f.ap50, 0.0);
  EXPECT_FALSE(f.mean_iou.has_value());
  EXPECT_FALSE(m.of(ClassId::kArtefact).ap50.has_value());
}

}  // namespace
}  // namespace mycoeval
