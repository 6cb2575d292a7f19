#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mycoeval/dataset.hpp"
#include "mycoeval/geometry.hpp"

namespace mycoeval {

/// Confidence and IoU thresholds at which count metrics are taken. Both
/// comparisons used anywhere in the toolkit live here.
struct OperatingPoint {
  double conf_threshold = 0.25;
  double iou_threshold = 0.50;

  /// Throws Error(kUsage) unless both thresholds lie in (0, 1].
  void validate() const;

  /// Object level: a prediction takes part in matching.
  bool keeps(double confidence) const noexcept { return confidence >= conf_threshold; }
  /// Image level: a fungal detection makes the image positive.
  bool flags_positive(double confidence) const noexcept { return confidence > conf_threshold; }
  /// A pair counts as a true positive.
  bool overlaps(double iou_value) const noexcept { return iou_value >= iou_threshold; }
};

struct TpPair {
  std::size_t gt_index = 0;
  std::size_t pred_index = 0;
  double iou = 0.0;
  ClassId class_id = ClassId::kFungal;

  friend bool operator==(const TpPair&, const TpPair&) = default;
};

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Outcome of matching one image. Indices refer to the input lists.
/// tp_pairs are ordered by gt_index; the index vectors are ascending.
struct MatchReport {
  std::vector<TpPair> tp_pairs;
  std::vector<std::size_t> fp_pred_indices;
  std::vector<std::size_t> fn_gt_indices;
  /// Predictions dropped by the confidence threshold.
  std::vector<std::size_t> discarded_pred_indices;
  std::array<ClassCounts, kNumClasses> per_class{};

  const ClassCounts& counts(ClassId c) const { return per_class[static_cast<int>(c)]; }

  friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// Class-aware greedy matching. Predictions below the confidence threshold
/// are discarded; the rest are visited by descending confidence (ties: higher
/// best same-class IoU, then input order) and each claims the unmatched
/// same-class ground truth of highest IoU (ties: lower index) when that IoU
/// reaches the threshold.
MatchReport match_image(std::span<const Box> gts, std::span<const Box> preds,
                        const OperatingPoint& op);

/// match_image without a confidence threshold; every prediction competes.
MatchReport match_all(std::span<const Box> gts, std::span<const Box> preds,
                      double iou_threshold);

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 0/0 is taken as 0 for precision and recall.
PrfScores counts_to_prf(std::size_t tp, std::size_t fp, std::size_t fn);

struct PrPoint {
  double confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  ClassId class_id = ClassId::kFungal;
  double iou_threshold = 0.5;
  std::size_t num_gt = 0;
  /// One point per distinct confidence, by descending confidence.
  std::vector<PrPoint> points;
};

/// Pools every prediction of `class_id` across images. Throws
/// Error(kUndefinedRecall) when no ground truth of the class exists.
PrCurve pr_curve(std::span<const ImageRecord> images, ClassId class_id, double iou_threshold);

enum class Interpolation { kPoints101, kAllPoints };

/// Area under the monotone precision envelope: the mean over the 101 recall
/// levels 0.00..1.00 by default, or the exact step integral.
double average_precision(const PrCurve& curve, Interpolation mode = Interpolation::kPoints101);

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> coco_iou_thresholds();

struct ApSweep {
  double ap50 = 0.0;
  double ap50_95 = 0.0;
  std::array<double, 10> per_threshold{};
};

ApSweep ap_sweep(std::span<const ImageRecord> images, ClassId class_id,
                 Interpolation mode = Interpolation::kPoints101);

/// Mean IoU over all true-positive pairs, optionally of one class.
/// Throws Error(kUndefinedMean) when there are none.
double mean_matched_iou(std::span<const MatchReport> reports,
                        std::optional<ClassId> class_id = std::nullopt);

struct ClassMetrics {
  ClassCounts counts;
  PrfScores prf;
  std::optional<double> ap50;
  std::optional<double> ap50_95;
  std::optional<double> mean_iou;
};

struct MacroMetrics {
  PrfScores prf;
  std::optional<double> ap50;
  std::optional<double> ap50_95;
  std::optional<double> mean_iou;
};

struct ObjectMetrics {
  std::array<ClassMetrics, kNumClasses> per_class{};
  MacroMetrics macro;

  const ClassMetrics& of(ClassId c) const { return per_class[static_cast<int>(c)]; }
};

/// Object-level evaluation of a whole dataset. Count metrics and mean IoU are
/// taken at `op`; AP uses every prediction regardless of confidence.
ObjectMetrics evaluate_objects(const Dataset& dataset, const OperatingPoint& op,
                               Interpolation mode = Interpolation::kPoints101);

}  // namespace mycoeval
