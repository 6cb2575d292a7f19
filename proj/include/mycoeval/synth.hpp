#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mycoeval/dataset.hpp"
#include "mycoeval/matching.hpp"
#include "mycoeval/screening.hpp"

namespace mycoeval {

struct CountRange {
  int min = 0;
  int max = 0;
};

/// Parameters of a random synthetic cohort. Fungal boxes are long and thin,
/// artefact boxes compact.
struct SynthSpec {
  int n_images = 40;
  ImageDims frame{1024, 1024};
  CountRange fungal_per_image{0, 3};
  CountRange artefact_per_image{0, 2};
  /// Probability that a ground-truth box receives a matching prediction.
  double tp_rate = 0.9;
  /// Per-box (at least once per image) probability of an unmatched prediction.
  double fp_extra_rate = 0.2;
  /// Per-image probability of a prediction below the confidence threshold.
  double suppressed_rate = 0.1;
  /// Target IoU of planted true positives, uniform in mean +/- spread.
  double iou_mean = 0.85;
  double iou_spread = 0.10;
  double tp_conf_min = 0.50;
  double tp_conf_max = 0.99;
  double fp_conf_min = 0.26;
  double fp_conf_max = 0.70;
  OperatingPoint op;
  std::uint64_t seed = 0;

  /// Throws Error(kGeneration) for out-of-range parameters.
  void validate() const;
};

enum class PlantedRole { kTruePositive, kFalsePositive, kSuppressed };

struct PlantedPrediction {
  std::size_t pred_index = 0;
  ClassId class_id = ClassId::kFungal;
  PlantedRole role = PlantedRole::kFalsePositive;
  std::optional<std::size_t> gt_index;  // true positives only
  double target_iou = 0.0;              // true positives only
  double planted_iou = 0.0;             // true positives only
};

struct PlantedImage {
  std::string image_id;
  std::vector<PlantedPrediction> predictions;
  /// Ground truths planted without a matching prediction.
  std::vector<std::size_t> fn_gt_indices;
  std::vector<ClassId> gt_classes;
};

/// What the generator intended; matching the generated dataset at the
/// truth's operating point must reproduce it.
struct SynthTruth {
  OperatingPoint op;
  std::vector<PlantedImage> images;

  ClassCounts planted_counts(ClassId c) const;
  std::optional<double> planted_mean_iou(std::optional<ClassId> c = std::nullopt) const;
};

struct SynthCohort {
  Dataset dataset;
  SynthTruth truth;
};

/// Deterministic in spec.seed; image i draws from its own stream. Throws
/// Error(kGeneration) when boxes cannot be placed within bounded retries.
SynthCohort generate(const SynthSpec& spec);

/// Fungal-only cohort with exactly the given object-level outcome.
SynthCohort plant_object_counts(const ClassCounts& counts, const ImageDims& frame,
                                std::uint64_t seed);

/// One image per matrix cell entry: matrix.total() images whose screening
/// outcome is exactly `matrix`.
SynthCohort plant_screening_matrix(const ConfusionMatrix& matrix, const ImageDims& frame,
                                   std::uint64_t seed);

SynthSpec parse_synth_spec(std::string_view document);
std::string serialize_synth_spec(const SynthSpec& spec);
std::string serialize_truth(const SynthTruth& truth);

// Naive references, written for clarity over speed, used to cross-check
// the production matcher and AP integrator.

/// Greedy protocol transcribed directly: repeatedly pick the best remaining
/// prediction by linear scan and search every ground truth for it.
MatchReport reference_match(std::span<const Box> gts, std::span<const Box> preds,
                            const OperatingPoint& op);

/// 101-level AP with the envelope evaluated by direct lookup at every level.
double reference_ap(const PrCurve& curve);

}  // namespace mycoeval
