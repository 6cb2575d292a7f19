#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mycoeval/dataset.hpp"

namespace mycoeval {

struct Trigger {
  std::size_t pred_index = 0;
  double confidence = 0.0;
};

/// Image-level call. `trigger` is the highest-confidence fungal detection
/// above the threshold and is present exactly when the call is positive.
struct Diagnosis {
  std::string image_id;
  bool predicted_positive = false;
  bool gt_positive = false;
  std::optional<Trigger> trigger;
};

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  std::size_t positives() const noexcept { return tp + fn; }
  std::size_t negatives() const noexcept { return fp + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Rates with a zero denominator are left empty rather than reported as 0.
struct ScreeningReport {
  ConfusionMatrix matrix;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> f1;
};

/// Positive iff a fungal prediction has confidence strictly above the
/// threshold. Artefact predictions never count.
Diagnosis classify_image(const ImageRecord& record, double conf_threshold);

ScreeningReport report_from_matrix(const ConfusionMatrix& matrix);

/// Throws Error(kUsage) on an empty record list.
ScreeningReport screen_dataset(std::span<const ImageRecord> records, double conf_threshold);

struct SweepEntry {
  double threshold = 0.0;
  ScreeningReport report;
};

/// Thresholds must be ascending (Error(kUsage) otherwise).
std::vector<SweepEntry> threshold_sweep(std::span<const ImageRecord> records,
                                        std::span<const double> thresholds);

}  // namespace mycoeval
