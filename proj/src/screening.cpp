#include "mycoeval/screening.hpp"

#include <algorithm>

#include "mycoeval/error.hpp"
#include "mycoeval/matching.hpp"

namespace mycoeval {

Diagnosis classify_image(const ImageRecord& record, double conf_threshold) {
  const OperatingPoint op{conf_threshold, 0.5};
  Diagnosis d;
  d.image_id = record.image_id;
  d.gt_positive = record.positive_label.value_or(record.has_class_gt(ClassId::kFungal));
  for (std::size_t p = 0; p < record.predictions.size(); ++p) {
    const Box& b = record.predictions[p];
    if (b.class_id() != ClassId::kFungal) continue;
    const double conf = b.confidence().value_or(0.0);
    if (!op.flags_positive(conf)) continue;
    if (!d.trigger || conf > d.trigger->confidence) d.trigger = Trigger{p, conf};
  }
  d.predicted_positive = d.trigger.has_value();
  return d;
}

ScreeningReport report_from_matrix(const ConfusionMatrix& m) {
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  ScreeningReport r;
  r.matrix = m;
  r.accuracy = ratio(m.tp + m.tn, m.total());
  r.sensitivity = ratio(m.tp, m.tp + m.fn);
  r.specificity = ratio(m.tn, m.tn + m.fp);
  r.precision = ratio(m.tp, m.tp + m.fp);
  r.f1 = ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn);
  return r;
}

namespace {

ConfusionMatrix tally(std::span<const ImageRecord> records, double conf_threshold) {
  ConfusionMatrix m;
  for (const auto& r : records) {
    const Diagnosis d = classify_image(r, conf_threshold);
    if (d.gt_positive) {
      ++(d.predicted_positive ? m.tp : m.fn);
    } else {
      ++(d.predicted_positive ? m.fp : m.tn);
    }
  }
  return m;
}

}  // namespace

ScreeningReport screen_dataset(std::span<const ImageRecord> records, double conf_threshold) {
  if (records.empty()) throw Error(ErrorKind::kUsage, "cannot screen an empty record list");
  return report_from_matrix(tally(records, conf_threshold));
}

std::vector<SweepEntry> threshold_sweep(std::span<const ImageRecord> records,
                                        std::span<const double> thresholds) {
  if (records.empty()) throw Error(ErrorKind::kUsage, "cannot screen an empty record list");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw Error(ErrorKind::kUsage, "sweep thresholds must be ascending");
  }
  std::vector<SweepEntry> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) out.push_back({t, report_from_matrix(tally(records, t))});
  return out;
}

}  // namespace mycoeval
