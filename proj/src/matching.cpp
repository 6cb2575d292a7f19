#include "mycoeval/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "mycoeval/error.hpp"

namespace mycoeval {

void OperatingPoint::validate() const {
  auto in_range = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_range(conf_threshold) || !in_range(iou_threshold)) {
    throw Error(ErrorKind::kUsage,
                fmt::format("thresholds must lie in (0, 1], got conf {} iou {}", conf_threshold,
                            iou_threshold));
  }
}

namespace {

struct Candidate {
  std::size_t gt_index;
  double iou;
};

struct PendingPred {
  std::size_t index;
  double confidence;
  double best_iou;
  std::vector<Candidate> candidates;  // iou >= threshold, best first
};

MatchReport match_impl(std::span<const Box> gts, std::span<const Box> preds,
                       double iou_threshold, double conf_floor, bool use_floor) {
  MatchReport report;
  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<bool> pred_is_fp(preds.size(), false);

  for (int c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ClassId>(c);
    std::vector<std::size_t> class_gts;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id() == cls) class_gts.push_back(g);
    }
    std::vector<PendingPred> pending;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (preds[p].class_id() != cls) continue;
      const double conf = preds[p].confidence().value_or(0.0);
      if (use_floor && !(conf >= conf_floor)) {
        report.discarded_pred_indices.push_back(p);
        continue;
      }
      PendingPred pp{p, conf, 0.0, {}};
      for (std::size_t g : class_gts) {
        const double v = iou(preds[p], gts[g]);
        pp.best_iou = std::max(pp.best_iou, v);
        if (v >= iou_threshold) pp.candidates.push_back({g, v});
      }
      std::sort(pp.candidates.begin(), pp.candidates.end(),
                [](const Candidate& a, const Candidate& b) {
                  return a.iou != b.iou ? a.iou > b.iou : a.gt_index < b.gt_index;
                });
      pending.push_back(std::move(pp));
    }
    std::sort(pending.begin(), pending.end(), [](const PendingPred& a, const PendingPred& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.best_iou != b.best_iou) return a.best_iou > b.best_iou;
      return a.index < b.index;
    });

    ClassCounts& counts = report.per_class[c];
    for (const auto& pp : pending) {
      const auto hit = std::find_if(pp.candidates.begin(), pp.candidates.end(),
                                    [&](const Candidate& cd) { return !gt_taken[cd.gt_index]; });
      if (hit == pp.candidates.end()) {
        pred_is_fp[pp.index] = true;
        ++counts.fp;
      } else {
        gt_taken[hit->gt_index] = true;
        report.tp_pairs.push_back({hit->gt_index, pp.index, hit->iou, cls});
        ++counts.tp;
      }
    }
    for (std::size_t g : class_gts) {
      if (!gt_taken[g]) ++counts.fn;
    }
  }

  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (pred_is_fp[p]) report.fp_pred_indices.push_back(p);
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_taken[g]) report.fn_gt_indices.push_back(g);
  }
  std::sort(report.discarded_pred_indices.begin(), report.discarded_pred_indices.end());
  std::sort(report.tp_pairs.begin(), report.tp_pairs.end(),
            [](const TpPair& a, const TpPair& b) { return a.gt_index < b.gt_index; });
  return report;
}

}  // namespace

MatchReport match_image(std::span<const Box> gts, std::span<const Box> preds,
                        const OperatingPoint& op) {
  op.validate();
  return match_impl(gts, preds, op.iou_threshold, op.conf_threshold, true);
}

MatchReport match_all(std::span<const Box> gts, std::span<const Box> preds,
                      double iou_threshold) {
  return match_impl(gts, preds, iou_threshold, 0.0, false);
}

PrfScores counts_to_prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfScores s;
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

PrCurve pr_curve(std::span<const ImageRecord> images, ClassId class_id, double iou_threshold) {
  PrCurve curve;
  curve.class_id = class_id;
  curve.iou_threshold = iou_threshold;

  struct Scored {
    double confidence;
    bool tp;
  };
  std::vector<Scored> pooled;
  for (const auto& img : images) {
    for (const auto& g : img.ground_truth) {
      if (g.class_id() == class_id) ++curve.num_gt;
    }
    const MatchReport m = match_all(img.ground_truth, img.predictions, iou_threshold);
    std::vector<bool> is_tp(img.predictions.size(), false);
    for (const auto& pair : m.tp_pairs) is_tp[pair.pred_index] = true;
    for (std::size_t p = 0; p < img.predictions.size(); ++p) {
      if (img.predictions[p].class_id() != class_id) continue;
      pooled.push_back({img.predictions[p].confidence().value_or(0.0), is_tp[p]});
    }
  }
  if (curve.num_gt == 0) {
    throw Error(ErrorKind::kUndefinedRecall,
                fmt::format("no {} ground truth; recall is undefined", class_name(class_id)));
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const Scored& a, const Scored& b) { return a.confidence > b.confidence; });

  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    tp += pooled[i].tp ? 1 : 0;
    ++seen;
    const bool last_of_level = i + 1 == pooled.size() || pooled[i + 1].confidence != pooled[i].confidence;
    if (!last_of_level) continue;
    curve.points.push_back({pooled[i].confidence,
                            static_cast<double>(tp) / static_cast<double>(seen),
                            static_cast<double>(tp) / static_cast<double>(curve.num_gt)});
  }
  return curve;
}

std::array<double, 10> coco_iou_thresholds() {
  std::array<double, 10> t{};
  // Integer numerators keep 0.70 etc. bit-equal to their literals.
  for (int k = 0; k < 10; ++k) t[k] = (50.0 + 5.0 * k) / 100.0;
  return t;
}

ApSweep ap_sweep(std::span<const ImageRecord> images, ClassId class_id, Interpolation mode) {
  ApSweep out;
  const auto thresholds = coco_iou_thresholds();
  double sum = 0.0;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    out.per_threshold[k] = average_precision(pr_curve(images, class_id, thresholds[k]), mode);
    sum += out.per_threshold[k];
  }
  out.ap50 = out.per_threshold[0];
  out.ap50_95 = sum / static_cast<double>(thresholds.size());
  return out;
}

double mean_matched_iou(std::span<const MatchReport> reports, std::optional<ClassId> class_id) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : reports) {
    for (const auto& pair : r.tp_pairs) {
      if (class_id && pair.class_id != *class_id) continue;
      sum += pair.iou;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorKind::kUndefinedMean, "no true-positive pairs to average");
  return sum / static_cast<double>(n);
}

namespace {

std::optional<double> mean_of_present(std::initializer_list<std::optional<double>> values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace

ObjectMetrics evaluate_objects(const Dataset& dataset, const OperatingPoint& op,
                               Interpolation mode) {
  op.validate();
  const Dataset ordered = dataset.sorted();
  std::vector<MatchReport> reports;
  reports.reserve(ordered.size());
  for (const auto& r : ordered.records()) {
    reports.push_back(match_image(r.ground_truth, r.predictions, op));
  }

  ObjectMetrics out;
  std::array<bool, kNumClasses> present{};
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ClassId>(c);
    ClassMetrics& m = out.per_class[c];
    for (const auto& rep : reports) m.counts += rep.counts(cls);
    m.prf = counts_to_prf(m.counts.tp, m.counts.fp, m.counts.fn);
    present[c] = m.counts.tp + m.counts.fp + m.counts.fn > 0;
    try {
      m.mean_iou = mean_matched_iou(reports, cls);
    } catch (const Error&) {
      m.mean_iou.reset();
    }
    try {
      const ApSweep sweep = ap_sweep(ordered.records(), cls, mode);
      m.ap50 = sweep.ap50;
      m.ap50_95 = sweep.ap50_95;
    } catch (const Error&) {
      m.ap50.reset();
      m.ap50_95.reset();
    }
  }

  // Macro values average the classes that have any ground truth or kept
  // predictions; a class absent from the data would otherwise count as 0.
  int n_present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (!present[c]) continue;
    ++n_present;
    out.macro.prf.precision += out.per_class[c].prf.precision;
    out.macro.prf.recall += out.per_class[c].prf.recall;
    out.macro.prf.f1 += out.per_class[c].prf.f1;
  }
  if (n_present > 0) {
    out.macro.prf.precision /= n_present;
    out.macro.prf.recall /= n_present;
    out.macro.prf.f1 /= n_present;
  }
  const auto& f = out.per_class[0];
  const auto& a = out.per_class[1];
  out.macro.ap50 = mean_of_present({f.ap50, a.ap50});
  out.macro.ap50_95 = mean_of_present({f.ap50_95, a.ap50_95});
  out.macro.mean_iou = mean_of_present({f.mean_iou, a.mean_iou});
  return out;
}

}  // namespace mycoeval
