#include <algorithm>

#include "mycoeval/synth.hpp"

namespace mycoeval {

MatchReport reference_match(std::span<const Box> gts, std::span<const Box> preds,
                            const OperatingPoint& op) {
  op.validate();
  MatchReport report;
  std::vector<bool> pred_done(preds.size(), false);
  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<bool> pred_fp(preds.size(), false);

  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (!op.keeps(*preds[p].confidence())) {
      pred_done[p] = true;
      report.discarded_pred_indices.push_back(p);
    }
  }

  auto best_iou_of = [&](std::size_t p) {
    double best = 0.0;
    for (const auto& g : gts) {
      if (g.class_id() == preds[p].class_id()) best = std::max(best, iou(preds[p], g));
    }
    return best;
  };

  for (;;) {
    // Highest confidence, then highest best-IoU, then earliest input.
    std::optional<std::size_t> next;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      if (pred_done[p]) continue;
      if (!next) {
        next = p;
        continue;
      }
      const double c = *preds[p].confidence();
      const double cn = *preds[*next].confidence();
      if (c > cn || (c == cn && best_iou_of(p) > best_iou_of(*next))) next = p;
    }
    if (!next) break;
    const std::size_t p = *next;
    pred_done[p] = true;

    std::optional<std::size_t> best_gt;
    double best = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g] || gts[g].class_id() != preds[p].class_id()) continue;
      const double v = iou(preds[p], gts[g]);
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    const auto cls = static_cast<int>(preds[p].class_id());
    if (best_gt && op.overlaps(best)) {
      gt_taken[*best_gt] = true;
      report.tp_pairs.push_back({*best_gt, p, best, preds[p].class_id()});
      ++report.per_class[cls].tp;
    } else {
      pred_fp[p] = true;
      report.fp_pred_indices.push_back(p);
      ++report.per_class[cls].fp;
    }
  }

  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_taken[g]) {
      report.fn_gt_indices.push_back(g);
      ++report.per_class[static_cast<int>(gts[g].class_id())].fn;
    }
  }
  std::sort(report.fp_pred_indices.begin(), report.fp_pred_indices.end());
  std::sort(report.tp_pairs.begin(), report.tp_pairs.end(),
            [](const TpPair& a, const TpPair& b) { return a.gt_index < b.gt_index; });
  return report;
}

double reference_ap(const PrCurve& curve) {
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    double envelope = 0.0;
    for (const auto& p : curve.points) {
      if (p.recall >= level) envelope = std::max(envelope, p.precision);
    }
    sum += envelope;
  }
  return sum / 101.0;
}

}  // namespace mycoeval
