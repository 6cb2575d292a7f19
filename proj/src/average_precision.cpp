#include <algorithm>

#include "mycoeval/matching.hpp"

namespace mycoeval {

namespace {

/// Precision made non-increasing in recall: each point takes the best
/// precision reachable at equal or higher recall.
std::vector<double> precision_envelope(const PrCurve& curve) {
  std::vector<double> env(curve.points.size());
  double running = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    env[i] = running;
  }
  return env;
}

}  // namespace

double average_precision(const PrCurve& curve, Interpolation mode) {
  if (curve.points.empty()) return 0.0;
  const std::vector<double> env = precision_envelope(curve);

  if (mode == Interpolation::kAllPoints) {
    double area = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
      area += (curve.points[i].recall - prev_recall) * env[i];
      prev_recall = curve.points[i].recall;
    }
    return area;
  }

  double sum = 0.0;
  auto it = curve.points.begin();
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    it = std::lower_bound(it, curve.points.end(), level,
                          [](const PrPoint& p, double r) { return p.recall < r; });
    if (it == curve.points.end()) break;
    sum += env[static_cast<std::size_t>(it - curve.points.begin())];
  }
  return sum / 101.0;
}

}  // namespace mycoeval
