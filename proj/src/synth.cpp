#include "mycoeval/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "mycoeval/error.hpp"
#include "mycoeval/random.hpp"

using ordered_json = nlohmann::ordered_json;

namespace mycoeval {

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kGeneration, what); };
  if (n_images < 1) fail("n_images must be positive");
  try {
    frame.validate();
    op.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  for (const auto& r : {fungal_per_image, artefact_per_image}) {
    if (r.min < 0 || r.max < r.min) fail("per-image count ranges must satisfy 0 <= min <= max");
  }
  for (double p : {tp_rate, fp_extra_rate, suppressed_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("rates must lie in [0, 1]");
  }
  if (!(iou_mean > 0.0 && iou_mean <= 1.0)) fail("iou_mean must lie in (0, 1]");
  if (!(iou_spread >= 0.0)) fail("iou_spread must be non-negative");
  if (iou_mean + iou_spread < op.iou_threshold) {
    fail("planted IoU range lies entirely below the IoU threshold");
  }
  auto conf_range = [&](double lo, double hi, const char* name) {
    if (!(lo > op.conf_threshold + 0.005 && hi >= lo && hi <= 1.0)) {
      fail(fmt::format("{} confidences must lie above the confidence threshold", name));
    }
  };
  conf_range(tp_conf_min, tp_conf_max, "true-positive");
  conf_range(fp_conf_min, fp_conf_max, "false-positive");
}

ClassCounts SynthTruth::planted_counts(ClassId c) const {
  ClassCounts out;
  for (const auto& img : images) {
    for (const auto& p : img.predictions) {
      if (p.class_id != c) continue;
      if (p.role == PlantedRole::kTruePositive) ++out.tp;
      if (p.role == PlantedRole::kFalsePositive) ++out.fp;
    }
    for (std::size_t g : img.fn_gt_indices) {
      if (img.gt_classes[g] == c) ++out.fn;
    }
  }
  return out;
}

std::optional<double> SynthTruth::planted_mean_iou(std::optional<ClassId> c) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& img : images) {
    for (const auto& p : img.predictions) {
      if (p.role != PlantedRole::kTruePositive || (c && p.class_id != *c)) continue;
      sum += p.planted_iou;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

namespace {

constexpr int kPlacementAttempts = 400;
constexpr int kImageAttempts = 25;
// Clearance between a planted false positive and same-class ground truth.
constexpr double kClearance = 2.0;

enum class ItemKind { kMatchedGt, kMissedGt, kFalsePositive, kSuppressed };

struct Item {
  ItemKind kind;
  ClassId class_id;
};

struct Knobs {
  double iou_lo;
  double iou_hi;
  double tp_conf_lo;
  double tp_conf_hi;
  double fp_conf_lo;
  double fp_conf_hi;
  OperatingPoint op;
};

Knobs knobs_from(const SynthSpec& s) {
  const double floor_iou = s.op.iou_threshold + 0.005;
  Knobs k;
  k.iou_lo = std::clamp(s.iou_mean - s.iou_spread, floor_iou, 1.0);
  k.iou_hi = std::clamp(s.iou_mean + s.iou_spread, floor_iou, 1.0);
  k.tp_conf_lo = s.tp_conf_min;
  k.tp_conf_hi = s.tp_conf_max;
  k.fp_conf_lo = s.fp_conf_min;
  k.fp_conf_hi = s.fp_conf_max;
  k.op = s.op;
  return k;
}

struct Size {
  double w;
  double h;
};

Size sample_size(Stream& rng, ClassId c, const ImageDims& frame) {
  const double unit = std::min(frame.width, frame.height) / 1024.0;
  if (c == ClassId::kFungal) {
    const double length = rng.uniform(80.0, 260.0) * unit;
    const double aspect = rng.uniform(4.0, 10.0);
    const double thickness = std::max(length / aspect, 8.0 * unit);
    return rng.bernoulli(0.5) ? Size{length, thickness} : Size{thickness, length};
  }
  const double side = rng.uniform(30.0, 120.0) * unit;
  const double aspect = rng.uniform(1.0, 2.0);
  return rng.bernoulli(0.5) ? Size{side, side / aspect} : Size{side / aspect, side};
}

bool intersects(const Box& a, const Box& b, double margin) {
  return a.x_min() < b.x_max() + margin && b.x_min() < a.x_max() + margin &&
         a.y_min() < b.y_max() + margin && b.y_min() < a.y_max() + margin;
}

Box guard_of(const Box& b) {
  return Box(b.x_min() - b.width() / 2.0, b.y_min() - b.height() / 2.0,
             b.x_max() + b.width() / 2.0, b.y_max() + b.height() / 2.0, b.class_id());
}

/// Shifts `gt` along a random direction by the displacement whose IoU with
/// `gt` equals `target`, found by bisection (IoU falls monotonically with
/// the displacement).
Box perturb_to_iou(const Box& gt, double target, Stream& rng, double confidence) {
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ux = std::cos(angle);
  const double uy = std::sin(angle);
  auto shifted = [&](double d) {
    return Box(gt.x_min() + d * ux, gt.y_min() + d * uy, gt.x_max() + d * ux,
               gt.y_max() + d * uy, gt.class_id(), confidence);
  };
  if (target >= 1.0) return shifted(0.0);
  double lo = 0.0;
  double hi = 2.0 * (gt.width() + gt.height());
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (iou(shifted(mid), gt) > target ? lo : hi) = mid;
  }
  return shifted(0.5 * (lo + hi));
}

struct ImageResult {
  ImageRecord record;
  PlantedImage planted;
};

std::optional<ImageResult> try_build(const std::string& image_id, const ImageDims& frame,
                                     const std::vector<Item>& items, const Knobs& k,
                                     Stream& rng) {
  ImageResult out;
  out.record.image_id = image_id;
  out.record.dims = frame;
  out.planted.image_id = image_id;
  std::vector<Box> guards;

  struct PendingPred {
    Box box;
    PlantedPrediction planted;
  };
  std::vector<PendingPred> preds;

  // Ground truth first: each box and its guard zone stay inside the frame,
  // and guard zones never overlap, so a planted true positive cannot touch
  // any other ground truth.
  for (const Item& item : items) {
    if (item.kind != ItemKind::kMatchedGt && item.kind != ItemKind::kMissedGt) continue;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Size sz = sample_size(rng, item.class_id, frame);
      const double x_lo = sz.w / 2.0;
      const double x_hi = frame.width - 1.5 * sz.w;
      const double y_lo = sz.h / 2.0;
      const double y_hi = frame.height - 1.5 * sz.h;
      if (x_hi <= x_lo || y_hi <= y_lo) continue;
      const double x0 = rng.uniform(x_lo, x_hi);
      const double y0 = rng.uniform(y_lo, y_hi);
      const Box gt(x0, y0, x0 + sz.w, y0 + sz.h, item.class_id);
      const Box guard = guard_of(gt);
      if (std::any_of(guards.begin(), guards.end(),
                      [&](const Box& g) { return intersects(g, guard, kClearance); })) {
        continue;
      }
      guards.push_back(guard);
      const std::size_t gt_index = out.record.ground_truth.size();
      out.record.ground_truth.push_back(gt);
      out.planted.gt_classes.push_back(item.class_id);
      placed = true;
      if (item.kind == ItemKind::kMissedGt) {
        out.planted.fn_gt_indices.push_back(gt_index);
        continue;
      }
      const double target = rng.uniform(k.iou_lo, k.iou_hi);
      const double conf = rng.uniform(k.tp_conf_lo, k.tp_conf_hi);
      const Box pred = perturb_to_iou(gt, target, rng, conf);
      PlantedPrediction pp;
      pp.class_id = item.class_id;
      pp.role = PlantedRole::kTruePositive;
      pp.gt_index = gt_index;
      pp.target_iou = target;
      pp.planted_iou = iou(pred, gt);
      preds.push_back({pred, pp});
    }
    if (!placed) return std::nullopt;
  }

  for (const Item& item : items) {
    if (item.kind != ItemKind::kFalsePositive && item.kind != ItemKind::kSuppressed) continue;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Size sz = sample_size(rng, item.class_id, frame);
      if (sz.w >= frame.width || sz.h >= frame.height) continue;
      const double x0 = rng.uniform(0.0, frame.width - sz.w);
      const double y0 = rng.uniform(0.0, frame.height - sz.h);
      const bool fp = item.kind == ItemKind::kFalsePositive;
      const double conf = fp ? rng.uniform(k.fp_conf_lo, k.fp_conf_hi)
                             : rng.uniform(0.01, std::max(0.011, k.op.conf_threshold - 0.01));
      const Box pred(x0, y0, x0 + sz.w, y0 + sz.h, item.class_id, conf);
      if (fp && std::any_of(out.record.ground_truth.begin(), out.record.ground_truth.end(),
                            [&](const Box& g) {
                              return g.class_id() == item.class_id &&
                                     intersects(g, pred, kClearance);
                            })) {
        continue;
      }
      PlantedPrediction pp;
      pp.class_id = item.class_id;
      pp.role = fp ? PlantedRole::kFalsePositive : PlantedRole::kSuppressed;
      preds.push_back({pred, pp});
      placed = true;
    }
    if (!placed) return std::nullopt;
  }

  // Present predictions in random order so input order carries no signal.
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    PendingPred& p = preds[order[slot]];
    p.planted.pred_index = slot;
    out.record.predictions.push_back(p.box);
    out.planted.predictions.push_back(p.planted);
  }
  std::sort(out.planted.predictions.begin(), out.planted.predictions.end(),
            [](const PlantedPrediction& a, const PlantedPrediction& b) {
              return a.pred_index < b.pred_index;
            });
  return out;
}

ImageResult build_image(const std::string& image_id, const ImageDims& frame,
                        const std::vector<Item>& items, const Knobs& k, Stream& rng) {
  for (int attempt = 0; attempt < kImageAttempts; ++attempt) {
    if (auto r = try_build(image_id, frame, items, k, rng)) return std::move(*r);
  }
  throw Error(ErrorKind::kGeneration,
              fmt::format("could not place {} boxes in the {}x{} frame of '{}'", items.size(),
                          frame.width, frame.height, image_id));
}

std::string synth_id(std::size_t i) { return fmt::format("synth_{:05d}", i); }

SynthCohort assemble(std::vector<ImageResult> images, const OperatingPoint& op) {
  SynthCohort cohort;
  cohort.truth.op = op;
  std::vector<ImageRecord> records;
  records.reserve(images.size());
  for (auto& img : images) {
    records.push_back(std::move(img.record));
    cohort.truth.images.push_back(std::move(img.planted));
  }
  cohort.dataset = Dataset(std::move(records));
  return cohort;
}

Knobs planted_knobs(const ImageDims& frame) {
  SynthSpec s;
  s.frame = frame;
  return knobs_from(s);
}

}  // namespace

SynthCohort generate(const SynthSpec& spec) {
  spec.validate();
  const Knobs k = knobs_from(spec);
  std::vector<ImageResult> images;
  images.reserve(static_cast<std::size_t>(spec.n_images));
  for (int i = 0; i < spec.n_images; ++i) {
    Stream rng(spec.seed, static_cast<std::uint64_t>(i));
    std::vector<Item> items;
    const int n_fungal = rng.between(spec.fungal_per_image.min, spec.fungal_per_image.max);
    const int n_artefact =
        rng.between(spec.artefact_per_image.min, spec.artefact_per_image.max);
    auto add_gt = [&](ClassId c) {
      items.push_back({rng.bernoulli(spec.tp_rate) ? ItemKind::kMatchedGt : ItemKind::kMissedGt,
                       c});
    };
    for (int j = 0; j < n_fungal; ++j) add_gt(ClassId::kFungal);
    for (int j = 0; j < n_artefact; ++j) add_gt(ClassId::kArtefact);
    const int fp_trials = std::max(1, n_fungal + n_artefact);
    for (int j = 0; j < fp_trials; ++j) {
      if (rng.bernoulli(spec.fp_extra_rate)) {
        items.push_back({ItemKind::kFalsePositive,
                         rng.bernoulli(0.5) ? ClassId::kFungal : ClassId::kArtefact});
      }
    }
    if (rng.bernoulli(spec.suppressed_rate)) {
      items.push_back(
          {ItemKind::kSuppressed, rng.bernoulli(0.5) ? ClassId::kFungal : ClassId::kArtefact});
    }
    images.push_back(build_image(synth_id(static_cast<std::size_t>(i)), spec.frame, items, k, rng));
  }
  return assemble(std::move(images), spec.op);
}

SynthCohort plant_object_counts(const ClassCounts& counts, const ImageDims& frame,
                                std::uint64_t seed) {
  frame.validate();
  std::vector<Item> pool;
  pool.insert(pool.end(), counts.tp, {ItemKind::kMatchedGt, ClassId::kFungal});
  pool.insert(pool.end(), counts.fn, {ItemKind::kMissedGt, ClassId::kFungal});
  pool.insert(pool.end(), counts.fp, {ItemKind::kFalsePositive, ClassId::kFungal});
  Stream order_rng(seed, ~std::uint64_t{0});
  order_rng.shuffle(std::span<Item>(pool));

  constexpr std::size_t kPerImage = 4;
  const Knobs k = planted_knobs(frame);
  std::vector<ImageResult> images;
  for (std::size_t start = 0, i = 0; start < pool.size(); start += kPerImage, ++i) {
    const std::vector<Item> items(pool.begin() + static_cast<std::ptrdiff_t>(start),
                                  pool.begin() + static_cast<std::ptrdiff_t>(
                                                     std::min(pool.size(), start + kPerImage)));
    Stream rng(seed, i);
    images.push_back(build_image(synth_id(i), frame, items, k, rng));
  }
  return assemble(std::move(images), k.op);
}

SynthCohort plant_screening_matrix(const ConfusionMatrix& matrix, const ImageDims& frame,
                                   std::uint64_t seed) {
  frame.validate();
  enum class Cell { kTp, kFn, kFp, kTn };
  std::vector<Cell> cells;
  cells.insert(cells.end(), matrix.tp, Cell::kTp);
  cells.insert(cells.end(), matrix.fn, Cell::kFn);
  cells.insert(cells.end(), matrix.fp, Cell::kFp);
  cells.insert(cells.end(), matrix.tn, Cell::kTn);
  Stream order_rng(seed, ~std::uint64_t{0});
  order_rng.shuffle(std::span<Cell>(cells));

  const Knobs k = planted_knobs(frame);
  std::vector<ImageResult> images;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    Stream rng(seed, i);
    std::vector<Item> items;
    switch (cells[i]) {
      case Cell::kTp:
        items.push_back({ItemKind::kMatchedGt, ClassId::kFungal});
        break;
      case Cell::kFn:
        items.push_back({ItemKind::kMissedGt, ClassId::kFungal});
        items.push_back({ItemKind::kSuppressed, ClassId::kFungal});
        break;
      case Cell::kFp:
        items.push_back({ItemKind::kFalsePositive, ClassId::kFungal});
        break;
      case Cell::kTn:
        // Negative frames often still show mimics.
        if (rng.bernoulli(0.5)) items.push_back({ItemKind::kMatchedGt, ClassId::kArtefact});
        break;
    }
    images.push_back(build_image(synth_id(i), frame, items, k, rng));
  }
  return assemble(std::move(images), k.op);
}

// ---------------------------------------------------------------------------
// Serialization

SynthSpec parse_synth_spec(std::string_view document) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document);
  } catch (const ordered_json::parse_error& e) {
    throw Error(ErrorKind::kSchema, fmt::format("malformed synth spec: {}", e.what()));
  }
  if (!doc.is_object()) throw Error(ErrorKind::kSchema, "synth spec must be an object");
  SynthSpec s;
  try {
    auto num = [&](const char* key, double& dst) {
      if (doc.contains(key)) dst = doc.at(key).get<double>();
    };
    auto range = [&](const char* key, CountRange& dst) {
      if (doc.contains(key)) {
        dst.min = doc.at(key).at(0).get<int>();
        dst.max = doc.at(key).at(1).get<int>();
      }
    };
    if (doc.contains("n_images")) s.n_images = doc.at("n_images").get<int>();
    if (doc.contains("frame")) {
      s.frame.width = doc.at("frame").at(0).get<int>();
      s.frame.height = doc.at("frame").at(1).get<int>();
    }
    range("fungal_per_image", s.fungal_per_image);
    range("artefact_per_image", s.artefact_per_image);
    num("tp_rate", s.tp_rate);
    num("fp_extra_rate", s.fp_extra_rate);
    num("suppressed_rate", s.suppressed_rate);
    num("iou_mean", s.iou_mean);
    num("iou_spread", s.iou_spread);
    num("tp_conf_min", s.tp_conf_min);
    num("tp_conf_max", s.tp_conf_max);
    num("fp_conf_min", s.fp_conf_min);
    num("fp_conf_max", s.fp_conf_max);
    num("conf_threshold", s.op.conf_threshold);
    num("iou_threshold", s.op.iou_threshold);
    if (doc.contains("seed")) s.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::kSchema, fmt::format("bad synth spec field: {}", e.what()));
  }
  s.validate();
  return s;
}

std::string serialize_synth_spec(const SynthSpec& s) {
  ordered_json doc = {
      {"n_images", s.n_images},
      {"frame", {s.frame.width, s.frame.height}},
      {"fungal_per_image", {s.fungal_per_image.min, s.fungal_per_image.max}},
      {"artefact_per_image", {s.artefact_per_image.min, s.artefact_per_image.max}},
      {"tp_rate", s.tp_rate},
      {"fp_extra_rate", s.fp_extra_rate},
      {"suppressed_rate", s.suppressed_rate},
      {"iou_mean", s.iou_mean},
      {"iou_spread", s.iou_spread},
      {"tp_conf_min", s.tp_conf_min},
      {"tp_conf_max", s.tp_conf_max},
      {"fp_conf_min", s.fp_conf_min},
      {"fp_conf_max", s.fp_conf_max},
      {"conf_threshold", s.op.conf_threshold},
      {"iou_threshold", s.op.iou_threshold},
      {"seed", s.seed}};
  return doc.dump(2) + "\n";
}

namespace {

const char* role_name(PlantedRole r) {
  switch (r) {
    case PlantedRole::kTruePositive: return "tp";
    case PlantedRole::kFalsePositive: return "fp";
    case PlantedRole::kSuppressed: return "suppressed";
  }
  return "?";
}

ordered_json counts_json(const ClassCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
}

}  // namespace

std::string serialize_truth(const SynthTruth& truth) {
  ordered_json doc;
  doc["operating_point"] = {{"conf", truth.op.conf_threshold}, {"iou", truth.op.iou_threshold}};
  doc["planted"] = {{"fungal", counts_json(truth.planted_counts(ClassId::kFungal))},
                    {"artefact", counts_json(truth.planted_counts(ClassId::kArtefact))}};
  const auto mean = truth.planted_mean_iou(ClassId::kFungal);
  doc["planted_mean_iou_fungal"] = mean ? ordered_json(*mean) : ordered_json(nullptr);
  ordered_json images = ordered_json::array();
  for (const auto& img : truth.images) {
    ordered_json preds = ordered_json::array();
    for (const auto& p : img.predictions) {
      ordered_json e = {{"pred_index", p.pred_index},
                        {"class", class_name(p.class_id)},
                        {"role", role_name(p.role)}};
      if (p.gt_index) {
        e["gt_index"] = *p.gt_index;
        e["target_iou"] = p.target_iou;
        e["planted_iou"] = p.planted_iou;
      }
      preds.push_back(std::move(e));
    }
    images.push_back({{"image_id", img.image_id},
                      {"predictions", preds},
                      {"fn_gt_indices", img.fn_gt_indices}});
  }
  doc["images"] = images;
  return doc.dump(2) + "\n";
}

}  // namespace mycoeval
