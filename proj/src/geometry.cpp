#include "mycoeval/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mycoeval/error.hpp"

namespace mycoeval {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidBox: return "invalid-box";
    case ErrorKind::kInvalidDims: return "invalid-dims";
    case ErrorKind::kOutOfFrame: return "out-of-frame";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kClass: return "class";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kReferential: return "referential";
    case ErrorKind::kUndefinedRecall: return "undefined-recall";
    case ErrorKind::kUndefinedMean: return "undefined-mean";
    case ErrorKind::kGeneration: return "generation";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

std::string_view class_name(ClassId id) {
  return id == ClassId::kFungal ? "fungal" : "artefact";
}

ClassId class_from_index(long index) {
  if (index == 0) return ClassId::kFungal;
  if (index == 1) return ClassId::kArtefact;
  throw Error(ErrorKind::kClass, fmt::format("unknown class id {}", index));
}

ClassId class_from_name(std::string_view name) {
  if (name == "fungal") return ClassId::kFungal;
  if (name == "artefact") return ClassId::kArtefact;
  throw Error(ErrorKind::kSchema, fmt::format("unknown category name '{}'", name));
}

void ImageDims::validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kInvalidDims,
                fmt::format("image dims must be positive, got {}x{}", width, height));
  }
}

Box::Box(double x_min, double y_min, double x_max, double y_max, ClassId class_id,
         std::optional<double> confidence)
    : x_min_(x_min),
      y_min_(y_min),
      x_max_(x_max),
      y_max_(y_max),
      class_id_(class_id),
      confidence_(confidence) {
  const bool finite = std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
                      std::isfinite(y_max);
  if (!finite || !(x_max > x_min) || !(y_max > y_min)) {
    throw Error(ErrorKind::kInvalidBox,
                fmt::format("box ({}, {}, {}, {}) has no positive area", x_min, y_min, x_max,
                            y_max));
  }
  if (confidence && !(*confidence >= 0.0 && *confidence <= 1.0)) {
    throw Error(ErrorKind::kRange, fmt::format("confidence {} outside [0, 1]", *confidence));
  }
}

Box Box::with_confidence(std::optional<double> confidence) const {
  return Box(x_min_, y_min_, x_max_, y_max_, class_id_, confidence);
}

double iou(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Point LetterboxTransform::to_model(Point p) const noexcept {
  return {p.x * scale + pad_x, p.y * scale + pad_y};
}

Point LetterboxTransform::to_source(Point p) const noexcept {
  return {(p.x - pad_x) / scale, (p.y - pad_y) / scale};
}

LetterboxTransform letterbox_fit(const ImageDims& source, const ImageDims& target) {
  source.validate();
  target.validate();
  LetterboxTransform t;
  t.source = source;
  t.target = target;
  const double sx = static_cast<double>(target.width) / source.width;
  const double sy = static_cast<double>(target.height) / source.height;
  t.scale = std::min(sx, sy);
  // The limiting axis gets exactly zero padding.
  t.pad_x = sx <= sy ? 0.0 : (target.width - t.scale * source.width) / 2.0;
  t.pad_y = sy <= sx ? 0.0 : (target.height - t.scale * source.height) / 2.0;
  return t;
}

namespace {

Box clip_to(double x0, double y0, double x1, double y1, const ImageDims& frame, const Box& like) {
  const double cx0 = std::clamp(x0, 0.0, static_cast<double>(frame.width));
  const double cy0 = std::clamp(y0, 0.0, static_cast<double>(frame.height));
  const double cx1 = std::clamp(x1, 0.0, static_cast<double>(frame.width));
  const double cy1 = std::clamp(y1, 0.0, static_cast<double>(frame.height));
  if (!(cx1 > cx0) || !(cy1 > cy0)) {
    throw Error(ErrorKind::kOutOfFrame,
                fmt::format("box ({}, {}, {}, {}) lies outside the {}x{} frame", x0, y0, x1, y1,
                            frame.width, frame.height));
  }
  return Box(cx0, cy0, cx1, cy1, like.class_id(), like.confidence());
}

}  // namespace

Box box_to_model(const Box& b, const LetterboxTransform& t) {
  const Point lo = t.to_model({b.x_min(), b.y_min()});
  const Point hi = t.to_model({b.x_max(), b.y_max()});
  return clip_to(lo.x, lo.y, hi.x, hi.y, t.target, b);
}

Box box_to_source(const Box& b, const LetterboxTransform& t) {
  const Point lo = t.to_source({b.x_min(), b.y_min()});
  const Point hi = t.to_source({b.x_max(), b.y_max()});
  return clip_to(lo.x, lo.y, hi.x, hi.y, t.source, b);
}

}  // namespace mycoeval
