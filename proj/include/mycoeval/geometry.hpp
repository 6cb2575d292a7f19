#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace mycoeval {

enum class ClassId : std::uint8_t { kFungal = 0, kArtefact = 1 };

inline constexpr int kNumClasses = 2;

std::string_view class_name(ClassId id);
/// Throws Error(kClass) for ids other than 0 and 1.
ClassId class_from_index(long index);
/// Throws Error(kSchema) for names other than "fungal" and "artefact".
ClassId class_from_name(std::string_view name);

struct ImageDims {
  int width = 0;
  int height = 0;

  /// Throws Error(kInvalidDims) unless both sides are at least one pixel.
  void validate() const;

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Axis-aligned, corner-format box in continuous pixel coordinates.
///
/// Zero-area, inverted and non-finite boxes are rejected at construction
/// (Error kInvalidBox), as is a confidence outside [0, 1] (Error kRange).
/// Ground-truth boxes carry no confidence.
class Box {
 public:
  Box(double x_min, double y_min, double x_max, double y_max, ClassId class_id,
      std::optional<double> confidence = std::nullopt);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }
  ClassId class_id() const noexcept { return class_id_; }
  const std::optional<double>& confidence() const noexcept { return confidence_; }

  /// Same geometry and class, new confidence.
  Box with_confidence(std::optional<double> confidence) const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
  ClassId class_id_;
  std::optional<double> confidence_;
};

/// Intersection over union. Symmetric, in [0, 1], 0 for disjoint interiors.
double iou(const Box& a, const Box& b) noexcept;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform scale plus symmetric (possibly fractional) padding that places
/// a source frame inside a target frame without changing its aspect ratio.
struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
  ImageDims source;
  ImageDims target;

  Point to_model(Point p) const noexcept;
  Point to_source(Point p) const noexcept;
};

LetterboxTransform letterbox_fit(const ImageDims& source, const ImageDims& target);

/// Maps a source-frame box into the model frame and clips it to the target.
/// Throws Error(kOutOfFrame) if nothing of the box remains after clipping.
Box box_to_model(const Box& b, const LetterboxTransform& t);

/// Inverse of box_to_model; clips to the source frame.
Box box_to_source(const Box& b, const LetterboxTransform& t);

}  // namespace mycoeval
