#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mycoeval/geometry.hpp"

namespace mycoeval {

/// Non-fatal findings (clipped boxes, tiny strata) collected by the loaders.
using Warnings = std::vector<std::string>;

/// One microscopy frame: identity, dimensions, annotations and detections.
struct ImageRecord {
  std::string image_id;
  ImageDims dims;
  std::vector<Box> ground_truth;  // no confidences
  std::vector<Box> predictions;   // confidences required
  /// Explicit image label; when absent, positivity follows fungal annotations.
  std::optional<bool> positive_label;

  bool has_class_gt(ClassId c) const;
};

/// Immutable set of records with unique ids. The constructor enforces the
/// record invariants and throws Error(kSchema) / Error(kInvalidBox).
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<ImageRecord> records);

  std::span<const ImageRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const ImageRecord* find(std::string_view image_id) const;

  /// Copy with records ordered by image_id.
  Dataset sorted() const;

 private:
  std::vector<ImageRecord> records_;
  std::vector<std::string> class_names_{"fungal", "artefact"};
};

// Normalized line format: `class_id cx cy w h` (ground truth) and
// `class_id cx cy w h conf` (predictions), one box per line, fractions of
// the frame size. Boxes overshooting the frame are clipped with a warning.
std::vector<Box> parse_gt_file(std::string_view text, const ImageDims& dims,
                               Warnings* warnings = nullptr);
std::vector<Box> parse_pred_file(std::string_view text, const ImageDims& dims,
                                 Warnings* warnings = nullptr);
std::string serialize_gt_file(std::span<const Box> boxes, const ImageDims& dims);
std::string serialize_pred_file(std::span<const Box> boxes, const ImageDims& dims);

/// COCO-style document with `images`, `annotations` and `categories`.
/// Annotations carrying a `score` are read as predictions.
Dataset parse_coco_json(std::string_view document, Warnings* warnings = nullptr);
std::string serialize_coco_json(const Dataset& dataset);

/// Reads a dataset from disk. `gt_path` is a COCO document or a directory
/// of `<image_id>.txt` line files; `pred_path` (optional) likewise. Line
/// directories take frame sizes from an optional `sizes.txt`
/// (`image_id width height` per line) and fall back to `default_dims`.
/// Images without a prediction file have no predictions; when `pred_path`
/// is given it replaces any scored annotations in a GT document. Prediction
/// files for unknown images are an Error(kReferential).
Dataset load_dataset(const std::filesystem::path& gt_path,
                     const std::optional<std::filesystem::path>& pred_path,
                     const ImageDims& default_dims, Warnings* warnings = nullptr);

/// Writes `gt/`, `pred/` line directories plus `sizes.txt` under `dir`.
void write_line_dataset(const Dataset& dataset, const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);
/// Write-temp-then-rename.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

// ---------------------------------------------------------------------------
// Stratified split

using SplitFractions = std::array<double, 3>;
inline constexpr SplitFractions kDefaultFractions{0.8, 0.1, 0.1};

/// Stratum key of a record; the default keys on (has fungal, has artefact)
/// annotation presence, giving strata 0..3.
using StratumFn = std::function<int(const ImageRecord&)>;
int presence_stratum(const ImageRecord& record);
std::string presence_stratum_name(int stratum);

struct StratumRow {
  int stratum = 0;
  std::size_t total = 0;
  std::array<std::size_t, 3> counts{};
};

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  SplitFractions fractions{};
  std::vector<StratumRow> strata;
};

/// Largest-remainder apportionment of `total` items by `fractions`.
std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitFractions& fractions);

/// Bins images by stratum, shuffles each stratum with a seeded stream and
/// cuts it by `fractions`. Cell sizes are floor or ceil of the exact
/// proportional share, and split totals match the global largest-remainder
/// apportionment. Ids inside each split are sorted.
SplitAssignment stratified_split(const Dataset& dataset, const SplitFractions& fractions,
                                 std::uint64_t seed, Warnings* warnings = nullptr,
                                 const StratumFn& stratum = presence_stratum);

std::string serialize_split(const SplitAssignment& split);

}  // namespace mycoeval
