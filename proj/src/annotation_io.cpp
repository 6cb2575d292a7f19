#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "mycoeval/dataset.hpp"
#include "mycoeval/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mycoeval {

bool ImageRecord::has_class_gt(ClassId c) const {
  return std::any_of(ground_truth.begin(), ground_truth.end(),
                     [c](const Box& b) { return b.class_id() == c; });
}

namespace {

constexpr double kFrameTolerance = 1e-6;

bool inside(const Box& b, const ImageDims& dims) {
  return b.x_min() >= -kFrameTolerance && b.y_min() >= -kFrameTolerance &&
         b.x_max() <= dims.width + kFrameTolerance && b.y_max() <= dims.height + kFrameTolerance;
}

}  // namespace

Dataset::Dataset(std::vector<ImageRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (r.image_id.empty()) throw Error(ErrorKind::kSchema, "empty image id");
    if (!seen.insert(r.image_id).second) {
      throw Error(ErrorKind::kSchema, fmt::format("duplicate image id '{}'", r.image_id));
    }
    r.dims.validate();
    for (const auto& b : r.ground_truth) {
      if (b.confidence()) {
        throw Error(ErrorKind::kSchema,
                    fmt::format("ground truth in '{}' carries a confidence", r.image_id));
      }
      if (!inside(b, r.dims)) {
        throw Error(ErrorKind::kInvalidBox,
                    fmt::format("ground truth in '{}' extends past the {}x{} frame", r.image_id,
                                r.dims.width, r.dims.height));
      }
    }
    for (const auto& b : r.predictions) {
      if (!b.confidence()) {
        throw Error(ErrorKind::kSchema,
                    fmt::format("prediction in '{}' has no confidence", r.image_id));
      }
    }
  }
}

const ImageRecord* Dataset::find(std::string_view image_id) const {
  for (const auto& r : records_) {
    if (r.image_id == image_id) return &r;
  }
  return nullptr;
}

Dataset Dataset::sorted() const {
  auto copy = records_;
  std::sort(copy.begin(), copy.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  Dataset d;
  d.records_ = std::move(copy);
  d.class_names_ = class_names_;
  return d;
}

// ---------------------------------------------------------------------------
// Line format

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw LineError(ErrorKind::kParse, line_no, fmt::format("'{}' is not a number", field));
  }
  return value;
}

long parse_class(std::string_view field, std::size_t line_no) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw LineError(ErrorKind::kParse, line_no, fmt::format("'{}' is not a class id", field));
  }
  return value;
}

std::vector<Box> parse_lines(std::string_view text, const ImageDims& dims, bool with_conf,
                             Warnings* warnings) {
  dims.validate();
  const std::size_t expected = with_conf ? 6 : 5;
  std::vector<Box> boxes;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = split_fields(line);
    if (fields.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (fields.size() != expected) {
      throw LineError(ErrorKind::kParse, line_no,
                      fmt::format("expected {} fields, found {}", expected, fields.size()));
    }
    const long cls_index = parse_class(fields[0], line_no);
    std::array<double, 5> v{};
    for (std::size_t k = 1; k < expected; ++k) {
      v[k - 1] = parse_number(fields[k], line_no);
      if (v[k - 1] < 0.0 || v[k - 1] > 1.0) {
        throw LineError(ErrorKind::kRange, line_no,
                        fmt::format("value {} outside [0, 1]", fields[k]));
      }
    }
    ClassId cls;
    try {
      cls = class_from_index(cls_index);
    } catch (const Error& e) {
      throw LineError(ErrorKind::kClass, line_no, e.what());
    }
    const double w = dims.width;
    const double h = dims.height;
    double x0 = (v[0] - v[2] / 2.0) * w;
    double y0 = (v[1] - v[3] / 2.0) * h;
    double x1 = (v[0] + v[2] / 2.0) * w;
    double y1 = (v[1] + v[3] / 2.0) * h;
    if (x0 < 0.0 || y0 < 0.0 || x1 > w || y1 > h) {
      if (warnings) {
        warnings->push_back(fmt::format("line {}: box clipped to the {}x{} frame", line_no,
                                        dims.width, dims.height));
      }
      x0 = std::max(x0, 0.0);
      y0 = std::max(y0, 0.0);
      x1 = std::min(x1, w);
      y1 = std::min(y1, h);
    }
    std::optional<double> conf;
    if (with_conf) conf = v[4];
    try {
      boxes.emplace_back(x0, y0, x1, y1, cls, conf);
    } catch (const Error& e) {
      throw LineError(e.kind(), line_no, e.what());
    }
    if (end == text.size()) break;
  }
  return boxes;
}

std::string serialize_lines(std::span<const Box> boxes, const ImageDims& dims, bool with_conf) {
  std::string out;
  for (const auto& b : boxes) {
    const double cx = (b.x_min() + b.x_max()) / 2.0 / dims.width;
    const double cy = (b.y_min() + b.y_max()) / 2.0 / dims.height;
    const double w = b.width() / dims.width;
    const double h = b.height() / dims.height;
    out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f}", static_cast<int>(b.class_id()), cx, cy,
                       w, h);
    if (with_conf) out += fmt::format(" {:.6f}", b.confidence().value_or(0.0));
    out += '\n';
  }
  return out;
}

}  // namespace

std::vector<Box> parse_gt_file(std::string_view text, const ImageDims& dims, Warnings* warnings) {
  return parse_lines(text, dims, false, warnings);
}

std::vector<Box> parse_pred_file(std::string_view text, const ImageDims& dims,
                                 Warnings* warnings) {
  return parse_lines(text, dims, true, warnings);
}

std::string serialize_gt_file(std::span<const Box> boxes, const ImageDims& dims) {
  return serialize_lines(boxes, dims, false);
}

std::string serialize_pred_file(std::span<const Box> boxes, const ImageDims& dims) {
  return serialize_lines(boxes, dims, true);
}

// ---------------------------------------------------------------------------
// COCO-style document

namespace {

const json& require(const json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorKind::kSchema, fmt::format("{} is missing field '{}'", where, key));
  }
  return obj.at(key);
}

double require_number(const json& obj, const char* key, const char* where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) {
    throw Error(ErrorKind::kSchema, fmt::format("{} field '{}' must be a number", where, key));
  }
  return v.get<double>();
}

/// COCO ids may be integers or strings; compare by canonical text.
std::string id_key(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string stem_of(const std::string& file_name) {
  return fs::path(file_name).stem().string();
}

}  // namespace

Dataset parse_coco_json(std::string_view document, Warnings* warnings) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, fmt::format("malformed document: {}", e.what()));
  }
  const json& images = require(doc, "images", "document");
  const json& annotations = require(doc, "annotations", "document");
  const json& categories = require(doc, "categories", "document");
  if (!images.is_array() || !annotations.is_array() || !categories.is_array()) {
    throw Error(ErrorKind::kSchema, "images, annotations and categories must be arrays");
  }

  std::map<std::string, ClassId> category_map;
  for (const auto& c : categories) {
    const json& name = require(c, "name", "category");
    if (!name.is_string()) throw Error(ErrorKind::kSchema, "category name must be a string");
    category_map[id_key(require(c, "id", "category"))] = class_from_name(name.get<std::string>());
  }

  std::vector<ImageRecord> records;
  std::map<std::string, std::size_t> image_index;
  for (const auto& img : images) {
    ImageRecord r;
    const std::string key = id_key(require(img, "id", "image"));
    const json& file_name = require(img, "file_name", "image");
    if (!file_name.is_string()) throw Error(ErrorKind::kSchema, "file_name must be a string");
    r.image_id = stem_of(file_name.get<std::string>());
    r.dims.width = static_cast<int>(require_number(img, "width", "image"));
    r.dims.height = static_cast<int>(require_number(img, "height", "image"));
    r.dims.validate();
    if (img.contains("positive") && img.at("positive").is_boolean()) {
      r.positive_label = img.at("positive").get<bool>();
    }
    if (!image_index.emplace(key, records.size()).second) {
      throw Error(ErrorKind::kSchema, fmt::format("duplicate image id {}", key));
    }
    records.push_back(std::move(r));
  }

  for (const auto& ann : annotations) {
    const std::string img_key = id_key(require(ann, "image_id", "annotation"));
    const auto it = image_index.find(img_key);
    if (it == image_index.end()) {
      throw Error(ErrorKind::kReferential,
                  fmt::format("annotation references unknown image {}", img_key));
    }
    const std::string cat_key = id_key(require(ann, "category_id", "annotation"));
    const auto cat = category_map.find(cat_key);
    if (cat == category_map.end()) {
      throw Error(ErrorKind::kReferential,
                  fmt::format("annotation references unknown category {}", cat_key));
    }
    const json& bbox = require(ann, "bbox", "annotation");
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
      throw Error(ErrorKind::kSchema, "bbox must be an array of four numbers");
    }
    ImageRecord& r = records[it->second];
    double x0 = bbox[0].get<double>();
    double y0 = bbox[1].get<double>();
    double x1 = x0 + bbox[2].get<double>();
    double y1 = y0 + bbox[3].get<double>();
    if (x0 < 0.0 || y0 < 0.0 || x1 > r.dims.width || y1 > r.dims.height) {
      if (warnings) {
        warnings->push_back(fmt::format("'{}': box clipped to the {}x{} frame", r.image_id,
                                        r.dims.width, r.dims.height));
      }
      x0 = std::max(x0, 0.0);
      y0 = std::max(y0, 0.0);
      x1 = std::min(x1, static_cast<double>(r.dims.width));
      y1 = std::min(y1, static_cast<double>(r.dims.height));
    }
    if (ann.contains("score")) {
      if (!ann.at("score").is_number()) throw Error(ErrorKind::kSchema, "score must be a number");
      r.predictions.emplace_back(x0, y0, x1, y1, cat->second, ann.at("score").get<double>());
    } else {
      r.ground_truth.emplace_back(x0, y0, x1, y1, cat->second);
    }
  }
  return Dataset(std::move(records));
}

std::string serialize_coco_json(const Dataset& dataset) {
  json images = json::array();
  json annotations = json::array();
  long ann_id = 1;
  long img_id = 1;
  for (const auto& r : dataset.records()) {
    json img = {{"id", img_id},
                {"file_name", r.image_id + ".png"},
                {"width", r.dims.width},
                {"height", r.dims.height}};
    if (r.positive_label) img["positive"] = *r.positive_label;
    images.push_back(std::move(img));
    auto emit = [&](const Box& b) {
      json a = {{"id", ann_id++},
                {"image_id", img_id},
                {"category_id", static_cast<int>(b.class_id())},
                {"bbox", {b.x_min(), b.y_min(), b.width(), b.height()}}};
      if (b.confidence()) a["score"] = *b.confidence();
      annotations.push_back(std::move(a));
    };
    for (const auto& b : r.ground_truth) emit(b);
    for (const auto& b : r.predictions) emit(b);
    ++img_id;
  }
  json categories = json::array({{{"id", 0}, {"name", "fungal"}},
                                 {{"id", 1}, {"name", "artefact"}}});
  json doc = {{"images", images}, {"annotations", annotations}, {"categories", categories}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Files

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write {}", tmp.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::kIo, fmt::format("short write to {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

namespace {

std::map<std::string, ImageDims> read_sizes(const fs::path& dir) {
  std::map<std::string, ImageDims> sizes;
  const fs::path file = dir / "sizes.txt";
  if (!fs::exists(file)) return sizes;
  std::istringstream in(read_text_file(file));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string id;
    ImageDims d;
    if (!(ls >> id)) continue;
    if (!(ls >> d.width >> d.height)) {
      throw LineError(ErrorKind::kParse, line_no, "sizes.txt expects `image_id width height`");
    }
    d.validate();
    sizes[id] = d;
  }
  return sizes;
}

std::vector<fs::path> txt_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt" &&
        entry.path().filename() != "sizes.txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

template <typename Fn>
auto with_file_context(const fs::path& file, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace

Dataset load_dataset(const fs::path& gt_path, const std::optional<fs::path>& pred_path,
                     const ImageDims& default_dims, Warnings* warnings) {
  if (!fs::exists(gt_path)) {
    throw Error(ErrorKind::kIo, fmt::format("{} does not exist", gt_path.string()));
  }
  std::vector<ImageRecord> records;
  if (fs::is_directory(gt_path)) {
    const auto sizes = read_sizes(gt_path);
    for (const auto& file : txt_files(gt_path)) {
      ImageRecord r;
      r.image_id = file.stem().string();
      const auto it = sizes.find(r.image_id);
      r.dims = it != sizes.end() ? it->second : default_dims;
      r.ground_truth = with_file_context(
          file, [&] { return parse_gt_file(read_text_file(file), r.dims, warnings); });
      records.push_back(std::move(r));
    }
  } else {
    const Dataset d = with_file_context(
        gt_path, [&] { return parse_coco_json(read_text_file(gt_path), warnings); });
    records.assign(d.records().begin(), d.records().end());
  }

  if (pred_path) {
    if (!fs::exists(*pred_path)) {
      throw Error(ErrorKind::kIo, fmt::format("{} does not exist", pred_path->string()));
    }
    // An explicit prediction source replaces detections embedded in the GT document.
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) {
      index[records[i].image_id] = i;
      records[i].predictions.clear();
    }
    if (fs::is_directory(*pred_path)) {
      for (const auto& file : txt_files(*pred_path)) {
        const auto it = index.find(file.stem().string());
        if (it == index.end()) {
          throw Error(ErrorKind::kReferential,
                      fmt::format("{}: no ground truth for image '{}'", file.string(),
                                  file.stem().string()));
        }
        ImageRecord& r = records[it->second];
        r.predictions = with_file_context(
            file, [&] { return parse_pred_file(read_text_file(file), r.dims, warnings); });
      }
    } else {
      const Dataset preds = with_file_context(
          *pred_path, [&] { return parse_coco_json(read_text_file(*pred_path), warnings); });
      for (const auto& p : preds.records()) {
        const auto it = index.find(p.image_id);
        if (it == index.end()) {
          throw Error(ErrorKind::kReferential,
                      fmt::format("{}: no ground truth for image '{}'", pred_path->string(),
                                  p.image_id));
        }
        auto& dst = records[it->second].predictions;
        dst.insert(dst.end(), p.predictions.begin(), p.predictions.end());
      }
    }
  }
  return Dataset(std::move(records));
}

void write_line_dataset(const Dataset& dataset, const fs::path& dir) {
  std::string sizes;
  for (const auto& r : dataset.records()) {
    write_text_file_atomic(dir / "gt" / (r.image_id + ".txt"),
                           serialize_gt_file(r.ground_truth, r.dims));
    write_text_file_atomic(dir / "pred" / (r.image_id + ".txt"),
                           serialize_pred_file(r.predictions, r.dims));
    sizes += fmt::format("{} {} {}\n", r.image_id, r.dims.width, r.dims.height);
  }
  write_text_file_atomic(dir / "gt" / "sizes.txt", sizes);
}

}  // namespace mycoeval
