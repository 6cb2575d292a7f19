#include "mycoeval/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "mycoeval/error.hpp"

using ordered_json = nlohmann::ordered_json;

namespace mycoeval {

namespace {

const ordered_json& field(const ordered_json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw Error(ErrorKind::kSchema, fmt::format("manifest is missing '{}'", key));
  }
  return doc.at(key);
}

double positive_number(const ordered_json& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_number()) throw Error(ErrorKind::kSchema, fmt::format("'{}' must be a number", key));
  const double x = v.get<double>();
  if (!(x > 0.0)) throw Error(ErrorKind::kSchema, fmt::format("'{}' must be positive", key));
  return x;
}

int positive_int(const ordered_json& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_number_integer()) {
    throw Error(ErrorKind::kSchema, fmt::format("'{}' must be an integer", key));
  }
  const long long x = v.get<long long>();
  if (x <= 0) throw Error(ErrorKind::kSchema, fmt::format("'{}' must be positive", key));
  return static_cast<int>(x);
}

bool boolean(const ordered_json& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_boolean()) throw Error(ErrorKind::kSchema, fmt::format("'{}' must be a boolean", key));
  return v.get<bool>();
}

bool same(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

TrainManifest parse_manifest(std::string_view document) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(document);
  } catch (const ordered_json::parse_error& e) {
    throw Error(ErrorKind::kSchema, fmt::format("malformed manifest: {}", e.what()));
  }
  if (!doc.is_object()) throw Error(ErrorKind::kSchema, "manifest must be an object");
  TrainManifest m;
  m.epochs = positive_int(doc, "epochs");
  const auto& opt = field(doc, "optimizer");
  if (!opt.is_string()) throw Error(ErrorKind::kSchema, "'optimizer' must be a string");
  m.optimizer = opt.get<std::string>();
  m.initial_lr = positive_number(doc, "initial_lr");
  m.cosine_warmup = boolean(doc, "cosine_warmup");
  m.batch_size = positive_int(doc, "batch_size");
  m.box_loss_weight = positive_number(doc, "box_loss_weight");
  m.cls_loss_weight = positive_number(doc, "cls_loss_weight");
  m.patience = positive_int(doc, "patience");
  m.flip_prob = positive_number(doc, "flip_prob");
  if (m.flip_prob > 1.0) throw Error(ErrorKind::kSchema, "'flip_prob' must not exceed 1");
  m.scale_jitter = positive_number(doc, "scale_jitter");
  m.translate_jitter = positive_number(doc, "translate_jitter");
  m.rotation_jitter_deg = positive_number(doc, "rotation_jitter_deg");
  m.mixup_enabled = boolean(doc, "mixup_enabled");
  m.input_size = positive_int(doc, "input_size");
  m.confidence_threshold = positive_number(doc, "confidence_threshold");
  if (m.confidence_threshold > 1.0) {
    throw Error(ErrorKind::kSchema, "'confidence_threshold' must not exceed 1");
  }
  return m;
}

std::string serialize_manifest(const TrainManifest& m) {
  ordered_json doc = {{"epochs", m.epochs},
                      {"optimizer", m.optimizer},
                      {"initial_lr", m.initial_lr},
                      {"cosine_warmup", m.cosine_warmup},
                      {"batch_size", m.batch_size},
                      {"box_loss_weight", m.box_loss_weight},
                      {"cls_loss_weight", m.cls_loss_weight},
                      {"patience", m.patience},
                      {"flip_prob", m.flip_prob},
                      {"scale_jitter", m.scale_jitter},
                      {"translate_jitter", m.translate_jitter},
                      {"rotation_jitter_deg", m.rotation_jitter_deg},
                      {"mixup_enabled", m.mixup_enabled},
                      {"input_size", m.input_size},
                      {"confidence_threshold", m.confidence_threshold}};
  return doc.dump(2) + "\n";
}

std::vector<ManifestCheck> check_manifest(const TrainManifest& m) {
  const TrainManifest ref = TrainManifest::reference();
  std::vector<ManifestCheck> out;
  auto num = [&](const char* name, double actual, double expected) {
    out.push_back({name, fmt::format("{}", expected), fmt::format("{}", actual),
                   same(actual, expected)});
  };
  auto flag = [&](const char* name, bool actual, bool expected) {
    out.push_back({name, expected ? "true" : "false", actual ? "true" : "false",
                   actual == expected});
  };
  num("epochs", m.epochs, ref.epochs);
  out.push_back({"optimizer", ref.optimizer, m.optimizer,
                 lower(m.optimizer) == lower(ref.optimizer)});
  num("initial_lr", m.initial_lr, ref.initial_lr);
  flag("cosine_warmup", m.cosine_warmup, ref.cosine_warmup);
  num("batch_size", m.batch_size, ref.batch_size);
  num("box_loss_weight", m.box_loss_weight, ref.box_loss_weight);
  num("cls_loss_weight", m.cls_loss_weight, ref.cls_loss_weight);
  num("patience", m.patience, ref.patience);
  num("flip_prob", m.flip_prob, ref.flip_prob);
  num("scale_jitter", m.scale_jitter, ref.scale_jitter);
  num("translate_jitter", m.translate_jitter, ref.translate_jitter);
  num("rotation_jitter_deg", m.rotation_jitter_deg, ref.rotation_jitter_deg);
  flag("mixup_enabled", m.mixup_enabled, ref.mixup_enabled);
  num("input_size", m.input_size, ref.input_size);
  num("confidence_threshold", m.confidence_threshold, ref.confidence_threshold);
  return out;
}

bool manifest_conforms(const std::vector<ManifestCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const ManifestCheck& c) { return c.ok; });
}

}  // namespace mycoeval
