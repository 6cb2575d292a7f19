#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mycoeval {

/// Training protocol record. It is validated and echoed in reports; nothing
/// in this toolkit executes it.
struct TrainManifest {
  int epochs = 250;
  std::string optimizer = "AdamW";
  double initial_lr = 5e-4;
  bool cosine_warmup = true;
  int batch_size = 8;
  double box_loss_weight = 7.5;
  double cls_loss_weight = 1.0;
  int patience = 50;
  double flip_prob = 0.2;
  double scale_jitter = 0.20;      // +/- fraction
  double translate_jitter = 0.05;  // +/- fraction
  double rotation_jitter_deg = 2.0;
  bool mixup_enabled = false;
  int input_size = 1024;
  double confidence_threshold = 0.25;

  /// The reference protocol; the default-constructed value.
  static TrainManifest reference() { return {}; }
};

struct ManifestCheck {
  std::string field;
  std::string expected;
  std::string actual;
  bool ok = false;
};

/// Parses the JSON form. Missing fields, wrong types and non-positive
/// numeric values raise Error(kSchema).
TrainManifest parse_manifest(std::string_view document);
std::string serialize_manifest(const TrainManifest& m);

/// One verdict per field, compared against TrainManifest::reference().
std::vector<ManifestCheck> check_manifest(const TrainManifest& m);
bool manifest_conforms(const std::vector<ManifestCheck>& checks);

}  // namespace mycoeval
