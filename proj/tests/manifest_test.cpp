#include <gtest/gtest.h>

#include <json.hpp>

#include "mycoeval/error.hpp"
#include "mycoeval/manifest.hpp"

namespace mycoeval {
namespace {

std::vector<std::string> failing(const std::vector<ManifestCheck>& checks) {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.ok) out.push_back(c.field);
  }
  return out;
}

TEST(ManifestTest, ReferenceValues) {
  const TrainManifest m = TrainManifest::reference();
  EXPECT_EQ(m.epochs, 250);
  EXPECT_EQ(m.optimizer, "AdamW");
  EXPECT_EQ(m.initial_lr, 5e-4);
  EXPECT_EQ(m.batch_size, 8);
  EXPECT_EQ(m.box_loss_weight, 7.5);
  EXPECT_EQ(m.cls_loss_weight, 1.0);
  EXPECT_EQ(m.patience, 50);
  EXPECT_EQ(m.flip_prob, 0.2);
  EXPECT_EQ(m.scale_jitter, 0.2);
  EXPECT_EQ(m.translate_jitter, 0.05);
  EXPECT_EQ(m.rotation_jitter_deg, 2.0);
  EXPECT_FALSE(m.mixup_enabled);
  EXPECT_EQ(m.input_size, 1024);
  EXPECT_EQ(m.confidence_threshold, 0.25);
  EXPECT_TRUE(manifest_conforms(check_manifest(m)));
}

TEST(ManifestTest, SerializeParseRoundTrip) {
  const TrainManifest m = TrainManifest::reference();
  const TrainManifest back = parse_manifest(serialize_manifest(m));
  EXPECT_EQ(serialize_manifest(back), serialize_manifest(m));
  EXPECT_TRUE(manifest_conforms(check_manifest(back)));
}

TEST(ManifestTest, MixupEnabledIsFlagged) {
  TrainManifest m;
  m.mixup_enabled = true;
  EXPECT_EQ(failing(check_manifest(m)), std::vector<std::string>{"mixup_enabled"});
}

TEST(ManifestTest, LearningRateMismatchIsFlagged) {
  TrainManifest m;
  m.initial_lr = 5e-3;
  const auto checks = check_manifest(m);
  EXPECT_EQ(failing(checks), std::vector<std::string>{"initial_lr"});
}

TEST(ManifestTest, OptimizerNameIsCaseInsensitive) {
  TrainManifest m;
  m.optimizer = "adamw";
  EXPECT_TRUE(manifest_conforms(check_manifest(m)));
  m.optimizer = "SGD";
  EXPECT_FALSE(manifest_conforms(check_manifest(m)));
}

TEST(ManifestTest, SchemaErrors) {
  auto doc = nlohmann::json::parse(serialize_manifest(TrainManifest::reference()));
  auto expect_schema = [](const nlohmann::json& j) {
    try {
      parse_manifest(j.dump());
      FAIL() << j.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kSchema);
    }
  };
  auto missing = doc;
  missing.erase("patience");
  expect_schema(missing);
  auto wrong_type = doc;
  wrong_type["epochs"] = "250";
  expect_schema(wrong_type);
  auto negative = doc;
  negative["batch_size"] = -8;
  expect_schema(negative);
  auto fractional = doc;
  fractional["epochs"] = 250.5;
  expect_schema(fractional);
  EXPECT_THROW(parse_manifest("[1, 2"), Error);
}

}  // namespace
}  // namespace mycoeval
