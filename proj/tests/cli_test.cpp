#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "mycoeval/cli.hpp"
#include "mycoeval/dataset.hpp"
#include "mycoeval/manifest.hpp"
#include "mycoeval/random.hpp"
#include "mycoeval/report.hpp"
#include "mycoeval/synth.hpp"

namespace fs = std::filesystem;

namespace mycoeval {
namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mycoeval_cli_" + std::string(::testing::UnitTest::GetInstance()
                                              ->current_test_info()
                                              ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    CliRun r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, SynthThenEvaluateReproducesPlantedCounts) {
  const CliRun synth = run({"synth", path("cohort"), "--preset", "reference-objects", "--seed", "4"});
  ASSERT_EQ(synth.code, kExitOk) << synth.err;
  EXPECT_NE(synth.out.find("planted fungal   tp=37 fp=9 fn=1"), std::string::npos);

  const CliRun eval = run({"evaluate", path("cohort/gt"), path("cohort/pred"), "--format", "json",
                        "--out-dir", path("out"), "--plot"});
  ASSERT_EQ(eval.code, kExitOk) << eval.err;
  const auto doc = nlohmann::json::parse(eval.out);
  const auto& fungal = doc["object_metrics"]["fungal"];
  EXPECT_EQ(fungal["tp"], 37);
  EXPECT_EQ(fungal["fp"], 9);
  EXPECT_EQ(fungal["fn"], 1);
  EXPECT_NEAR(fungal["precision"].get<double>(), 0.8043, 5e-5);
  EXPECT_TRUE(fs::exists(path("out/evaluate_report.json")));
  EXPECT_TRUE(fs::exists(path("out/pr_fungal.svg")));
  EXPECT_EQ(doc["inputs"][0]["sha256"].get<std::string>().size(), 64u);
}

TEST_F(CliTest, TableOutputNamesMissedDiagnoses) {
  ASSERT_EQ(run({"synth", path("c"), "--preset", "reference-screening"}).code, kExitOk);
  const CliRun screen =
      run({"screen", path("c/gt"), path("c/pred"), "--out-dir", path("out")});
  ASSERT_EQ(screen.code, kExitOk) << screen.err;
  EXPECT_NE(screen.out.find("Missed Diagnoses (FN)"), std::string::npos);
  EXPECT_NE(screen.out.find("0.9882"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("out/screen_report.json")));
}

TEST_F(CliTest, FailOnFnGate) {
  const auto cohort = plant_screening_matrix({3, 1, 2, 4}, {512, 512}, 1);
  write_line_dataset(cohort.dataset, path("c"));
  const std::vector<std::string> base{"screen", path("c/gt"), path("c/pred"), "--out-dir",
                                      path("out")};
  EXPECT_EQ(run(base).code, kExitOk);
  auto gated = base;
  gated.push_back("--fail-on-fn");
  const CliRun r = run(gated);
  EXPECT_EQ(r.code, kExitGateFailed);
  EXPECT_NE(r.err.find("2 missed"), std::string::npos);

  const auto clean = plant_screening_matrix({3, 1, 0, 4}, {512, 512}, 1);
  write_line_dataset(clean.dataset, path("d"));
  EXPECT_EQ(run({"screen", path("d/gt"), path("d/pred"), "--fail-on-fn", "--out-dir",
                 path("out")})
                .code,
            kExitOk);
}

TEST_F(CliTest, AllNegativeCohortReportsSensitivityAbsent) {
  const auto cohort = plant_screening_matrix({0, 1, 0, 5}, {512, 512}, 2);
  write_line_dataset(cohort.dataset, path("c"));
  const CliRun json = run({"screen", path("c/gt"), path("c/pred"), "--format", "json",
                        "--out-dir", path("out")});
  ASSERT_EQ(json.code, kExitOk) << json.err;
  EXPECT_TRUE(nlohmann::json::parse(json.out)["screening"]["sensitivity"].is_null());
  const CliRun table =
      run({"screen", path("c/gt"), path("c/pred"), "--out-dir", path("out")});
  EXPECT_NE(table.out.find("absent"), std::string::npos);
}

TEST_F(CliTest, ReportRoundTripIsByteIdentical) {
  ASSERT_EQ(run({"synth", path("c"), "--images", "12", "--seed", "3"}).code, kExitOk);
  ASSERT_EQ(run({"evaluate", path("c/dataset.json"), path("c/dataset.json"), "--out-dir",
                 path("out")})
                .code,
            kExitOk);
  const std::string saved = read_text_file(path("out/evaluate_report.json"));
  const CliRun again = run({"report", path("out/evaluate_report.json"), "--format", "json"});
  ASSERT_EQ(again.code, kExitOk) << again.err;
  EXPECT_EQ(again.out, saved);
  EXPECT_EQ(run({"report", path("out/evaluate_report.json"), "--format", "csv"}).code, kExitOk);
}

TEST_F(CliTest, RecordOrderDoesNotChangeMetrics) {
  SynthSpec spec;
  spec.n_images = 25;
  spec.seed = 8;
  const auto cohort = generate(spec);
  std::vector<ImageRecord> shuffled(cohort.dataset.records().begin(),
                                    cohort.dataset.records().end());
  Stream rng(1);
  rng.shuffle(std::span<ImageRecord>(shuffled));
  write_text_file_atomic(path("a.json"), serialize_coco_json(cohort.dataset));
  write_text_file_atomic(path("b.json"), serialize_coco_json(Dataset(shuffled)));

  auto metrics = [&](const std::string& file) {
    const CliRun r = run({"evaluate", file, file, "--format", "json", "--out-dir", path("out")});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    return doc["object_metrics"].dump() + doc["screening"].dump();
  };
  EXPECT_EQ(metrics(path("a.json")), metrics(path("b.json")));
}

TEST_F(CliTest, SynthIsReproducible) {
  ASSERT_EQ(run({"synth", path("a"), "--seed", "21"}).code, kExitOk);
  ASSERT_EQ(run({"synth", path("b"), "--seed", "21"}).code, kExitOk);
  ASSERT_EQ(run({"synth", path("c"), "--seed", "22"}).code, kExitOk);
  EXPECT_EQ(digest_path(path("a")), digest_path(path("b")));
  EXPECT_NE(digest_path(path("a")), digest_path(path("c")));
}

TEST_F(CliTest, SplitIsDeterministicAndValidatesFractions) {
  ASSERT_EQ(run({"synth", path("c"), "--images", "60", "--seed", "5"}).code, kExitOk);
  const CliRun a = run({"split", path("c/gt"), "--seed", "9", "--out", path("s1.json")});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_NE(a.out.find("all"), std::string::npos);
  ASSERT_EQ(run({"split", path("c/gt"), "--seed", "9", "--out", path("s2.json")}).code, kExitOk);
  EXPECT_EQ(read_text_file(path("s1.json")), read_text_file(path("s2.json")));
  const auto doc = nlohmann::json::parse(read_text_file(path("s1.json")));
  EXPECT_EQ(doc["train"].size() + doc["val"].size() + doc["test"].size(), 60u);

  EXPECT_EQ(run({"split", path("c/gt"), "--fractions", "0.8,0.1,0.2"}).code, kExitUsage);
  EXPECT_EQ(run({"split", path("c/gt"), "--fractions", "0.8,0.2"}).code, kExitUsage);
}

TEST_F(CliTest, ValidateManifest) {
  write_text_file_atomic(path("ok.json"), serialize_manifest(TrainManifest::reference()));
  const CliRun ok = run({"validate-manifest", path("ok.json")});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;

  TrainManifest mixup;
  mixup.mixup_enabled = true;
  write_text_file_atomic(path("mixup.json"), serialize_manifest(mixup));
  const CliRun bad = run({"validate-manifest", path("mixup.json")});
  EXPECT_EQ(bad.code, kExitGateFailed);
  EXPECT_NE(bad.out.find("MISMATCH"), std::string::npos);

  TrainManifest lr;
  lr.initial_lr = 5e-3;
  write_text_file_atomic(path("lr.json"), serialize_manifest(lr));
  EXPECT_EQ(run({"validate-manifest", path("lr.json")}).code, kExitGateFailed);

  write_text_file_atomic(path("broken.json"), "{\"epochs\": 250}");
  EXPECT_EQ(run({"validate-manifest", path("broken.json")}).code, kExitDataError);
}

TEST_F(CliTest, UsageAndDataErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"evaluate", path("missing"), path("missing")}).code, kExitDataError);
  EXPECT_EQ(run({"synth", path("c"), "--preset", "nope"}).code, kExitUsage);
  EXPECT_EQ(run({"synth", path("c"), "--frame", "12by4"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

}  // namespace
}  // namespace mycoeval
