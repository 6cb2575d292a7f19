#include "mycoeval/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mycoeval/dataset.hpp"
#include "mycoeval/error.hpp"
#include "mycoeval/manifest.hpp"
#include "mycoeval/matching.hpp"
#include "mycoeval/report.hpp"
#include "mycoeval/screening.hpp"
#include "mycoeval/synth.hpp"

namespace fs = std::filesystem;

namespace mycoeval {

namespace {

constexpr const char* kOutDirEnv = "MYCOEVAL_OUT_DIR";

fs::path default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? fs::path(env) : fs::path(".");
}

ImageDims parse_frame(const std::string& text) {
  ImageDims d;
  char sep = 0;
  std::istringstream in(text);
  if (!(in >> d.width >> sep >> d.height) || (sep != 'x' && sep != 'X') || !in.eof()) {
    throw Error(ErrorKind::kUsage, fmt::format("frame '{}' is not WIDTHxHEIGHT", text));
  }
  d.validate();
  return d;
}

SplitFractions parse_fractions(const std::string& text) {
  SplitFractions f{};
  std::istringstream in(text);
  std::string part;
  int n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) throw Error(ErrorKind::kUsage, "expected three split fractions");
    try {
      std::size_t used = 0;
      f[n] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kUsage, fmt::format("'{}' is not a fraction", part));
    }
    ++n;
  }
  if (n != 3) throw Error(ErrorKind::kUsage, "expected three split fractions");
  largest_remainder(1, f);  // validates the sum
  return f;
}

void print_warnings(const Warnings& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

std::string render(const RunReport& report, const std::string& format) {
  if (format == "json") return report_to_json(report);
  if (format == "csv") return report_to_csv(report);
  return report_to_table(report);
}

struct EvalArgs {
  std::string gt;
  std::string pred;
  double conf = 0.25;
  double iou = 0.50;
  std::string interp = "101";
  std::string format = "table";
  std::string out_dir;
  std::string frame = "2048x2048";
  std::string manifest;
  bool plot = false;
  bool fail_on_fn = false;
};

struct LoadedRun {
  Dataset dataset;
  RunReport report;
};

LoadedRun load_run(const EvalArgs& a, const std::string& command, std::ostream& err) {
  LoadedRun run;
  Warnings warnings;
  run.dataset = load_dataset(a.gt, fs::path(a.pred), parse_frame(a.frame), &warnings).sorted();
  print_warnings(warnings, err);
  run.report.command = command;
  run.report.inputs = {{"gt", a.gt, digest_path(a.gt)}, {"pred", a.pred, digest_path(a.pred)}};
  run.report.op = {a.conf, a.iou};
  run.report.op.validate();
  run.report.interpolation = parse_interpolation(a.interp);
  if (!a.manifest.empty()) run.report.manifest = parse_manifest(read_text_file(a.manifest));
  return run;
}

fs::path out_dir_of(const EvalArgs& a) {
  return a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir);
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  LoadedRun run = load_run(a, "evaluate", err);
  if (run.dataset.empty()) throw Error(ErrorKind::kUsage, "no images to evaluate");
  run.report.objects = evaluate_objects(run.dataset, run.report.op, run.report.interpolation);
  run.report.screening = screen_dataset(run.dataset.records(), run.report.op.conf_threshold);
  run.report.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = out_dir_of(a);
  write_text_file_atomic(dir / "evaluate_report.json", report_to_json(run.report));
  if (a.plot) {
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cls = static_cast<ClassId>(c);
      try {
        const PrCurve curve = pr_curve(run.dataset.records(), cls, run.report.op.iou_threshold);
        write_text_file_atomic(dir / fmt::format("pr_{}.svg", class_name(cls)),
                               pr_curve_svg(curve));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kUndefinedRecall) throw;
        err << "warning: no PR curve for " << class_name(cls) << ": " << e.what() << '\n';
      }
    }
  }
  out << render(run.report, a.format);
  return kExitOk;
}

int cmd_screen(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  LoadedRun run = load_run(a, "screen", err);
  run.report.screening = screen_dataset(run.dataset.records(), run.report.op.conf_threshold);
  run.report.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  write_text_file_atomic(out_dir_of(a) / "screen_report.json", report_to_json(run.report));
  out << render(run.report, a.format);
  if (a.fail_on_fn && run.report.screening->matrix.fn > 0) {
    err << fmt::format("error: {} missed diagnosis(es) with --fail-on-fn\n",
                       run.report.screening->matrix.fn);
    return kExitGateFailed;
  }
  return kExitOk;
}

struct SplitArgs {
  std::string dataset;
  std::string fractions = "0.8,0.1,0.1";
  std::uint64_t seed = 0;
  std::string out;
  std::string frame = "2048x2048";
};

int cmd_split(const SplitArgs& a, std::ostream& out, std::ostream& err) {
  const SplitFractions fractions = parse_fractions(a.fractions);
  Warnings warnings;
  const Dataset dataset = load_dataset(a.dataset, std::nullopt, parse_frame(a.frame), &warnings);
  const SplitAssignment split = stratified_split(dataset, fractions, a.seed, &warnings);
  print_warnings(warnings, err);
  const fs::path path = a.out.empty() ? default_out_dir() / "split.json" : fs::path(a.out);
  write_text_file_atomic(path, serialize_split(split));

  out << fmt::format("{:<24}{:>8}{:>8}{:>8}{:>8}\n", "stratum", "total", "train", "val", "test");
  for (const auto& row : split.strata) {
    out << fmt::format("{:<24}{:>8}{:>8}{:>8}{:>8}\n", presence_stratum_name(row.stratum),
                       row.total, row.counts[0], row.counts[1], row.counts[2]);
  }
  out << fmt::format("{:<24}{:>8}{:>8}{:>8}{:>8}\n", "all", dataset.size(), split.train.size(),
                     split.val.size(), split.test.size());
  out << fmt::format("split written to {} (seed {})\n", path.string(), a.seed);
  return kExitOk;
}

struct SynthArgs {
  std::string out_dir;
  std::string spec;
  std::string preset = "random";
  int images = -1;
  std::optional<std::uint64_t> seed;
  std::string frame = "1024x1024";
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  SynthCohort cohort;
  const std::uint64_t seed = a.seed.value_or(0);
  if (a.preset == "reference-objects") {
    cohort = plant_object_counts({37, 9, 1}, parse_frame(a.frame), seed);
  } else if (a.preset == "reference-screening") {
    cohort = plant_screening_matrix({89, 3, 0, 162}, parse_frame(a.frame), seed);
  } else if (a.preset == "random") {
    SynthSpec spec;
    if (!a.spec.empty()) spec = parse_synth_spec(read_text_file(a.spec));
    if (a.images > 0) spec.n_images = a.images;
    if (a.seed) spec.seed = *a.seed;
    if (a.spec.empty()) spec.frame = parse_frame(a.frame);
    cohort = generate(spec);
    write_text_file_atomic(fs::path(a.out_dir) / "spec.json", serialize_synth_spec(spec));
  } else {
    throw Error(ErrorKind::kUsage, fmt::format("unknown preset '{}'", a.preset));
  }
  const fs::path dir(a.out_dir);
  write_line_dataset(cohort.dataset, dir);
  write_text_file_atomic(dir / "dataset.json", serialize_coco_json(cohort.dataset));
  write_text_file_atomic(dir / "truth.json", serialize_truth(cohort.truth));

  const ClassCounts f = cohort.truth.planted_counts(ClassId::kFungal);
  const ClassCounts ar = cohort.truth.planted_counts(ClassId::kArtefact);
  out << fmt::format("wrote {} images to {}\n", cohort.dataset.size(), dir.string());
  out << fmt::format("planted fungal   tp={} fp={} fn={}\n", f.tp, f.fp, f.fn);
  out << fmt::format("planted artefact tp={} fp={} fn={}\n", ar.tp, ar.fp, ar.fn);
  return kExitOk;
}

int cmd_validate_manifest(const std::string& path, std::ostream& out) {
  const TrainManifest m = parse_manifest(read_text_file(path));
  const auto checks = check_manifest(m);
  out << fmt::format("{:<22}{:>12}{:>12}  {}\n", "field", "expected", "actual", "verdict");
  for (const auto& c : checks) {
    out << fmt::format("{:<22}{:>12}{:>12}  {}\n", c.field, c.expected, c.actual,
                       c.ok ? "ok" : "MISMATCH");
  }
  if (manifest_conforms(checks)) {
    out << "manifest matches the reference training protocol\n";
    return kExitOk;
  }
  const auto bad = std::count_if(checks.begin(), checks.end(),
                                 [](const ManifestCheck& c) { return !c.ok; });
  out << fmt::format("protocol violation: {} field(s) deviate\n", bad);
  return kExitGateFailed;
}

int cmd_report(const std::string& path, const std::string& format, std::ostream& out) {
  out << render(parse_run_report(read_text_file(path)), format);
  return kExitOk;
}

void add_eval_options(CLI::App* cmd, EvalArgs& a, bool object_level) {
  cmd->add_option("gt", a.gt, "Ground truth: COCO document or directory of .txt files")
      ->required();
  cmd->add_option("pred", a.pred, "Predictions: COCO document or directory of .txt files")
      ->required();
  cmd->add_option("--conf", a.conf, "Confidence threshold")->capture_default_str();
  if (object_level) {
    cmd->add_option("--iou", a.iou, "IoU threshold for count metrics")->capture_default_str();
    cmd->add_option("--interp", a.interp, "AP interpolation")
        ->check(CLI::IsMember({"101", "all"}))
        ->capture_default_str();
    cmd->add_option("--manifest", a.manifest, "Training manifest to echo in the report");
    cmd->add_flag("--plot", a.plot, "Write PR-curve SVGs next to the report");
  }
  cmd->add_option("--format", a.format, "Stdout format")
      ->check(CLI::IsMember({"json", "csv", "table"}))
      ->capture_default_str();
  cmd->add_option("--out-dir", a.out_dir,
                  fmt::format("Report directory (default ${} or .)", kOutDirEnv));
  cmd->add_option("--frame", a.frame, "Frame size for line files without sizes.txt")
      ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detection evaluation and image-level screening for KOH microscopy"};
  app.name("mycoeval");
  app.require_subcommand(1);

  EvalArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Object-level metrics and screening report");
  add_eval_options(evaluate, eval_args, true);

  EvalArgs screen_args;
  auto* screen = app.add_subcommand("screen", "Image-level screening report");
  add_eval_options(screen, screen_args, false);
  screen->add_flag("--fail-on-fn", screen_args.fail_on_fn,
                   "Exit non-zero when any positive image is missed");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Stratified train/val/test split");
  split->add_option("dataset", split_args.dataset, "COCO document or directory of .txt files")
      ->required();
  split->add_option("--fractions", split_args.fractions, "train,val,test")
      ->capture_default_str();
  split->add_option("--seed", split_args.seed)->capture_default_str();
  split->add_option("--out", split_args.out, "Split file (default <out dir>/split.json)");
  split->add_option("--frame", split_args.frame)->capture_default_str();

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a synthetic cohort with planted outcomes");
  synth->add_option("out_dir", synth_args.out_dir)->required();
  synth->add_option("--spec", synth_args.spec, "JSON generator spec");
  synth->add_option("--preset", synth_args.preset)
      ->check(CLI::IsMember({"random", "reference-objects", "reference-screening"}))
      ->capture_default_str();
  synth->add_option("--images", synth_args.images, "Override the number of images");
  synth->add_option("--seed", synth_args.seed);
  synth->add_option("--frame", synth_args.frame)->capture_default_str();

  std::string manifest_path;
  auto* validate = app.add_subcommand("validate-manifest", "Check a training manifest");
  validate->add_option("manifest", manifest_path)->required();

  std::string report_path;
  std::string report_format = "table";
  auto* report = app.add_subcommand("report", "Re-render a saved JSON report");
  report->add_option("report", report_path)->required();
  report->add_option("--format", report_format)
      ->check(CLI::IsMember({"json", "csv", "table"}))
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (evaluate->parsed()) return cmd_evaluate(eval_args, out, err);
    if (screen->parsed()) return cmd_screen(screen_args, out, err);
    if (split->parsed()) return cmd_split(split_args, out, err);
    if (synth->parsed()) return cmd_synth(synth_args, out, err);
    if (validate->parsed()) return cmd_validate_manifest(manifest_path, out);
    if (report->parsed()) return cmd_report(report_path, report_format, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.kind() == ErrorKind::kUsage ? kExitUsage : kExitDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitUsage;
}

}  // namespace mycoeval
