#include "mycoeval/report.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "mycoeval/dataset.hpp"
#include "mycoeval/error.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace mycoeval {

std::string interpolation_name(Interpolation mode) {
  return mode == Interpolation::kPoints101 ? "101" : "all";
}

Interpolation parse_interpolation(std::string_view name) {
  if (name == "101") return Interpolation::kPoints101;
  if (name == "all") return Interpolation::kAllPoints;
  throw Error(ErrorKind::kUsage, fmt::format("unknown interpolation '{}'", name));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string digest_path(const fs::path& path) {
  if (!fs::is_directory(path)) return sha256_hex(read_text_file(path));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string manifest;
  for (const auto& f : files) {
    manifest += fs::relative(f, path).generic_string();
    manifest += ' ';
    manifest += sha256_hex(read_text_file(f));
    manifest += '\n';
  }
  return sha256_hex(manifest);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ordered_json opt(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> opt_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ordered_json class_json(const ClassMetrics& m) {
  return {{"tp", m.counts.tp},           {"fp", m.counts.fp},
          {"fn", m.counts.fn},           {"precision", m.prf.precision},
          {"recall", m.prf.recall},      {"f1", m.prf.f1},
          {"ap50", opt(m.ap50)},         {"ap50_95", opt(m.ap50_95)},
          {"mean_iou", opt(m.mean_iou)}};
}

ClassMetrics class_from(const ordered_json& j) {
  ClassMetrics m;
  m.counts = {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
              j.at("fn").get<std::size_t>()};
  m.prf = {j.at("precision").get<double>(), j.at("recall").get<double>(),
           j.at("f1").get<double>()};
  m.ap50 = opt_from(j.at("ap50"));
  m.ap50_95 = opt_from(j.at("ap50_95"));
  m.mean_iou = opt_from(j.at("mean_iou"));
  return m;
}

ordered_json screening_json(const ScreeningReport& s) {
  return {{"matrix",
           {{"tp", s.matrix.tp}, {"fp", s.matrix.fp}, {"fn", s.matrix.fn}, {"tn", s.matrix.tn}}},
          {"accuracy", opt(s.accuracy)},
          {"sensitivity", opt(s.sensitivity)},
          {"specificity", opt(s.specificity)},
          {"precision", opt(s.precision)},
          {"f1", opt(s.f1)}};
}

ScreeningReport screening_from(const ordered_json& j) {
  ScreeningReport s;
  const auto& m = j.at("matrix");
  s.matrix = {m.at("tp").get<std::size_t>(), m.at("fp").get<std::size_t>(),
              m.at("fn").get<std::size_t>(), m.at("tn").get<std::size_t>()};
  s.accuracy = opt_from(j.at("accuracy"));
  s.sensitivity = opt_from(j.at("sensitivity"));
  s.specificity = opt_from(j.at("specificity"));
  s.precision = opt_from(j.at("precision"));
  s.f1 = opt_from(j.at("f1"));
  return s;
}

}  // namespace

std::string report_to_json(const RunReport& r) {
  ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["tool_version"] = r.tool_version;
  doc["command"] = r.command;
  ordered_json inputs = ordered_json::array();
  for (const auto& in : r.inputs) {
    inputs.push_back({{"role", in.role}, {"path", in.path}, {"sha256", in.sha256}});
  }
  doc["inputs"] = inputs;
  doc["operating_point"] = {{"conf", r.op.conf_threshold},
                            {"iou", r.op.iou_threshold},
                            {"interpolation", interpolation_name(r.interpolation)}};
  if (r.objects) {
    const auto& o = *r.objects;
    doc["object_metrics"] = {
        {"fungal", class_json(o.of(ClassId::kFungal))},
        {"artefact", class_json(o.of(ClassId::kArtefact))},
        {"macro",
         {{"precision", o.macro.prf.precision},
          {"recall", o.macro.prf.recall},
          {"f1", o.macro.prf.f1},
          {"ap50", opt(o.macro.ap50)},
          {"ap50_95", opt(o.macro.ap50_95)},
          {"mean_iou", opt(o.macro.mean_iou)}}}};
  } else {
    doc["object_metrics"] = nullptr;
  }
  doc["screening"] = r.screening ? screening_json(*r.screening) : ordered_json(nullptr);
  doc["train_manifest"] =
      r.manifest ? ordered_json::parse(serialize_manifest(*r.manifest)) : ordered_json(nullptr);
  doc["elapsed_ms"] = r.elapsed_ms;
  return doc.dump(2) + "\n";
}

RunReport parse_run_report(std::string_view document) {
  RunReport r;
  try {
    const ordered_json doc = ordered_json::parse(document);
    if (doc.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw Error(ErrorKind::kSchema, "unsupported report schema_version");
    }
    r.tool_version = doc.at("tool_version").get<std::string>();
    r.command = doc.at("command").get<std::string>();
    for (const auto& in : doc.at("inputs")) {
      r.inputs.push_back({in.at("role").get<std::string>(), in.at("path").get<std::string>(),
                          in.at("sha256").get<std::string>()});
    }
    const auto& op = doc.at("operating_point");
    r.op.conf_threshold = op.at("conf").get<double>();
    r.op.iou_threshold = op.at("iou").get<double>();
    r.interpolation = parse_interpolation(op.at("interpolation").get<std::string>());
    const auto& om = doc.at("object_metrics");
    if (!om.is_null()) {
      ObjectMetrics o;
      o.per_class[0] = class_from(om.at("fungal"));
      o.per_class[1] = class_from(om.at("artefact"));
      const auto& mj = om.at("macro");
      o.macro.prf = {mj.at("precision").get<double>(), mj.at("recall").get<double>(),
                     mj.at("f1").get<double>()};
      o.macro.ap50 = opt_from(mj.at("ap50"));
      o.macro.ap50_95 = opt_from(mj.at("ap50_95"));
      o.macro.mean_iou = opt_from(mj.at("mean_iou"));
      r.objects = o;
    }
    if (!doc.at("screening").is_null()) r.screening = screening_from(doc.at("screening"));
    if (!doc.at("train_manifest").is_null()) {
      r.manifest = parse_manifest(doc.at("train_manifest").dump());
    }
    r.elapsed_ms = doc.at("elapsed_ms").get<double>();
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorKind::kSchema, fmt::format("malformed report: {}", e.what()));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Text renderings

namespace {

std::string frac(const std::optional<double>& v) {
  return v ? fmt::format("{:.4f}", *v) : std::string("absent");
}

std::string pct(const std::optional<double>& v) {
  return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("absent");
}

}  // namespace

std::string report_to_table(const RunReport& r) {
  std::string out;
  if (r.objects) {
    out += fmt::format("Object-level detection (conf >= {:.2f}, IoU >= {:.2f}, AP {})\n",
                       r.op.conf_threshold, r.op.iou_threshold,
                       r.interpolation == Interpolation::kPoints101 ? "101-point"
                                                                    : "all-points");
    out += fmt::format("{:<10}{:>6}{:>6}{:>6}{:>11}{:>9}{:>9}{:>12}{:>17}{:>10}\n", "class",
                       "TP", "FP", "FN", "Precision", "Recall", "F1", "AP@0.50(%)",
                       "AP@0.50:0.95(%)", "Mean IoU");
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& m = r.objects->per_class[c];
      out += fmt::format("{:<10}{:>6}{:>6}{:>6}{:>11.4f}{:>9.4f}{:>9.4f}{:>12}{:>17}{:>10}\n",
                         class_name(static_cast<ClassId>(c)), m.counts.tp, m.counts.fp,
                         m.counts.fn, m.prf.precision, m.prf.recall, m.prf.f1, pct(m.ap50),
                         pct(m.ap50_95), frac(m.mean_iou));
    }
    const auto& mm = r.objects->macro;
    out += fmt::format("{:<10}{:>6}{:>6}{:>6}{:>11.4f}{:>9.4f}{:>9.4f}{:>12}{:>17}{:>10}\n",
                       "macro", "-", "-", "-", mm.prf.precision, mm.prf.recall, mm.prf.f1,
                       pct(mm.ap50), pct(mm.ap50_95), frac(mm.mean_iou));
  }
  if (r.screening) {
    if (!out.empty()) out += '\n';
    const auto& s = *r.screening;
    out += fmt::format("Image-level screening (positive when a fungal detection has conf > {:.2f})\n",
                       r.op.conf_threshold);
    out += fmt::format("{:<16}{:>13}{:>13}\n", "", "GT positive", "GT negative");
    out += fmt::format("{:<16}{:>13}{:>13}\n", "Pred positive", s.matrix.tp, s.matrix.fp);
    out += fmt::format("{:<16}{:>13}{:>13}\n", "Pred negative", s.matrix.fn, s.matrix.tn);
    out += fmt::format("{:<24}{}\n", "Accuracy", frac(s.accuracy));
    out += fmt::format("{:<24}{}\n", "Sensitivity", frac(s.sensitivity));
    out += fmt::format("{:<24}{}\n", "Specificity", frac(s.specificity));
    out += fmt::format("{:<24}{}\n", "Precision", frac(s.precision));
    out += fmt::format("{:<24}{}\n", "F1-Score", frac(s.f1));
    out += fmt::format("{:<24}{}\n", "Missed Diagnoses (FN)", s.matrix.fn);
  }
  return out;
}

std::string report_to_csv(const RunReport& r) {
  std::string out = "section,class,metric,value\n";
  auto row = [&](std::string_view section, std::string_view cls, std::string_view metric,
                 const std::string& value) {
    out += fmt::format("{},{},{},{}\n", section, cls, metric, value);
  };
  auto num = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.6f}", *v) : std::string();
  };
  if (r.objects) {
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& m = r.objects->per_class[c];
      const auto name = class_name(static_cast<ClassId>(c));
      row("object", name, "tp", std::to_string(m.counts.tp));
      row("object", name, "fp", std::to_string(m.counts.fp));
      row("object", name, "fn", std::to_string(m.counts.fn));
      row("object", name, "precision", num(m.prf.precision));
      row("object", name, "recall", num(m.prf.recall));
      row("object", name, "f1", num(m.prf.f1));
      row("object", name, "ap50", num(m.ap50));
      row("object", name, "ap50_95", num(m.ap50_95));
      row("object", name, "mean_iou", num(m.mean_iou));
    }
    const auto& mm = r.objects->macro;
    row("object", "macro", "precision", num(mm.prf.precision));
    row("object", "macro", "recall", num(mm.prf.recall));
    row("object", "macro", "f1", num(mm.prf.f1));
    row("object", "macro", "ap50", num(mm.ap50));
    row("object", "macro", "ap50_95", num(mm.ap50_95));
    row("object", "macro", "mean_iou", num(mm.mean_iou));
  }
  if (r.screening) {
    const auto& s = *r.screening;
    row("image", "", "tp", std::to_string(s.matrix.tp));
    row("image", "", "fp", std::to_string(s.matrix.fp));
    row("image", "", "fn", std::to_string(s.matrix.fn));
    row("image", "", "tn", std::to_string(s.matrix.tn));
    row("image", "", "accuracy", num(s.accuracy));
    row("image", "", "sensitivity", num(s.sensitivity));
    row("image", "", "specificity", num(s.specificity));
    row("image", "", "precision", num(s.precision));
    row("image", "", "f1", num(s.f1));
  }
  return out;
}

std::string pr_curve_svg(const PrCurve& curve) {
  constexpr double kW = 480.0;
  constexpr double kH = 360.0;
  constexpr double kMargin = 48.0;
  const double pw = kW - 2 * kMargin;
  const double ph = kH - 2 * kMargin;
  auto sx = [&](double recall) { return kMargin + recall * pw; };
  auto sy = [&](double precision) { return kH - kMargin - precision * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      kW, kH);
  svg += fmt::format("  <title>PR curve: {} @ IoU {:.2f}</title>\n", class_name(curve.class_id),
                     curve.iou_threshold);
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += fmt::format(
      "  <path d=\"M {0} {1} L {0} {2} L {3} {2}\" fill=\"none\" stroke=\"black\"/>\n", kMargin,
      kMargin, kH - kMargin, kW - kMargin);
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    svg += fmt::format(
        "  <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{:.2f}</text>\n",
        sx(v), kH - kMargin + 14, v);
    svg += fmt::format(
        "  <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.2f}</text>\n",
        kMargin - 4, sy(v) + 3, v);
  }
  svg += fmt::format("  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">Recall</text>\n",
                     kW / 2, kH - 12);
  svg += fmt::format(
      "  <text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 14 {})\">Precision</text>\n",
      kH / 2, kH / 2);
  std::string points;
  for (const auto& p : curve.points) {
    points += fmt::format("{:.3f},{:.3f} ", sx(p.recall), sy(p.precision));
  }
  svg += fmt::format("  <polyline fill=\"none\" stroke=\"#2a7f3f\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                     points);
  svg += "  <g fill=\"#2a7f3f\">\n";
  for (const auto& p : curve.points) {
    svg += fmt::format(
        "    <circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"2\" data-confidence=\"{}\" "
        "data-precision=\"{}\" data-recall=\"{}\"/>\n",
        sx(p.recall), sy(p.precision), p.confidence, p.precision, p.recall);
  }
  svg += "  </g>\n</svg>\n";
  return svg;
}

}  // namespace mycoeval
