#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mycoeval/manifest.hpp"
#include "mycoeval/matching.hpp"
#include "mycoeval/screening.hpp"

namespace mycoeval {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

struct InputDigest {
  std::string role;  // "gt", "pred", ...
  std::string path;
  std::string sha256;
};

/// Everything a run measured, plus enough provenance to recompute it.
struct RunReport {
  std::string tool_version{kToolVersion};
  std::string command;
  std::vector<InputDigest> inputs;
  OperatingPoint op;
  Interpolation interpolation = Interpolation::kPoints101;
  std::optional<ObjectMetrics> objects;
  std::optional<ScreeningReport> screening;
  std::optional<TrainManifest> manifest;
  double elapsed_ms = 0.0;
};

std::string report_to_json(const RunReport& report);
/// Inverse of report_to_json; Error(kSchema) on malformed input.
RunReport parse_run_report(std::string_view document);

std::string report_to_table(const RunReport& report);
std::string report_to_csv(const RunReport& report);

/// Standalone SVG of a PR curve with its data points embedded.
std::string pr_curve_svg(const PrCurve& curve);

std::string sha256_hex(std::string_view bytes);
/// Digest of a file, or of a directory's sorted (name, content) pairs.
std::string digest_path(const std::filesystem::path& path);

std::string interpolation_name(Interpolation mode);
/// Accepts "101" and "all"; Error(kUsage) otherwise.
Interpolation parse_interpolation(std::string_view name);

}  // namespace mycoeval
