#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metrics/metrics.hpp"

namespace volprop {

struct ConfigResult {
  std::string config_id;
  std::string name;
  std::string label;  // grid label when known, otherwise the name
  std::vector<MetricsRecord> records;
  AggregateTable table;
};

/// Completed runs (DONE present) under `out`, in grid order when
/// out/grid_index.json exists, otherwise by name. Throws NoResults.
std::vector<ConfigResult> collect_results(const std::filesystem::path& out);

struct ReportOptions {
  std::string baseline = "baseline";  // config name or id
};

struct Report {
  std::string markdown;
  nlohmann::json json;
};

/// Summary (mean ± std Dice / IoU / HD with ΔDice = variant − baseline)
/// and a per-class Dice / IoU table. Named presets np, baseline, sps, is,
/// is+sps become the columns NP, Base, SPS, IS, IS+SPS.
Report build_report(const std::vector<ConfigResult>& results, const ReportOptions& options = {});

/// collect_results + build_report, written to out/report.md and out/report.json.
Report cmd_report(const std::filesystem::path& out, const ReportOptions& options = {});

}  // namespace volprop
