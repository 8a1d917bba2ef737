#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "app/config.hpp"
#include "app/runner.hpp"
#include "dataharness/dataharness.hpp"

namespace volprop {

inline constexpr int kGridSchemaVersion = 1;

struct GridRow {
  std::string experiment;
  std::string label;
  RunConfig config;
  std::string config_id;
};

// Grid document:
//   {"schema_version": 1, "base": {<config>}, "experiments": [...]}
// Each experiment has a "name", an optional "label" template ("{}" is
// replaced by the value) and exactly one of
//   "axis" + "values": one row per value; values is a list or
//                      {"start", "stop", "step"}
//   "cartesian": {key: [values], ...}, rows in odometer order over the keys
//                sorted by name (last key fastest)
//   "configs": [{"label": ..., "set": {key: value, ...}}, ...]
// Throws GridInvalid naming the offending experiment or key.
std::vector<GridRow> expand_grid(const nlohmann::json& grid);
std::vector<GridRow> load_grid(const std::filesystem::path& path);

/// start, start + step, ..., stop; each value rounded to 9 decimals so
/// 0.1 steps land on the same doubles as the literals.
std::vector<double> numeric_range(double start, double stop, double step);

struct AblationOutcome {
  std::vector<GridRow> rows;
  std::vector<std::string> executed;  // config ids run by this call
  std::vector<std::string> skipped;   // config ids already complete
};

/// Runs each distinct config id once, skipping ids whose DONE marker
/// exists. Writes out/grid_index.json and prints "run <id> <name>" /
/// "skip <id> <name>" lines to options.log.
AblationOutcome run_ablation(const std::vector<GridRow>& rows, const Manifest& manifest,
                             const std::filesystem::path& base_dir, const RunOptions& options);

}  // namespace volprop
