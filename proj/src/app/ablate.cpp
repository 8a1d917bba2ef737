#include "app/ablate.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "common/error.hpp"

namespace volprop {

using nlohmann::json;

namespace {

[[noreturn]] void grid_error(const std::string& where, const std::string& why) {
  fail(ErrorCode::GridInvalid, where + ": " + why, where);
}

std::string value_text(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string make_label(const json& experiment, const std::string& fallback_key, const std::string& value) {
  if (!experiment.contains("label")) return fallback_key + "=" + value;
  std::string label = experiment.at("label").get<std::string>();
  if (const auto pos = label.find("{}"); pos != std::string::npos) label.replace(pos, 2, value);
  return label;
}

RunConfig with_overrides(const RunConfig& base, const std::vector<std::pair<std::string, json>>& sets,
                         const std::string& where) {
  RunConfig c = base;
  try {
    for (const auto& [key, value] : sets) set_config_value(c, key, value);
    validate_config(c);
  } catch (const Error& e) {
    grid_error(where, e.what());
  }
  return c;
}

std::vector<json> axis_values(const json& values, const std::string& where) {
  if (values.is_array()) {
    if (values.empty()) grid_error(where, "empty value list");
    return {values.begin(), values.end()};
  }
  if (values.is_object()) {
    for (const char* k : {"start", "stop", "step"}) {
      if (!values.contains(k) || !values.at(k).is_number()) grid_error(where, std::string("range needs numeric ") + k);
    }
    std::vector<json> out;
    const bool integral = values.at("start").is_number_integer() && values.at("stop").is_number_integer() &&
                          values.at("step").is_number_integer();
    for (double v : numeric_range(values.at("start").get<double>(), values.at("stop").get<double>(),
                                  values.at("step").get<double>())) {
      out.push_back(integral ? json(static_cast<std::int64_t>(std::llround(v))) : json(v));
    }
    return out;
  }
  grid_error(where, "values must be a list or {start, stop, step}");
}

}  // namespace

std::vector<double> numeric_range(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) {
    fail(ErrorCode::GridInvalid, "range needs step > 0 and stop >= start", "values");
  }
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  }
  return out;
}

std::vector<GridRow> expand_grid(const json& grid) {
  if (!grid.is_object()) grid_error("grid", "expected a JSON object");
  for (const auto& [k, _] : grid.items()) {
    if (k != "schema_version" && k != "base" && k != "experiments") grid_error(k, "unknown key");
  }
  if (grid.value("schema_version", 0) != kGridSchemaVersion) grid_error("schema_version", "unsupported version");
  RunConfig base = preset("baseline");
  if (grid.contains("base")) {
    try {
      base = parse_config(grid.at("base"));
    } catch (const Error& e) {
      grid_error("base", e.what());
    }
  }
  if (!grid.contains("experiments") || !grid.at("experiments").is_array()) {
    grid_error("experiments", "expected a list");
  }

  std::vector<GridRow> rows;
  std::set<std::string> names;
  for (const auto& ex : grid.at("experiments")) {
    if (!ex.is_object() || !ex.contains("name") || !ex.at("name").is_string()) {
      grid_error("experiments", "every experiment needs a string name");
    }
    const std::string name = ex.at("name").get<std::string>();
    if (!names.insert(name).second) grid_error(name, "duplicate experiment name");
    const int forms = static_cast<int>(ex.contains("axis")) + static_cast<int>(ex.contains("cartesian")) +
                      static_cast<int>(ex.contains("configs"));
    if (forms != 1) grid_error(name, "needs exactly one of axis, cartesian, configs");
    for (const auto& [k, _] : ex.items()) {
      if (k != "name" && k != "label" && k != "axis" && k != "values" && k != "cartesian" && k != "configs") {
        grid_error(name + "." + k, "unknown key");
      }
    }
    auto add = [&](std::string label, const std::vector<std::pair<std::string, json>>& sets) {
      GridRow row{name, label, with_overrides(base, sets, name + "/" + label), {}};
      row.config.name = name + "/" + label;
      row.config_id = config_id(row.config);
      rows.push_back(std::move(row));
    };

    if (ex.contains("axis")) {
      const std::string key = ex.at("axis").get<std::string>();
      if (!ex.contains("values")) grid_error(name, "axis needs values");
      for (const auto& v : axis_values(ex.at("values"), name)) add(make_label(ex, key, value_text(v)), {{key, v}});
    } else if (ex.contains("cartesian")) {
      const json& axes = ex.at("cartesian");
      if (!axes.is_object() || axes.empty()) grid_error(name, "cartesian needs {key: [values]}");
      std::vector<std::pair<std::string, std::vector<json>>> dims;
      for (const auto& [k, v] : axes.items()) dims.emplace_back(k, axis_values(v, name + "." + k));
      std::vector<std::size_t> idx(dims.size(), 0);
      for (;;) {
        std::vector<std::pair<std::string, json>> sets;
        std::string text;
        for (std::size_t d = 0; d < dims.size(); ++d) {
          sets.emplace_back(dims[d].first, dims[d].second[idx[d]]);
          text += (d ? ", " : "") + dims[d].first + "=" + value_text(dims[d].second[idx[d]]);
        }
        add(ex.contains("label") ? make_label(ex, "", text) : text, sets);
        std::size_t d = dims.size();
        while (d > 0 && ++idx[d - 1] == dims[d - 1].second.size()) idx[--d] = 0;
        if (d == 0) break;
      }
    } else {
      const json& list = ex.at("configs");
      if (!list.is_array() || list.empty()) grid_error(name, "configs must be a nonempty list");
      for (const auto& item : list) {
        if (!item.is_object() || !item.contains("label") || !item.contains("set") || !item.at("set").is_object()) {
          grid_error(name, "each config needs a label and a set object");
        }
        std::vector<std::pair<std::string, json>> sets;
        for (const auto& [k, v] : item.at("set").items()) sets.emplace_back(k, v);
        add(item.at("label").get<std::string>(), sets);
      }
    }
  }
  return rows;
}

std::vector<GridRow> load_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::GridInvalid, "cannot read grid " + path.string(), path.string());
  json j;
  try {
    j = json::parse(std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  } catch (const json::exception& e) {
    fail(ErrorCode::GridInvalid, std::string("grid is not valid JSON: ") + e.what(), path.string());
  }
  return expand_grid(j);
}

AblationOutcome run_ablation(const std::vector<GridRow>& rows, const Manifest& manifest,
                             const std::filesystem::path& base_dir, const RunOptions& options) {
  AblationOutcome outcome;
  outcome.rows = rows;
  std::filesystem::create_directories(options.out);
  json index = json::array();
  for (const auto& r : rows) {
    index.push_back({{"experiment", r.experiment}, {"label", r.label}, {"config_id", r.config_id}});
  }
  write_text_atomic(options.out / "grid_index.json", index.dump(2) + "\n");

  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (!seen.insert(r.config_id).second) continue;
    if (run_complete(options.out, r.config_id)) {
      outcome.skipped.push_back(r.config_id);
      if (options.log) *options.log << "skip " << r.config_id << " " << r.config.name << "\n" << std::flush;
      continue;
    }
    if (options.log) *options.log << "run " << r.config_id << " " << r.config.name << "\n" << std::flush;
    run_config(r.config, manifest, base_dir, options);
    outcome.executed.push_back(r.config_id);
  }
  return outcome;
}

}  // namespace volprop
