#include "app/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>

#include "app/config.hpp"
#include "app/runner.hpp"
#include "common/error.hpp"

namespace volprop {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return json::parse(std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  } catch (const json::exception& e) {
    fail(ErrorCode::IoFailure, path.string() + ": " + e.what());
  }
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string mean_std(const Stat& s) { return s.n ? fmt("%.3f ± %.3f", s.mean, s.std) : "n/a"; }

struct Column {
  std::string header;
  const ConfigResult* result;
};

const std::vector<std::pair<std::string, std::string>>& canonical_columns() {
  static const std::vector<std::pair<std::string, std::string>> cols{
      {"np", "NP"}, {"baseline", "Base"}, {"sps", "SPS"}, {"is", "IS"}, {"is+sps", "IS+SPS"}};
  return cols;
}

// A config matches by name, grid label, id, or as the id of a named preset
// (grid rows that reproduce a preset keep their own names).
bool matches(const ConfigResult& r, const std::string& key) {
  if (r.name == key || r.label == key || r.config_id == key) return true;
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), key) == names.end()) return false;
  return r.config_id == config_id(preset(key));
}

const ClassSummary* find_class(const ConfigResult& r, const std::string& cls) {
  for (const auto& c : r.table.classes) {
    if (c.structure == cls) return &c;
  }
  return nullptr;
}

}  // namespace

std::vector<ConfigResult> collect_results(const fs::path& out) {
  std::vector<ConfigResult> results;
  std::error_code ec;
  if (fs::is_directory(out, ec)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(out)) {
      if (entry.is_directory() && fs::exists(entry.path() / "DONE") && fs::exists(entry.path() / "records.json")) {
        dirs.push_back(entry.path());
      }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      const json doc = read_json(dir / "records.json");
      for (const auto& [id, cfg] : doc.at("configs").items()) {
        ConfigResult r;
        r.config_id = id;
        r.name = cfg.value("name", id);
        r.label = r.name;
        for (const auto& [cls, body] : cfg.at("classes").items()) {
          for (const auto& rec : body.at("records")) {
            MetricsRecord m;
            m.case_id = rec.at("case_id").get<std::string>();
            m.structure = cls;
            m.config_id = id;
            m.dice = rec.at("dice").get<double>();
            m.iou = rec.at("iou").get<double>();
            if (!rec.at("hausdorff_mm").is_null()) m.hausdorff_mm = rec.at("hausdorff_mm").get<double>();
            r.records.push_back(std::move(m));
          }
        }
        r.table = aggregate(r.records);
        results.push_back(std::move(r));
      }
    }
  }
  if (results.empty()) fail(ErrorCode::NoResults, "no completed runs under " + out.string(), out.string());

  // Grid order first, then the rest by name.
  std::map<std::string, std::size_t> order;
  if (fs::exists(out / "grid_index.json")) {
    const json index = read_json(out / "grid_index.json");
    for (const auto& row : index) {
      const auto id = row.at("config_id").get<std::string>();
      if (order.emplace(id, order.size()).second) {
        for (auto& r : results) {
          if (r.config_id == id) r.label = row.at("experiment").get<std::string>() + " / " +
                                           row.at("label").get<std::string>();
        }
      }
    }
  }
  std::stable_sort(results.begin(), results.end(), [&](const ConfigResult& a, const ConfigResult& b) {
    const auto ia = order.find(a.config_id), ib = order.find(b.config_id);
    const std::size_t ka = ia == order.end() ? order.size() : ia->second;
    const std::size_t kb = ib == order.end() ? order.size() : ib->second;
    if (ka != kb) return ka < kb;
    return a.name < b.name;
  });
  return results;
}

Report build_report(const std::vector<ConfigResult>& results, const ReportOptions& options) {
  if (results.empty()) fail(ErrorCode::NoResults, "nothing to report");
  const ConfigResult* base = nullptr;
  for (const auto& r : results) {
    if (r.name == options.baseline) {
      base = &r;
      break;
    }
  }
  for (const auto& r : results) {
    if (!base && matches(r, options.baseline)) base = &r;
  }

  Report rep;
  std::string md = "## Summary\n\nHD in mm; records with an empty prediction have no HD and are counted under "
                   "\"HD excl.\". ΔDice = variant − baseline";
  md += base ? " (" + base->label + ").\n\n" : " (no baseline run found).\n\n";
  md += "| Config | Dice ↑ | IoU ↑ | HD ↓ | n | HD excl. | ΔDice |\n|---|---|---|---|---|---|---|\n";
  json summary = json::array();
  for (const auto& r : results) {
    const auto& o = r.table.overall;
    std::string delta = "n/a";
    json jdelta = nullptr;
    if (base) {
      const double d = o.dice.mean - base->table.overall.dice.mean;
      delta = fmt("%+.3f", d);
      jdelta = d;
    }
    md += "| " + r.label + " | " + mean_std(o.dice) + " | " + mean_std(o.iou) + " | " + mean_std(o.hausdorff_mm) +
          " | " + std::to_string(o.count) + " | " + std::to_string(o.hd_excluded) + " | " + delta + " |\n";
    summary.push_back({{"config_id", r.config_id},
                       {"name", r.name},
                       {"label", r.label},
                       {"n", o.count},
                       {"dice", {{"mean", o.dice.mean}, {"std", o.dice.std}}},
                       {"iou", {{"mean", o.iou.mean}, {"std", o.iou.std}}},
                       {"hausdorff_mm", {{"mean", o.hausdorff_mm.mean}, {"std", o.hausdorff_mm.std}, {"n", o.hausdorff_mm.n}}},
                       {"hd_excluded", o.hd_excluded},
                       {"delta_dice", jdelta}});
  }

  // Per-class columns: the named presets in table order, then anything else.
  std::vector<Column> cols;
  for (const auto& [name, header] : canonical_columns()) {
    for (const auto& r : results) {
      if (matches(r, name)) {
        cols.push_back({header, &r});
        break;
      }
    }
  }
  const bool canonical = !cols.empty();
  if (!canonical) {
    for (const auto& r : results) cols.push_back({r.label, &r});
  }
  const ConfigResult* target = nullptr;
  for (auto it = cols.rbegin(); it != cols.rend(); ++it) {
    if (it->result != base) {
      target = it->result;
      break;
    }
  }
  if (!target) target = base;

  std::vector<std::string> classes;
  for (const auto& r : results) {
    for (const auto& c : r.table.classes) {
      if (std::find(classes.begin(), classes.end(), c.structure) == classes.end()) classes.push_back(c.structure);
    }
  }
  std::sort(classes.begin(), classes.end());

  md += "\n## Per class (Dice / IoU)\n\n";
  if (base && target) {
    md += "ΔDice: absolute Dice change of " + target->label + " relative to " + base->label + ", ×100.\n\n";
  }
  md += "| Class |";
  std::string rule = "|---|";
  for (const auto& c : cols) {
    md += " " + c.header + " |";
    rule += "---|";
  }
  md += " ΔDice |\n" + rule + "---|\n";
  json per_class = json::object();
  for (const auto& cls : classes) {
    md += "| " + cls + " |";
    json row = json::object();
    for (const auto& c : cols) {
      const ClassSummary* s = find_class(*c.result, cls);
      md += " " + (s ? fmt("%.3f / %.3f", s->dice.mean, s->iou.mean) : std::string("n/a")) + " |";
      if (s) row[c.header] = {{"dice", s->dice.mean}, {"iou", s->iou.mean}, {"n", s->count}};
    }
    const ClassSummary* b = base ? find_class(*base, cls) : nullptr;
    const ClassSummary* t = target ? find_class(*target, cls) : nullptr;
    if (b && t) {
      const double d = t->dice.mean - b->dice.mean;
      md += " " + fmt("%+.1f%%", 100.0 * d) + " |\n";
      row["delta_dice"] = d;
    } else {
      md += " n/a |\n";
      row["delta_dice"] = nullptr;
    }
    per_class[cls] = row;
  }

  rep.markdown = md;
  rep.json = {{"schema_version", kReportSchemaVersion},
              {"hd_units", "mm"},
              {"baseline", base ? json(base->config_id) : json(nullptr)},
              {"summary", summary},
              {"per_class", per_class}};
  return rep;
}

Report cmd_report(const fs::path& out, const ReportOptions& options) {
  Report rep = build_report(collect_results(out), options);
  write_text_atomic(out / "report.md", rep.markdown);
  write_text_atomic(out / "report.json", rep.json.dump(2) + "\n");
  return rep;
}

}  // namespace volprop
