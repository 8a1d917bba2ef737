#include "volprop/volprop.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "app/ablate.hpp"
#include "app/config.hpp"
#include "app/report.hpp"
#include "app/runner.hpp"
#include "common/error.hpp"
#include "dataharness/dataharness.hpp"
#include "dataharness/phantom.hpp"
#include "engine/onnx_backend.hpp"
#include "profiler/profiler.hpp"

struct volprop_config {
  volprop::RunConfig config;
};

struct volprop_grid {
  std::vector<volprop::GridRow> rows;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string g_error;
thread_local std::string g_subject;

static_assert(static_cast<int>(volprop::ErrorCode::NoResults) == VOLPROP_NO_RESULTS);
static_assert(static_cast<int>(volprop::ErrorCode::ConfigInvalid) == VOLPROP_CONFIG_INVALID);

volprop_status status_of(volprop::ErrorCode code) {
  // The C enum mirrors ErrorCode value for value.
  return static_cast<volprop_status>(static_cast<int>(code));
}

template <typename F>
volprop_status guarded(F&& body) {
  g_error.clear();
  g_subject.clear();
  try {
    body();
    return VOLPROP_OK;
  } catch (const volprop::Error& e) {
    g_error = e.what();
    g_subject = e.subject();
    return status_of(e.code());
  } catch (const fs::filesystem_error& e) {
    g_error = e.what();
    return VOLPROP_IO_FAILURE;
  } catch (const std::exception& e) {
    g_error = e.what();
    return VOLPROP_INTERNAL;
  } catch (...) {
    g_error = "unknown error";
    return VOLPROP_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) volprop::fail(volprop::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL", what);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Forwards complete lines written to it to a C callback.
class LineSink : public std::stringbuf {
 public:
  LineSink(volprop_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineSink() override { flush_lines(true); }

 protected:
  int sync() override {
    flush_lines(false);
    return 0;
  }

 private:
  void flush_lines(bool all) {
    std::string text = str();
    std::size_t start = 0;
    for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1) {
      if (fn_) fn_(user_, text.substr(start, nl - start).c_str());
    }
    if (all && start < text.size() && fn_) {
      fn_(user_, text.substr(start).c_str());
      start = text.size();
    }
    str(text.substr(start));
  }
  volprop_log_fn fn_;
  void* user_;
};

volprop::RunOptions run_options(const volprop_run_options* o, std::ostream* log) {
  require(o, "options");
  require(o->out_dir, "options.out_dir");
  volprop::RunOptions r;
  r.out = o->out_dir;
  r.workers = o->workers == 0 ? 1 : o->workers;
  r.keep_going = o->keep_going != 0;
  r.profile = o->profile != 0;
  if (o->cache_dir && *o->cache_dir) r.cache_dir = fs::path(o->cache_dir);
  r.log = log;
  return r;
}

fs::path manifest_base(const fs::path& manifest) {
  return manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
}

}  // namespace

extern "C" {

const char* volprop_version(void) { return "0.1.0"; }

const char* volprop_status_name(volprop_status status) {
  if (status == VOLPROP_OK) return "Ok";
  if (status == VOLPROP_INTERNAL) return "Internal";
  static thread_local std::string name;
  name = std::string(volprop::to_string(static_cast<volprop::ErrorCode>(status)));
  return name.c_str();
}

const char* volprop_last_error(void) { return g_error.c_str(); }
const char* volprop_last_error_subject(void) { return g_subject.c_str(); }
void volprop_string_free(char* text) { std::free(text); }

volprop_status volprop_config_load(const char* path, volprop_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new volprop_config{volprop::load_config(path)};
  });
}

volprop_status volprop_config_parse(const char* json_text, volprop_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = new volprop_config{volprop::parse_config_text(json_text)};
  });
}

volprop_status volprop_config_preset(const char* name, volprop_config** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = new volprop_config{volprop::preset(name)};
  });
}

volprop_status volprop_config_set(volprop_config* config, const char* key, const char* json_value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(json_value, "json_value");
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::exception& e) {
      volprop::fail(volprop::ErrorCode::ConfigInvalid, std::string(key) + ": " + e.what(), key);
    }
    volprop::RunConfig next = config->config;
    volprop::set_config_value(next, key, v);
    volprop::validate_config(next);
    config->config = std::move(next);
  });
}

volprop_status volprop_config_set_backend(volprop_config* config, const char* flag) {
  return guarded([&] {
    require(config, "config");
    require(flag, "flag");
    volprop::RunConfig next = config->config;
    volprop::apply_backend_flag(next, flag);
    volprop::validate_config(next);
    config->config = std::move(next);
  });
}

volprop_status volprop_config_id(const volprop_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = dup(volprop::config_id(config->config));
  });
}

volprop_status volprop_config_to_json(const volprop_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = dup(volprop::config_to_json(config->config).dump(2));
  });
}

void volprop_config_free(volprop_config* config) { delete config; }

volprop_status volprop_run(const volprop_config* config, const char* manifest_path,
                           const volprop_run_options* options, volprop_run_summary* summary) {
  return guarded([&] {
    require(config, "config");
    require(manifest_path, "manifest_path");
    LineSink sink(options ? options->log : nullptr, options ? options->log_user : nullptr);
    std::ostream log(&sink);
    const auto opts = run_options(options, &log);
    const auto manifest = volprop::read_manifest(manifest_path);
    const auto outcome = volprop::run_config(config->config, manifest, manifest_base(manifest_path), opts);
    log.flush();
    if (summary) {
      std::memset(summary, 0, sizeof *summary);
      std::snprintf(summary->config_id, sizeof summary->config_id, "%s", outcome.config_id.c_str());
      summary->records = outcome.records.size();
      summary->failures = outcome.failures.size();
      summary->mean_dice = volprop::aggregate(outcome.records).overall.dice.mean;
    }
  });
}

volprop_status volprop_grid_load(const char* path, volprop_grid** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new volprop_grid{volprop::load_grid(path)};
  });
}

size_t volprop_grid_size(const volprop_grid* grid) { return grid ? grid->rows.size() : 0; }

volprop_status volprop_grid_row(const volprop_grid* grid, size_t index, const char** experiment, const char** label,
                                const char** config_id) {
  return guarded([&] {
    require(grid, "grid");
    if (index >= grid->rows.size()) volprop::fail(volprop::ErrorCode::InvalidArgument, "row index out of range");
    const auto& row = grid->rows[index];
    if (experiment) *experiment = row.experiment.c_str();
    if (label) *label = row.label.c_str();
    if (config_id) *config_id = row.config_id.c_str();
  });
}

void volprop_grid_free(volprop_grid* grid) { delete grid; }

volprop_status volprop_ablate(const volprop_grid* grid, const char* manifest_path, const volprop_run_options* options,
                              volprop_ablate_summary* summary) {
  return guarded([&] {
    require(grid, "grid");
    require(manifest_path, "manifest_path");
    LineSink sink(options ? options->log : nullptr, options ? options->log_user : nullptr);
    std::ostream log(&sink);
    const auto opts = run_options(options, &log);
    const auto manifest = volprop::read_manifest(manifest_path);
    const auto outcome = volprop::run_ablation(grid->rows, manifest, manifest_base(manifest_path), opts);
    log.flush();
    if (summary) {
      summary->rows = outcome.rows.size();
      summary->executed = outcome.executed.size();
      summary->skipped = outcome.skipped.size();
      summary->distinct = summary->executed + summary->skipped;
    }
  });
}

volprop_status volprop_report(const char* out_dir, const char* baseline, char** markdown) {
  return guarded([&] {
    require(out_dir, "out_dir");
    volprop::ReportOptions opts;
    if (baseline && *baseline) opts.baseline = baseline;
    const auto rep = volprop::cmd_report(out_dir, opts);
    if (markdown) *markdown = dup(rep.markdown);
  });
}

volprop_status volprop_profile_report(const char* out_dir, const char* format, const char* path) {
  return guarded([&] {
    require(out_dir, "out_dir");
    require(path, "path");
    const std::string f = format ? format : "csv";
    if (f != "csv" && f != "json") volprop::fail(volprop::ErrorCode::InvalidArgument, "format must be csv or json");
    std::vector<volprop::StageTiming> all;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "timings.csv")) files.push_back(entry.path() / "timings.csv");
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      auto t = volprop::read_timings_csv(file);
      all.insert(all.end(), t.begin(), t.end());
    }
    if (all.empty()) volprop::fail(volprop::ErrorCode::NoResults, "no timings under " + std::string(out_dir));
    volprop::report(all, f == "csv" ? volprop::ReportFormat::Csv : volprop::ReportFormat::Json, path);
  });
}

volprop_status volprop_curate(const volprop_curate_options* options, volprop_curate_summary* summary) {
  return guarded([&] {
    require(options, "options");
    require(options->dataset_root, "options.dataset_root");
    require(options->out_dir, "options.out_dir");
    const volprop::RuleTable rules =
        options->rules_path ? volprop::load_rules(options->rules_path) : volprop::builtin_bone_rules();
    volprop::CurateOptions co{options->dataset_root, options->out_dir, options->verbose != 0};
    const auto result = volprop::curate(co, rules);
    for (const auto& line : result.log) {
      if (options->log) options->log(options->log_user, line.c_str());
    }
    volprop::Manifest candidates;
    candidates.split = "candidates";
    candidates.rule_table_hash = rules.hash;
    candidates.entries = result.candidates;
    volprop::write_manifest(candidates, fs::path(options->out_dir) / "candidates.jsonl");
    if (summary) *summary = {result.cases_scanned, result.candidates.size(), result.ineligible};
  });
}

volprop_status volprop_build_split(const char* candidates_path, const char* split, size_t per_class, uint64_t seed,
                                   const char* out_path, size_t* entries) {
  return guarded([&] {
    require(candidates_path, "candidates_path");
    require(split, "split");
    require(out_path, "out_path");
    volprop::SplitSpec spec;
    const std::string name = split;
    if (name == "ablation500") {
      spec = volprop::ablation_split();
    } else if (name == "final2500") {
      spec = volprop::final_split();
    } else {
      if (per_class == 0) volprop::fail(volprop::ErrorCode::InvalidArgument, "custom splits need per_class", "per_class");
      spec.name = name;
    }
    if (per_class) spec.per_class = per_class;
    if (seed) spec.seed = seed;
    const auto candidates = volprop::read_manifest(candidates_path);
    const auto& rules = volprop::builtin_bone_rules();
    const bool bone_table = candidates.rule_table_hash.empty() || candidates.rule_table_hash == rules.hash;
    auto manifest = volprop::build_split(candidates.entries, spec, bone_table ? rules.classes() : std::vector<std::string>{},
                                         candidates.rule_table_hash.empty() ? rules.hash : candidates.rule_table_hash);
    // Entry paths stay relative to the candidates file's directory.
    const fs::path from = manifest_base(candidates_path);
    const fs::path to = manifest_base(out_path);
    if (fs::weakly_canonical(from) != fs::weakly_canonical(to)) {
      for (auto& e : manifest.entries) {
        for (std::string* p : {&e.mask, &e.volume}) {
          if (!fs::path(*p).is_absolute()) *p = fs::absolute(from / *p).lexically_normal().generic_string();
        }
      }
    }
    volprop::write_manifest(manifest, out_path);
    if (entries) *entries = manifest.entries.size();
  });
}

volprop_status volprop_manifest_overlap(const char* a_path, const char* b_path, size_t* shared) {
  return guarded([&] {
    require(a_path, "a_path");
    require(b_path, "b_path");
    require(shared, "shared");
    *shared = volprop::compare_manifests(volprop::read_manifest(a_path), volprop::read_manifest(b_path)).shared;
  });
}

volprop_status volprop_manifest_count(const char* path, size_t* entries) {
  return guarded([&] {
    require(path, "path");
    require(entries, "entries");
    *entries = volprop::read_manifest(path).entries.size();
  });
}

volprop_status volprop_phantom_suite(const char* dir, size_t count) {
  return guarded([&] {
    require(dir, "dir");
    volprop::write_phantom_suite(dir, count);
  });
}

volprop_status volprop_onnx_check(const char* model_dir) {
  return guarded([&] {
    require(model_dir, "model_dir");
    volprop::inspect_onnx_graphs(model_dir);
  });
}

}  // extern "C"
