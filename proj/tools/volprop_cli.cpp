// Command-line front end. Talks to the library only through volprop.h.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "volprop/volprop.h"

namespace {

struct Failure {
  volprop_status status;
};

void check(volprop_status s) {
  if (s != VOLPROP_OK) throw Failure{s};
}

void print_line(void*, const char* line) { std::cout << line << std::endl; }

struct RunFlags {
  std::string out;
  std::size_t workers = 1;
  bool keep_going = false;
  bool profile = false;
  std::string backend;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--out", f.out, "Output directory")->required();
  cmd->add_option("--workers", f.workers, "Parallel manifest entries")->check(CLI::PositiveNumber);
  cmd->add_flag("--keep-going", f.keep_going, "Record failing entries and continue");
  cmd->add_flag("--profile", f.profile, "Write per-stage timings");
  cmd->add_option("--backend", f.backend, "synthetic | onnx:<dir> (overrides the config)");
}

volprop_run_options make_options(const RunFlags& f, const char* cache) {
  volprop_run_options o{};
  o.out_dir = f.out.c_str();
  o.workers = f.workers;
  o.keep_going = f.keep_going;
  o.profile = f.profile;
  o.cache_dir = cache;
  o.log = print_line;
  return o;
}

const char* cache_dir() {
  const char* c = std::getenv("VOLPROP_CACHE");
  return c && *c ? c : nullptr;
}

volprop_config* resolve_config(const std::string& path, const std::string& preset, const std::vector<std::string>& sets,
                               const std::string& backend) {
  volprop_config* cfg = nullptr;
  check(path.empty() ? volprop_config_preset(preset.empty() ? "baseline" : preset.c_str(), &cfg)
                     : volprop_config_load(path.c_str(), &cfg));
  try {
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "--set expects key=value, got '" << kv << "'\n";
        throw Failure{VOLPROP_INVALID_ARGUMENT};
      }
      check(volprop_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    if (!backend.empty()) check(volprop_config_set_backend(cfg, backend.c_str()));
  } catch (...) {
    volprop_config_free(cfg);
    throw;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volprop: slice-propagation segmentation of CT volumes"};
  app.set_version_flag("--version", volprop_version());
  app.require_subcommand(1);

  // run
  RunFlags run_flags;
  std::string config_path, preset, manifest;
  std::vector<std::string> sets;
  auto* run = app.add_subcommand("run", "Segment and score every manifest entry");
  auto* config_opt = run->add_option("--config", config_path, "Config JSON file");
  run->add_option("--preset", preset, "Named config: baseline, np, sps, is, is+sps, three-axis-9")
      ->excludes(config_opt);
  run->add_option("--manifest", manifest, "Manifest (JSON lines)")->required();
  run->add_option("--set", sets, "Override a config key, e.g. memory.tau=0.3");
  add_run_flags(run, run_flags);

  // ablate
  RunFlags ablate_flags;
  std::string grid_path, ablate_manifest;
  auto* ablate = app.add_subcommand("ablate", "Run every configuration of an ablation grid (resumable)");
  ablate->add_option("--grid", grid_path, "Grid JSON")->required();
  ablate->add_option("--manifest", ablate_manifest, "Manifest (JSON lines)")->required();
  add_run_flags(ablate, ablate_flags);
  bool list_only = false;
  ablate->add_flag("--list", list_only, "Print the expanded rows and exit");

  // report
  std::string report_out, baseline = "baseline";
  auto* report = app.add_subcommand("report", "Summarize completed runs");
  report->add_option("--out", report_out, "Directory holding run outputs")->required();
  report->add_option("--baseline", baseline, "Baseline config name or id");

  // profile
  std::string profile_out, profile_format = "csv", profile_path;
  auto* profile = app.add_subcommand("profile", "Summarize per-stage timings of profiled runs");
  profile->add_option("--out", profile_out, "Directory holding run outputs")->required();
  profile->add_option("--format", profile_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  profile->add_option("--output", profile_path, "Summary file")->required();

  // curate
  std::string dataset, curate_out, rules;
  bool verbose = false;
  auto* curate = app.add_subcommand("curate", "Aggregate bone labels and build the evaluation splits");
  curate->add_option("--dataset", dataset, "TotalSegmentator root")->required();
  curate->add_option("--out", curate_out, "Output directory")->required();
  curate->add_option("--rules", rules, "Label rule table (default: built-in bone table)");
  curate->add_flag("--verbose", verbose, "Print slice counts for every mask");

  // split
  std::string candidates, split_name, split_out;
  std::size_t per_class = 0;
  std::uint64_t seed = 0;
  auto* split = app.add_subcommand("split", "Sample a balanced split from a candidates manifest");
  split->add_option("--candidates", candidates, "Candidates manifest")->required();
  split->add_option("--split", split_name, "ablation500 | final2500 | <custom>")->required();
  split->add_option("--per-class", per_class, "Entries per class");
  split->add_option("--seed", seed, "Sampling seed");
  split->add_option("--out", split_out, "Output manifest")->required();

  // overlap
  std::string overlap_a, overlap_b;
  auto* overlap = app.add_subcommand("overlap", "Count (case, class) pairs shared by two manifests");
  overlap->add_option("a", overlap_a)->required();
  overlap->add_option("b", overlap_b)->required();

  // phantom
  std::string phantom_out;
  std::size_t phantom_count = 10;
  auto* phantom = app.add_subcommand("phantom", "Write a sphere phantom suite and its manifest");
  phantom->add_option("--out", phantom_out, "Output directory")->required();
  phantom->add_option("--count", phantom_count, "Number of phantoms");

  // config
  std::string show_path, show_preset;
  std::vector<std::string> show_sets;
  auto* show = app.add_subcommand("config", "Print a resolved config and its id");
  auto* show_config_opt = show->add_option("--config", show_path, "Config JSON file");
  show->add_option("--preset", show_preset, "Named config")->excludes(show_config_opt);
  show->add_option("--set", show_sets, "Override a config key");

  // onnx-check
  std::string model_dir;
  auto* onnx = app.add_subcommand("onnx-check", "Validate exported graphs against the signature manifest");
  onnx->add_option("model_dir", model_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      volprop_config* cfg = resolve_config(config_path, preset, sets, run_flags.backend);
      const auto opts = make_options(run_flags, cache_dir());
      volprop_run_summary s{};
      const volprop_status st = volprop_run(cfg, manifest.c_str(), &opts, &s);
      volprop_config_free(cfg);
      check(st);
      std::printf("config %s: %zu records, %zu failures, mean Dice %.4f\n", s.config_id, s.records, s.failures,
                  s.mean_dice);
    } else if (*ablate) {
      volprop_grid* grid = nullptr;
      check(volprop_grid_load(grid_path.c_str(), &grid));
      if (list_only) {
        for (std::size_t i = 0; i < volprop_grid_size(grid); ++i) {
          const char *ex, *label, *id;
          volprop_grid_row(grid, i, &ex, &label, &id);
          std::printf("%s\t%s\t%s\n", ex, label, id);
        }
        volprop_grid_free(grid);
        return 0;
      }
      const auto opts = make_options(ablate_flags, cache_dir());
      volprop_ablate_summary s{};
      volprop_status st = VOLPROP_OK;
      if (!ablate_flags.backend.empty()) {
        std::cerr << "ablate: set the backend in the grid's base config\n";
        st = VOLPROP_INVALID_ARGUMENT;
      } else {
        st = volprop_ablate(grid, ablate_manifest.c_str(), &opts, &s);
      }
      volprop_grid_free(grid);
      check(st);
      std::printf("%zu rows, %zu distinct configs: %zu run, %zu already complete\n", s.rows, s.distinct, s.executed,
                  s.skipped);
    } else if (*report) {
      char* md = nullptr;
      check(volprop_report(report_out.c_str(), baseline.c_str(), &md));
      std::fputs(md, stdout);
      volprop_string_free(md);
    } else if (*profile) {
      check(volprop_profile_report(profile_out.c_str(), profile_format.c_str(), profile_path.c_str()));
    } else if (*curate) {
      volprop_curate_options o{};
      o.dataset_root = dataset.c_str();
      o.out_dir = curate_out.c_str();
      o.rules_path = rules.empty() ? nullptr : rules.c_str();
      o.verbose = verbose;
      o.log = print_line;
      volprop_curate_summary s{};
      check(volprop_curate(&o, &s));
      std::printf("%zu cases, %zu eligible masks, %zu ineligible\n", s.cases_scanned, s.candidates, s.ineligible);
      const std::string cand = curate_out + "/candidates.jsonl";
      std::size_t n = 0;
      for (const char* name : {"ablation500", "final2500"}) {
        const std::string path = curate_out + "/" + name + ".jsonl";
        const volprop_status st = volprop_build_split(cand.c_str(), name, 0, 0, path.c_str(), &n);
        if (st == VOLPROP_INSUFFICIENT_CANDIDATES) {
          std::printf("%s: skipped, %s\n", name, volprop_last_error());
          continue;
        }
        check(st);
        std::printf("%s: %zu entries -> %s\n", name, n, path.c_str());
      }
      std::size_t shared = 0;
      const std::string a = curate_out + "/ablation500.jsonl", b = curate_out + "/final2500.jsonl";
      if (volprop_manifest_overlap(a.c_str(), b.c_str(), &shared) == VOLPROP_OK) {
        std::printf("disjointness: %zu (case, class) pairs appear in both splits\n", shared);
      }
    } else if (*split) {
      std::size_t n = 0;
      check(volprop_build_split(candidates.c_str(), split_name.c_str(), per_class, seed, split_out.c_str(), &n));
      std::printf("%s: %zu entries -> %s\n", split_name.c_str(), n, split_out.c_str());
    } else if (*overlap) {
      std::size_t shared = 0;
      check(volprop_manifest_overlap(overlap_a.c_str(), overlap_b.c_str(), &shared));
      std::printf("%zu shared (case, class) pairs\n", shared);
    } else if (*phantom) {
      check(volprop_phantom_suite(phantom_out.c_str(), phantom_count));
      std::printf("%zu phantoms -> %s/manifest.jsonl\n", phantom_count, phantom_out.c_str());
    } else if (*show) {
      volprop_config* cfg = resolve_config(show_path, show_preset, show_sets, "");
      char *id = nullptr, *text = nullptr;
      const volprop_status a = volprop_config_id(cfg, &id);
      const volprop_status b = a == VOLPROP_OK ? volprop_config_to_json(cfg, &text) : a;
      volprop_config_free(cfg);
      check(b);
      std::printf("config_id %s\n%s\n", id, text);
      volprop_string_free(id);
      volprop_string_free(text);
    } else if (*onnx) {
      check(volprop_onnx_check(model_dir.c_str()));
      std::printf("%s: graphs match the signature manifest\n", model_dir.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s", volprop_last_error());
    const std::string subject = volprop_last_error_subject();
    if (!subject.empty()) std::fprintf(stderr, " [%s]", subject.c_str());
    std::fprintf(stderr, "\n");
    return f.status == VOLPROP_INVALID_ARGUMENT ? 2 : 1;
  }
  return 0;
}
