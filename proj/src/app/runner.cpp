#include "app/runner.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "engine/onnx_backend.hpp"
#include "engine/propagate.hpp"
#include "engine/synthetic_backend.hpp"
#include "preproc/preproc.hpp"
#include "volgrid/crop.hpp"
#include "volgrid/nifti.hpp"

namespace volprop {

using nlohmann::json;
namespace fs = std::filesystem;

std::unique_ptr<SegmentationBackend> make_backend(const BackendSpec& spec) {
  if (spec.kind == "synthetic") return synthetic_backend(spec.synthetic);
  if (spec.kind == "onnx") return onnx_backend(spec.model_dir);
  fail(ErrorCode::ConfigInvalid, "unknown backend kind '" + spec.kind + "'", "backend.kind");
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

MetricsRecord run_case(const RunConfig& config, const ManifestEntry& entry, const fs::path& base_dir,
                       const SegmentationBackend& backend, Profiler* profiler, const EmbeddingCache* cache) {
  const Volume image = load_volume(resolve(base_dir, entry.volume));
  const Volume gt = load_mask(resolve(base_dir, entry.mask));
  if (image.dims() != gt.dims()) {
    fail(ErrorCode::DimensionMismatch, entry.case_id + ": image and mask shapes differ", entry.case_id);
  }

  Volume work_image = image;
  Volume work_gt = gt;
  std::optional<CropInfo> crop;
  if (config.crop.enabled) {
    const auto box = bounding_box(gt);
    if (!box) fail(ErrorCode::EmptyMask, entry.case_id + ": ground truth is empty", entry.case_id);
    CroppedVolume ci = crop_to_roi(image, *box, config.crop.margin);
    work_image = std::move(ci.volume);
    work_gt = crop_to_roi(gt, *box, config.crop.margin).volume;
    crop = ci.info;
  }

  auto prepared = std::make_shared<const Volume>(preprocess_volume(work_image, config.preprocess));
  SegmentRequest request;
  request.mode = config.propagation;
  request.strategy = config.prompt;
  request.policy = config.memory;
  request.preprocess = config.preprocess;
  request.axis = config.axis;
  const SegmentResult result = segment_structure(prepared, work_gt, request, backend, profiler, cache);

  const Volume pred = crop ? uncrop(result.mask, *crop, gt) : result.mask;
  MetricsRecord r = evaluate(pred, gt, {config.hd95});
  r.case_id = entry.case_id;
  r.structure = entry.target_class;
  r.config_id = config_id(config);
  if (profiler && profiler->enabled()) {
    for (const auto& t : profiler->timings()) r.timings_ms[std::string(to_string(t.stage))] += t.duration_ms;
  }
  return r;
}

bool run_complete(const fs::path& out, const std::string& id) { return fs::exists(out / id / "DONE"); }

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out << text;
    if (!out) fail(ErrorCode::IoFailure, "failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

json stat_json(const Stat& s) { return {{"n", s.n}, {"mean", s.mean}, {"std", s.std}}; }

json summary_json(const ClassSummary& c) {
  return {{"count", c.count},
          {"dice", stat_json(c.dice)},
          {"iou", stat_json(c.iou)},
          {"hausdorff_mm", stat_json(c.hausdorff_mm)},
          {"hd_excluded", c.hd_excluded}};
}

json record_json(const MetricsRecord& r) {
  json j{{"case_id", r.case_id},
         {"dice", r.dice},
         {"iou", r.iou},
         {"hausdorff_mm", r.hausdorff_mm ? json(*r.hausdorff_mm) : json(nullptr)}};
  if (r.hd95_mm) j["hd95_mm"] = *r.hd95_mm;
  if (!r.timings_ms.empty()) j["timings_ms"] = r.timings_ms;
  return j;
}

}  // namespace

json records_document(const RunConfig& config, const std::string& id, const std::vector<MetricsRecord>& records,
                      std::size_t failures) {
  const AggregateTable table = aggregate(records);
  json classes = json::object();
  for (const auto& c : table.classes) classes[c.structure] = {{"records", json::array()}, {"summary", summary_json(c)}};
  for (const auto& r : records) classes[r.structure]["records"].push_back(record_json(r));
  json entry{{"name", config.name},
             {"config", config_to_json(config)},
             {"classes", classes},
             {"overall", summary_json(table.overall)},
             {"failures", failures}};
  return {{"schema_version", kReportSchemaVersion}, {"hd_units", "mm"}, {"configs", {{id, entry}}}};
}

RunOutcome run_config(const RunConfig& config, const Manifest& manifest, const fs::path& base_dir,
                      const RunOptions& options) {
  validate_config(config);
  RunOutcome outcome;
  outcome.config_id = config_id(config);
  outcome.dir = options.out / outcome.config_id;
  fs::create_directories(outcome.dir);
  fs::remove(outcome.dir / "DONE");

  const auto backend = make_backend(config.backend);
  std::optional<EmbeddingCache> cache;
  if (options.cache_dir) cache.emplace(*options.cache_dir);

  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<MetricsRecord>> results(n);
  std::vector<std::optional<CaseFailure>> failures(n);
  std::vector<Profiler> profilers(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex log_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || stop.load()) return;
      const auto& e = manifest.entries[i];
      profilers[i] = Profiler(options.profile, e.case_id + "/" + e.target_class, outcome.config_id);
      try {
        try {
          results[i] = run_case(config, e, base_dir, *backend, &profilers[i], cache ? &*cache : nullptr);
        } catch (const fs::filesystem_error& err) {
          fail(ErrorCode::IoFailure, err.what(), e.case_id);
        } catch (const std::bad_alloc&) {
          throw;
        } catch (const Error&) {
          throw;
        } catch (const std::exception& err) {
          fail(ErrorCode::BackendFailure, err.what(), e.case_id);
        }
      } catch (const Error& err) {
        failures[i] = CaseFailure{e.case_id, e.target_class, err.code(), err.what()};
        errors[i] = std::current_exception();
        if (!options.keep_going) stop = true;
        if (options.log) {
          std::lock_guard lock(log_mutex);
          *options.log << "failed " << e.case_id << " " << e.target_class << ": " << err.what() << "\n";
        }
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(n, 1)));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  json failure_list = json::array();
  Profiler merged(options.profile, "", outcome.config_id);
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) outcome.records.push_back(std::move(*results[i]));
    if (failures[i]) {
      failure_list.push_back({{"case_id", failures[i]->case_id},
                              {"structure", failures[i]->structure},
                              {"code", std::string(to_string(failures[i]->code))},
                              {"message", failures[i]->message}});
      outcome.failures.push_back(std::move(*failures[i]));
    }
    merged.merge(profilers[i]);
  }
  outcome.timings = merged.timings();

  write_text_atomic(outcome.dir / "failures.json", failure_list.dump(2) + "\n");
  if (!options.keep_going) {
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  write_text_atomic(outcome.dir / "config.json", config_to_json(config).dump(2) + "\n");
  write_records_csv(outcome.records, outcome.dir / "records.csv", config.hd95);
  write_text_atomic(outcome.dir / "records.json",
                    records_document(config, outcome.config_id, outcome.records, outcome.failures.size()).dump(2) +
                        "\n");
  if (options.profile) write_timings_csv(outcome.timings, outcome.dir / "timings.csv");
  write_text_atomic(outcome.dir / "DONE", outcome.config_id + "\n");
  return outcome;
}

}  // namespace volprop
