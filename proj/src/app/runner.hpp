#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "app/config.hpp"
#include "common/error.hpp"
#include "dataharness/dataharness.hpp"
#include "engine/backend.hpp"
#include "metrics/metrics.hpp"
#include "profiler/profiler.hpp"

namespace volprop {

inline constexpr int kReportSchemaVersion = 1;

struct CaseFailure {
  std::string case_id;
  std::string structure;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
};

struct RunOptions {
  std::filesystem::path out;
  std::size_t workers = 1;
  bool keep_going = false;
  bool profile = false;
  std::optional<std::filesystem::path> cache_dir;
  std::ostream* log = nullptr;
};

struct RunOutcome {
  std::string config_id;
  std::filesystem::path dir;  // out/<config_id>
  std::vector<MetricsRecord> records;  // manifest order, failures omitted
  std::vector<CaseFailure> failures;
  std::vector<StageTiming> timings;
};

std::unique_ptr<SegmentationBackend> make_backend(const BackendSpec& spec);

/// Loads one manifest entry (paths relative to base_dir), segments it and
/// scores it against its ground truth on the full grid.
MetricsRecord run_case(const RunConfig& config, const ManifestEntry& entry, const std::filesystem::path& base_dir,
                       const SegmentationBackend& backend, Profiler* profiler = nullptr,
                       const EmbeddingCache* cache = nullptr);

/// Runs every entry and writes out/<config_id>/ {config.json, records.csv,
/// records.json, failures.json, timings.csv when profiling, DONE}. Without
/// keep_going the first failing entry aborts the run (rethrown, no DONE).
RunOutcome run_config(const RunConfig& config, const Manifest& manifest, const std::filesystem::path& base_dir,
                      const RunOptions& options);

/// True once out/<config_id>/DONE exists.
bool run_complete(const std::filesystem::path& out, const std::string& config_id);

/// Nested records document: config -> class -> {records, summary}.
nlohmann::json records_document(const RunConfig& config, const std::string& config_id,
                                const std::vector<MetricsRecord>& records, std::size_t failures);

/// Written to a temporary name first, then renamed into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace volprop
