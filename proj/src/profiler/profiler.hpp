#pragma once

#include <chrono>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace volprop {

enum class Stage { StateInit, Encode, MemoryAttention, MemoryEncode, Decode, Tracking };

std::string_view to_string(Stage stage) noexcept;
Stage parse_stage(std::string_view name);

struct StageTiming {
  Stage stage = Stage::Tracking;
  double duration_ms = 0.0;
  int slice_index = -1;  // -1 for whole-run stages (StateInit)
  std::string run_id;
  std::string config_id;
};

// Per-run collector. Disabled profilers record nothing and cost one branch
// per stage; collectors from concurrent runs are merged afterwards.
class Profiler {
 public:
  using Clock = std::chrono::steady_clock;

  Profiler() = default;
  Profiler(bool enabled, std::string run_id, std::string config_id = {});

  bool enabled() const noexcept { return enabled_; }
  void record(Stage stage, int slice_index, Clock::time_point begin, Clock::time_point end);
  void record(Stage stage, int slice_index, double duration_ms);
  void merge(const Profiler& other);

  const std::vector<StageTiming>& timings() const noexcept { return timings_; }
  const std::string& run_id() const noexcept { return run_id_; }

  static Clock::time_point now() noexcept { return Clock::now(); }
  static double to_ms(Clock::time_point begin, Clock::time_point end) noexcept;

 private:
  bool enabled_ = false;
  std::string run_id_;
  std::string config_id_;
  std::vector<StageTiming> timings_;
};

/// Linear-interpolation quantile (q in [0, 1]) of an ascending sample.
double quantile_sorted(std::span<const double> sorted, double q);

struct StageSummary {
  std::string config_id;
  Stage stage = Stage::Tracking;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Grouped by (config_id, stage), ordered by config_id then stage.
std::vector<StageSummary> summarize(std::span<const StageTiming> timings);

enum class ReportFormat { Csv, Json };

/// Raw rows: run_id, config_id, stage, slice_index, duration_ms.
void write_timings_csv(std::span<const StageTiming> timings, const std::filesystem::path& path);

/// Inverse of write_timings_csv. Throws IoFailure.
std::vector<StageTiming> read_timings_csv(const std::filesystem::path& path);

/// Per-config, per-stage summary with boxplot quantiles. Throws IoFailure,
/// InvalidArgument on an empty input.
void report(std::span<const StageTiming> timings, ReportFormat format, const std::filesystem::path& path);

}  // namespace volprop
