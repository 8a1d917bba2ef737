#include "profiler/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"

namespace volprop {

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::StateInit: return "state_init";
    case Stage::Encode: return "encode";
    case Stage::MemoryAttention: return "memory_attention";
    case Stage::MemoryEncode: return "memory_encode";
    case Stage::Decode: return "decode";
    case Stage::Tracking: return "tracking";
  }
  return "tracking";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::StateInit, Stage::Encode, Stage::MemoryAttention, Stage::MemoryEncode, Stage::Decode,
                  Stage::Tracking}) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorCode::InvalidArgument, "unknown stage '" + std::string(name) + "'");
}

Profiler::Profiler(bool enabled, std::string run_id, std::string config_id)
    : enabled_(enabled), run_id_(std::move(run_id)), config_id_(std::move(config_id)) {}

double Profiler::to_ms(Clock::time_point begin, Clock::time_point end) noexcept {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(end - begin).count();
  return std::max(0.0, static_cast<double>(ns) / 1e6);
}

void Profiler::record(Stage stage, int slice_index, Clock::time_point begin, Clock::time_point end) {
  if (enabled_) record(stage, slice_index, to_ms(begin, end));
}

void Profiler::record(Stage stage, int slice_index, double duration_ms) {
  if (!enabled_) return;
  timings_.push_back({stage, std::max(0.0, duration_ms), slice_index, run_id_, config_id_});
}

void Profiler::merge(const Profiler& other) {
  timings_.insert(timings_.end(), other.timings_.begin(), other.timings_.end());
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of an empty sample");
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::vector<StageSummary> summarize(std::span<const StageTiming> timings) {
  std::map<std::pair<std::string, Stage>, std::vector<double>> groups;
  for (const auto& t : timings) groups[{t.config_id, t.stage}].push_back(t.duration_ms);

  std::vector<StageSummary> out;
  for (auto& [key, values] : groups) {
    std::sort(values.begin(), values.end());
    StageSummary s;
    s.config_id = key.first;
    s.stage = key.second;
    s.count = values.size();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    s.median = quantile_sorted(values, 0.5);
    s.p95 = quantile_sorted(values, 0.95);
    s.q1 = quantile_sorted(values, 0.25);
    s.q3 = quantile_sorted(values, 0.75);
    s.min = values.front();
    s.max = values.back();
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_timings_csv(std::span<const StageTiming> timings, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "run_id,config_id,stage,slice_index,duration_ms\n";
  for (const auto& t : timings) {
    out << t.run_id << ',' << t.config_id << ',' << to_string(t.stage) << ',' << t.slice_index << ','
        << ms(t.duration_ms) << '\n';
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<StageTiming> read_timings_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::vector<StageTiming> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) fail(ErrorCode::IoFailure, path.string() + ": malformed row '" + line + "'");
    try {
      out.push_back({parse_stage(f[2]), std::stod(f[4]), std::stoi(f[3]), f[0], f[1]});
    } catch (const std::logic_error&) {
      fail(ErrorCode::IoFailure, path.string() + ": malformed row '" + line + "'");
    }
  }
  return out;
}

void report(std::span<const StageTiming> timings, ReportFormat format, const std::filesystem::path& path) {
  if (timings.empty()) fail(ErrorCode::InvalidArgument, "no timings to report");
  const auto summary = summarize(timings);
  auto out = open_for_write(path);
  if (format == ReportFormat::Csv) {
    out << "config_id,stage,count,mean_ms,median_ms,p95_ms,min_ms,q1_ms,q3_ms,max_ms\n";
    for (const auto& s : summary) {
      out << s.config_id << ',' << to_string(s.stage) << ',' << s.count << ',' << ms(s.mean) << ',' << ms(s.median)
          << ',' << ms(s.p95) << ',' << ms(s.min) << ',' << ms(s.q1) << ',' << ms(s.q3) << ',' << ms(s.max) << '\n';
    }
  } else {
    nlohmann::ordered_json root;
    root["units"] = "ms";
    auto& configs = root["configs"];
    configs = nlohmann::ordered_json::object();
    for (const auto& s : summary) {
      configs[s.config_id][std::string(to_string(s.stage))] = {
          {"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"min", s.min},
          {"q1", s.q1},       {"q3", s.q3},     {"max", s.max}};
    }
    out << root.dump(2) << '\n';
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace volprop
