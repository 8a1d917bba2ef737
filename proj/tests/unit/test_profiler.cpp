#include <doctest.h>

#include <fstream>
#include <map>
#include <random>

#include "common/error.hpp"
#include "dataharness/phantom.hpp"
#include "engine/propagate.hpp"
#include "engine/synthetic_backend.hpp"
#include "profiler/profiler.hpp"
#include "support/oracles.hpp"

using namespace volprop;

namespace {

template <class F>
ErrorCode error_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

constexpr Stage kStages[] = {Stage::StateInit, Stage::Encode,   Stage::MemoryAttention,
                             Stage::MemoryEncode, Stage::Decode, Stage::Tracking};

struct Pass {
  Profiler profiler;
  std::size_t produced = 0;
};

Pass forward_pass(const PhantomSpec& spec, const MemoryPolicy& policy, bool enabled = true) {
  const Phantom ph = make_phantom(spec);
  auto image = std::make_shared<const Volume>(preprocess_volume(ph.image, {}));
  const SyntheticBackend b;
  Pass out{Profiler(enabled, "run", "cfg"), 0};
  const SliceSequence seq = reslice(image, Axis::Axial);
  const auto emb = encode_sequence(seq, {}, b, &out.profiler);
  const PromptSet prompts = simulate_prompts(ph.mask, Axis::Axial, PromptStrategy::fml());
  const LogitVolume run = propagate_axis(seq, emb, prompts, policy, b, Direction::Forward, &out.profiler);
  out.produced = static_cast<std::size_t>(std::count(run.produced.begin(), run.produced.end(), true));
  return out;
}

double total(const Profiler& p, Stage s) {
  double sum = 0.0;
  for (const auto& t : p.timings())
    if (t.stage == s) sum += t.duration_ms;
  return sum;
}

}  // namespace

TEST_CASE("stage names") {
  for (Stage s : kStages) CHECK(parse_stage(to_string(s)) == s);
  CHECK(error_of([] { parse_stage("warmup"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("quantiles match a sorted-copy oracle") {
  std::mt19937 rng(61);
  std::exponential_distribution<double> e(0.2);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(std::uniform_int_distribution<int>(1, 40)(rng));
    for (auto& x : v) x = e(rng);
    std::sort(v.begin(), v.end());
    for (double q : {0.0, 0.25, 0.5, 0.75, 0.95, 1.0}) {
      CHECK(quantile_sorted(v, q) == doctest::Approx(oracle::quantile(v, q)).epsilon(1e-12));
    }
  }
  const std::vector<double> four{1, 2, 3, 4};
  CHECK(quantile_sorted(four, 0.5) == 2.5);
  CHECK(quantile_sorted(four, 1.0) == 4.0);
  CHECK(error_of([] { quantile_sorted({}, 0.5); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("summaries group by config and stage") {
  std::vector<StageTiming> t;
  for (int i = 1; i <= 5; ++i) t.push_back({Stage::Decode, double(i), i, "r", "b"});
  t.push_back({Stage::Decode, 7.0, 0, "r", "a"});
  t.push_back({Stage::Encode, 2.0, 0, "r", "b"});
  const auto s = summarize(t);
  REQUIRE(s.size() == 3);
  CHECK(s[0].config_id == "a");
  CHECK(s[0].count == 1);
  CHECK(s[0].median == 7.0);
  CHECK(s[0].p95 == 7.0);
  CHECK(s[0].min == s[0].max);
  CHECK(s[1].stage == Stage::Encode);
  CHECK(s[2].stage == Stage::Decode);
  CHECK(s[2].count == 5);
  CHECK(s[2].mean == 3.0);
  CHECK(s[2].median == 3.0);
  CHECK(s[2].q1 == 2.0);
  CHECK(s[2].q3 == 4.0);
  CHECK(s[2].p95 == doctest::Approx(4.8));
}

TEST_CASE("timings csv round trip and reports") {
  const auto dir = oracle::scratch_dir("prof");
  const std::vector<StageTiming> t{{Stage::StateInit, 12.5, -1, "r1", "c"},
                                   {Stage::Tracking, 0.25, 3, "r1", "c"},
                                   {Stage::Tracking, 1.0, 4, "r2", "c"}};
  write_timings_csv(t, dir / "t.csv");
  const auto back = read_timings_csv(dir / "t.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].stage == t[i].stage);
    CHECK(back[i].slice_index == t[i].slice_index);
    CHECK(back[i].duration_ms == t[i].duration_ms);
    CHECK(back[i].run_id == t[i].run_id);
    CHECK(back[i].config_id == t[i].config_id);
  }

  report(t, ReportFormat::Csv, dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "config_id,stage,count,mean_ms,median_ms,p95_ms,min_ms,q1_ms,q3_ms,max_ms");
  std::getline(in, row);
  CHECK(row.rfind("c,state_init,1,12.500", 0) == 0);
  report(t, ReportFormat::Json, dir / "s.json");
  CHECK(std::filesystem::file_size(dir / "s.json") > 0);

  CHECK(error_of([&] { report({}, ReportFormat::Csv, dir / "e.csv"); }) == ErrorCode::InvalidArgument);
  std::ofstream(dir / "bad.csv") << "h\nr,c,Tracking,1\n";
  CHECK(error_of([&] { read_timings_csv(dir / "bad.csv"); }) == ErrorCode::IoFailure);
  CHECK(error_of([&] { read_timings_csv(dir / "missing.csv"); }) == ErrorCode::IoFailure);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a single timing summarizes to itself") {
  const std::vector<StageTiming> t{{Stage::Encode, 3.25, 0, "r", "c"}};
  const auto s = summarize(t);
  REQUIRE(s.size() == 1);
  for (double v : {s[0].mean, s[0].median, s[0].p95, s[0].min, s[0].q1, s[0].q3, s[0].max}) CHECK(v == 3.25);
}

TEST_CASE("a forward pass records one tracking entry per produced slice") {
  const Pass p = forward_pass(sphere_phantom_spec(), {});
  std::map<Stage, std::size_t> n;
  for (const auto& t : p.profiler.timings()) {
    ++n[t.stage];
    CHECK(t.run_id == "run");
    CHECK(t.config_id == "cfg");
  }
  CHECK(p.produced == 21);
  CHECK(n[Stage::Tracking] == p.produced);
  CHECK(n[Stage::MemoryAttention] == p.produced);
  CHECK(n[Stage::Encode] == 64);
  CHECK(n[Stage::StateInit] == 1);

  // Tracking spans exactly its three stages.
  std::map<int, double> parts, tracking;
  for (const auto& t : p.profiler.timings()) {
    if (t.stage == Stage::Tracking) tracking[t.slice_index] = t.duration_ms;
    if (t.stage == Stage::MemoryAttention || t.stage == Stage::Decode || t.stage == Stage::MemoryEncode) {
      parts[t.slice_index] += t.duration_ms;
    }
  }
  for (const auto& [slice, ms] : tracking) CHECK(ms == doctest::Approx(parts[slice]).epsilon(1e-9));
}

TEST_CASE("disabled profiling records nothing") {
  const Pass p = forward_pass(sphere_phantom_spec(), {}, false);
  CHECK(p.profiler.timings().empty());
  Profiler off;
  off.record(Stage::Decode, 0, 5.0);
  CHECK(off.timings().empty());
  Profiler on(true, "a"), other(true, "b");
  other.record(Stage::Decode, 1, 2.0);
  on.merge(other);
  REQUIRE(on.timings().size() == 1);
  CHECK(on.timings()[0].run_id == "b");
}

TEST_CASE("intelligent slicing spends less time in memory attention") {
  // Larger slices so attention cost dominates timer noise; best of three.
  PhantomSpec spec = sphere_phantom_spec();
  spec.dims = {192, 192, 48};
  spec.target = {{96.0, 96.0, 24.0}, 20.0};
  MemoryPolicy base, is;
  base.tau = is.tau = 0.0;
  is.intelligent_slicing = true;
  double best_base = 1e300, best_is = 1e300;
  for (int i = 0; i < 3; ++i) {
    best_base = std::min(best_base, total(forward_pass(spec, base).profiler, Stage::MemoryAttention));
    best_is = std::min(best_is, total(forward_pass(spec, is).profiler, Stage::MemoryAttention));
  }
  CHECK(best_is < best_base);
}
