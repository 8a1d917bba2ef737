#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "common/error.hpp"
#include "dataharness/dataharness.hpp"
#include "dataharness/phantom.hpp"
#include "metrics/metrics.hpp"
#include "support/oracles.hpp"
#include "volgrid/nifti.hpp"

using namespace volprop;
namespace fs = std::filesystem;

namespace {

template <class F>
ErrorCode error_of(F f, std::string* subject = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (subject) *subject = e.subject();
    return e.code();
  }
  return ErrorCode{};
}

// Mask with foreground on axial slices [first, last] at one pixel.
Volume slab(std::size_t first, std::size_t last, std::size_t x = 1, std::size_t depth = 20) {
  Volume m({4, 4, depth}, {1, 1, 1}, VolumeKind::BinaryMask);
  for (std::size_t z = first; z <= last; ++z) m.at(x, 1, z) = 1.0f;
  return m;
}

std::vector<ManifestEntry> pool(std::size_t per_class, const std::vector<std::string>& classes) {
  std::vector<ManifestEntry> out;
  for (const auto& c : classes)
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::string id = "s" + std::to_string(1000 + i);
      out.push_back({id, c, "masks/" + id + "_" + c + ".nii.gz", "/data/" + id + "/ct.nii.gz"});
    }
  return out;
}

}  // namespace

TEST_CASE("builtin bone table") {
  const RuleTable& t = builtin_bone_rules();
  CHECK(t.classes().size() == 10);
  CHECK_FALSE(t.hash.empty());
  std::set<std::string> labels;
  std::size_t total = 0;
  for (const auto& r : t.rules) {
    total += r.labels.size();
    labels.insert(r.labels.begin(), r.labels.end());
  }
  CHECK(labels.size() == total);
  CHECK(parse_rules(R"({"rules":[{"target_class":"a","kind":"identity","labels":["x"]}]})").hash !=
        parse_rules(R"({"rules":[{"target_class":"a","kind":"identity","labels":["y"]}]})").hash);
}

TEST_CASE("rule table errors") {
  std::string subject;
  CHECK(error_of([] { parse_rules(R"({"rules":[{"target_class":"a","kind":"mirror","labels":["x"]}]})"); }) ==
        ErrorCode::ConfigInvalid);
  CHECK(error_of(
            [] {
              parse_rules(R"({"rules":[{"target_class":"a","kind":"identity","labels":["x"]},
                                       {"target_class":"b","kind":"identity","labels":["x"]}]})");
            },
            &subject) == ErrorCode::ConfigInvalid);
  CHECK(subject == "x");
  CHECK(error_of([] { parse_rules("not json"); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("vertebrae aggregation is the union of its levels") {
  std::mt19937_64 rng(51);
  const RuleTable& t = builtin_bone_rules();
  const AggregationRule* vert = nullptr;
  for (const auto& r : t.rules)
    if (r.target_class == "vertebrae") vert = &r;
  REQUIRE(vert);
  std::map<std::string, Volume> labels;
  for (std::size_t i = 0; i < vert->labels.size(); i += 3) {
    labels.emplace(vert->labels[i], oracle::random_mask({5, 5, 6}, 0.05, rng));
  }
  labels.emplace("sternum", oracle::random_mask({5, 5, 6}, 0.05, rng));
  const auto out = aggregate_labels(labels, t.rules);
  CHECK(out.size() == 2);
  REQUIRE(out.count("vertebrae"));
  const Volume& v = out.at("vertebrae");
  for (std::size_t i = 0; i < v.voxel_count(); ++i) {
    bool any = false;
    for (const auto& [name, m] : labels)
      if (name != "sternum") any = any || m.data()[i] > 0.5f;
    CHECK((v.data()[i] > 0.5f) == any);
  }
  CHECK(std::equal(out.at("sternum").data().begin(), out.at("sternum").data().end(),
                   labels.at("sternum").data().begin()));
  CHECK_FALSE(out.count("rib"));

  labels.emplace("skull", Volume({5, 5, 7}, {1, 1, 1}, VolumeKind::BinaryMask));
  CHECK(error_of([&] { aggregate_labels(labels, t.rules); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("eligibility needs more than six axial slices") {
  CHECK(eligible(slab(3, 9)));
  CHECK(eligibility(slab(3, 9)).nonempty_slices == 7);
  CHECK_FALSE(eligible(slab(3, 8)));
  CHECK_FALSE(eligible(Volume({4, 4, 20}, {1, 1, 1}, VolumeKind::BinaryMask)));
  // Gaps count against eligibility even when the extent is long.
  Volume gappy = slab(0, 2);
  gappy.at(1, 1, 15) = gappy.at(1, 1, 19) = gappy.at(1, 1, 10) = 1.0f;
  const Eligibility e = eligibility(gappy);
  CHECK(e.nonempty_slices == 6);
  CHECK(e.extent_slices == 20);
  CHECK_FALSE(e.eligible);
}

TEST_CASE("split sampling") {
  const auto candidates = pool(60, {"rib", "femur", "skull"});
  const SplitSpec spec{"t", 50, 7};
  const Manifest m = build_split(candidates, spec);
  CHECK(m.entries.size() == 150);
  std::map<std::string, std::size_t> per;
  for (const auto& e : m.entries) ++per[e.target_class];
  for (const auto& [c, n] : per) CHECK(n == 50);
  CHECK(std::is_sorted(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.target_class, a.case_id) < std::tie(b.target_class, b.case_id);
  }));

  auto reversed = candidates;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(manifest_to_jsonl(build_split(reversed, spec)) == manifest_to_jsonl(m));
  CHECK(manifest_to_jsonl(build_split(candidates, {"t", 50, 8})) != manifest_to_jsonl(m));

  std::string subject;
  CHECK(error_of([&] { build_split(candidates, spec, {"femur", "hip"}); }, &subject) ==
        ErrorCode::InsufficientCandidates);
  CHECK(subject == "hip");
  CHECK(error_of([&] { build_split(pool(49, {"rib"}), spec); }) == ErrorCode::InsufficientCandidates);
  CHECK(build_split(pool(50, {"rib"}), spec).entries.size() == 50);
}

TEST_CASE("the two standard splits") {
  CHECK(ablation_split().per_class == 50);
  CHECK(final_split().per_class == 250);
  CHECK(ablation_split().seed != final_split().seed);
  const std::vector<std::string> classes{"a", "b"};
  const auto candidates = pool(400, classes);
  CHECK(build_split(candidates, ablation_split()).entries.size() == 100);
  CHECK(build_split(candidates, final_split()).entries.size() == 500);
}

TEST_CASE("uniform_below stays in range and covers it") {
  std::mt19937_64 rng(52);
  std::vector<int> seen(7);
  for (int i = 0; i < 7000; ++i) {
    const auto v = uniform_below(rng, 7);
    REQUIRE(v < 7);
    ++seen[v];
  }
  for (int n : seen) CHECK(n > 800);
  CHECK(uniform_below(rng, 1) == 0);
  CHECK(error_of([&] { uniform_below(rng, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("manifest files") {
  const auto dir = oracle::scratch_dir("manifest");
  Manifest m = build_split(pool(3, {"rib"}), {"s", 2, 9}, {}, "abc");
  write_manifest(m, dir / "m.jsonl");
  const Manifest back = read_manifest(dir / "m.jsonl");
  CHECK(back.split == "s");
  CHECK(back.seed == 9);
  CHECK(back.rule_table_hash == "abc");
  CHECK(back.per_class == 2);
  CHECK(back.entries == m.entries);
  CHECK(manifest_to_jsonl(back) == manifest_to_jsonl(m));

  CHECK(error_of([&] { read_manifest(dir / "none.jsonl"); }) == ErrorCode::ManifestMissing);
  CHECK(error_of([] { parse_manifest(R"({"type":"header","schema_version":9})"); }) == ErrorCode::ConfigInvalid);
  CHECK(error_of([] { parse_manifest("{\"type\":\"entry\"}"); }) == ErrorCode::ConfigInvalid);
  fs::remove_all(dir);
}

TEST_CASE("manifest comparison") {
  Manifest a, b;
  a.entries = {{"s1", "rib", "", ""}, {"s2", "rib", "", ""}, {"s2", "hip", "", ""}};
  b.entries = {{"s2", "hip", "", ""}, {"s3", "rib", "", ""}};
  const Disjointness d = compare_manifests(a, b);
  CHECK(d.shared == 1);
  REQUIRE(d.pairs.size() == 1);
  CHECK(d.pairs[0] == std::pair<std::string, std::string>{"s2", "hip"});
  CHECK(compare_manifests(a, Manifest{}).shared == 0);
}

TEST_CASE("curation of a small dataset") {
  const auto dir = oracle::scratch_dir("curate");
  const fs::path root = dir / "ds";
  const Volume ct({4, 4, 20}, {1, 1, 1}, VolumeKind::Intensity);
  auto write_case = [&](const std::string& id, const std::map<std::string, Volume>& labels) {
    fs::create_directories(root / id / "segmentations");
    save_volume(ct, root / id / "ct.nii.gz");
    for (const auto& [name, m] : labels) save_volume(m, root / id / "segmentations" / (name + ".nii.gz"));
  };
  // s1: femur from two short halves that only qualify together.
  write_case("s1", {{"femur_left", slab(0, 3, 0)}, {"femur_right", slab(4, 7, 2)}, {"sternum", slab(0, 2)}});
  write_case("s2", {{"skull", slab(0, 19)}});
  fs::create_directories(root / "no-ct" / "segmentations");

  CurateOptions opt;
  opt.dataset_root = root;
  opt.out_dir = dir / "out";
  opt.verbose = true;
  const CurateResult r = curate(opt);
  CHECK(r.cases_scanned == 2);
  CHECK(r.ineligible == 1);
  REQUIRE(r.candidates.size() == 2);
  CHECK(r.candidates[0].case_id == "s1");
  CHECK(r.candidates[0].target_class == "femur");
  CHECK(r.candidates[1].target_class == "skull");
  CHECK(r.log.size() == 3);
  const Volume femur = load_mask(opt.out_dir / r.candidates[0].mask);
  CHECK(count_foreground(femur) == 8);
  CHECK(eligibility(femur).nonempty_slices == 8);

  opt.dataset_root = dir / "missing";
  CHECK(error_of([&] { curate(opt); }) == ErrorCode::IoFailure);
  fs::remove_all(dir);
}

TEST_CASE("phantoms") {
  const Phantom s = make_phantom(sphere_phantom_spec());
  CHECK(s.image.dims() == Dims{64, 64, 64});
  const Volume ball = oracle::ball({64, 64, 64}, {32, 32, 32}, 10.0);
  CHECK(std::equal(s.mask.data().begin(), s.mask.data().end(), ball.data().begin()));
  for (std::size_t i = 0; i < s.image.voxel_count(); ++i) {
    CHECK(s.image.data()[i] == (s.mask.data()[i] > 0.5f ? 1000.0f : -1000.0f));
  }

  // The distractor is bright but absent from the mask.
  const PhantomSpec ts = two_sphere_phantom_spec();
  const Phantom t = make_phantom(ts);
  REQUIRE(ts.distractors.size() == 1);
  const auto& c = ts.distractors[0].center;
  const auto at = [&](const Volume& v) {
    return v.at(std::size_t(c[0]), std::size_t(c[1]), std::size_t(c[2]));
  };
  CHECK(at(t.image) == 1000.0f);
  CHECK(at(t.mask) == 0.0f);

  const auto dir = oracle::scratch_dir("suite");
  const Manifest m = write_phantom_suite(dir, 4);
  CHECK(m.entries.size() == 4);
  CHECK(read_manifest(dir / "manifest.jsonl").entries == m.entries);
  for (const auto& e : m.entries) {
    CHECK(eligible(load_mask(dir / e.mask)));
    CHECK(load_volume(dir / e.volume).dims() == Dims{64, 64, 64});
  }
  fs::remove_all(dir);
}
