#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "volgrid/volume.hpp"

namespace volprop {

enum class AggregationKind { Identity, BilateralUnion, SerialUnion, SerialBilateral };

std::string_view to_string(AggregationKind kind) noexcept;

struct AggregationRule {
  std::string target_class;
  AggregationKind kind = AggregationKind::Identity;
  std::vector<std::string> labels;
};

struct RuleTable {
  std::vector<AggregationRule> rules;
  std::string hash;  // fingerprint of the canonical table

  std::vector<std::string> classes() const;
};

/// Throws ConfigInvalid on unknown kinds or a label claimed by two rules.
RuleTable parse_rules(std::string_view json_text);
RuleTable load_rules(const std::filesystem::path& path);
/// The bone table compiled into the library.
const RuleTable& builtin_bone_rules();

/// Voxelwise OR per rule; classes with no constituent present are omitted.
/// Throws DimensionMismatch when masks disagree in shape.
std::map<std::string, Volume> aggregate_labels(const std::map<std::string, Volume>& labels,
                                               const std::vector<AggregationRule>& rules);

struct Eligibility {
  std::size_t nonempty_slices = 0;  // axial slices holding foreground
  std::size_t extent_slices = 0;    // last - first + 1, 0 when empty
  bool eligible = false;
};

inline constexpr std::size_t kMinAxialSlices = 6;

/// Eligible iff more than six axial slices hold foreground.
Eligibility eligibility(const Volume& mask);
bool eligible(const Volume& mask);

struct ManifestEntry {
  std::string case_id;
  std::string target_class;
  std::string mask;    // path, relative to the manifest's directory unless absolute
  std::string volume;

  auto operator<=>(const ManifestEntry&) const = default;
};

struct Manifest {
  std::string split;
  std::uint64_t seed = 0;
  std::string rule_table_hash;
  std::size_t per_class = 0;
  std::vector<ManifestEntry> entries;
};

inline constexpr int kManifestSchemaVersion = 1;

struct SplitSpec {
  std::string name;
  std::size_t per_class = 0;
  std::uint64_t seed = 0;
};

/// The two evaluation splits: 50 and 250 entries per class, independent seeds.
SplitSpec ablation_split();
SplitSpec final_split();

/// Seeded sample of exactly per_class candidates per class, sorted by
/// (class, case_id). `classes` lists the classes that must be filled; when
/// empty, every class present in `candidates` is used. Throws
/// InsufficientCandidates naming the first short class.
Manifest build_split(std::vector<ManifestEntry> candidates, const SplitSpec& split,
                     const std::vector<std::string>& classes = {}, const std::string& rule_table_hash = {});

/// Uniform integer in [0, bound) by rejection. Unlike the standard
/// distributions this gives the same stream on every standard library.
std::uint64_t uniform_below(std::mt19937_64& engine, std::uint64_t bound);

std::string manifest_to_jsonl(const Manifest& manifest);
Manifest parse_manifest(std::string_view jsonl);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
/// Throws ManifestMissing when the file does not exist.
Manifest read_manifest(const std::filesystem::path& path);

struct Disjointness {
  std::size_t shared = 0;
  std::vector<std::pair<std::string, std::string>> pairs;  // (case_id, class)
};

/// (case_id, class) pairs present in both manifests.
Disjointness compare_manifests(const Manifest& a, const Manifest& b);

struct CurateOptions {
  std::filesystem::path dataset_root;  // <root>/<case>/ct.nii.gz, <root>/<case>/segmentations/<label>.nii.gz
  std::filesystem::path out_dir;       // aggregated masks are written to <out_dir>/masks/
  bool verbose = false;
};

struct CurateResult {
  std::vector<ManifestEntry> candidates;  // eligible only
  std::size_t cases_scanned = 0;
  std::size_t ineligible = 0;
  std::vector<std::string> log;  // per-mask eligibility lines when verbose
};

/// Aggregates every case under dataset_root and keeps eligible class masks.
CurateResult curate(const CurateOptions& options, const RuleTable& rules = builtin_bone_rules());

}  // namespace volprop
