#include "dataharness/dataharness.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "volgrid/nifti.hpp"
#include "bone_rules_data.inc"

namespace volprop {

using nlohmann::json;

std::string_view to_string(AggregationKind kind) noexcept {
  switch (kind) {
    case AggregationKind::Identity: return "identity";
    case AggregationKind::BilateralUnion: return "bilateral_union";
    case AggregationKind::SerialUnion: return "serial_union";
    case AggregationKind::SerialBilateral: return "serial_bilateral";
  }
  return "?";
}

namespace {

AggregationKind parse_kind(const std::string& s) {
  for (auto k : {AggregationKind::Identity, AggregationKind::BilateralUnion, AggregationKind::SerialUnion,
                 AggregationKind::SerialBilateral}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::ConfigInvalid, "unknown aggregation kind '" + s + "'", "kind");
}

std::string read_text(const std::filesystem::path& path, ErrorCode missing) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(missing, "cannot read " + path.string(), path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::string> RuleTable::classes() const {
  std::vector<std::string> out;
  for (const auto& r : rules) out.push_back(r.target_class);
  return out;
}

RuleTable parse_rules(std::string_view json_text) {
  RuleTable table;
  json canonical = json::array();
  try {
    const json j = json::parse(json_text);
    for (const auto& r : j.at("rules")) {
      AggregationRule rule;
      rule.target_class = r.at("target_class").get<std::string>();
      rule.kind = parse_kind(r.at("kind").get<std::string>());
      rule.labels = r.at("labels").get<std::vector<std::string>>();
      if (rule.labels.empty()) fail(ErrorCode::ConfigInvalid, "rule has no labels", rule.target_class);
      canonical.push_back({{"target_class", rule.target_class},
                           {"kind", std::string(to_string(rule.kind))},
                           {"labels", rule.labels}});
      table.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("bad rule table: ") + e.what());
  }
  std::set<std::string> seen_labels, seen_classes;
  for (const auto& r : table.rules) {
    if (!seen_classes.insert(r.target_class).second) {
      fail(ErrorCode::ConfigInvalid, "class '" + r.target_class + "' has two rules", r.target_class);
    }
    for (const auto& l : r.labels) {
      if (!seen_labels.insert(l).second) fail(ErrorCode::ConfigInvalid, "label '" + l + "' is claimed twice", l);
    }
  }
  table.hash = fnv1a_hex(canonical.dump());
  return table;
}

RuleTable load_rules(const std::filesystem::path& path) { return parse_rules(read_text(path, ErrorCode::IoFailure)); }

const RuleTable& builtin_bone_rules() {
  static const RuleTable table = parse_rules(kBoneRulesJson);
  return table;
}

std::map<std::string, Volume> aggregate_labels(const std::map<std::string, Volume>& labels,
                                               const std::vector<AggregationRule>& rules) {
  std::map<std::string, Volume> out;
  const Volume* first = labels.empty() ? nullptr : &labels.begin()->second;
  for (const auto& [name, mask] : labels) {
    if (mask.dims() != first->dims()) {
      fail(ErrorCode::DimensionMismatch, "label '" + name + "' has a different shape", name);
    }
  }
  for (const auto& rule : rules) {
    std::optional<Volume> acc;
    for (const auto& label : rule.labels) {
      const auto it = labels.find(label);
      if (it == labels.end()) continue;
      if (!acc) {
        acc = Volume(it->second.dims(), it->second.spacing(), VolumeKind::BinaryMask);
        acc->set_orientation(it->second.orientation(), it->second.affine());
      }
      auto dst = acc->data();
      const auto src = it->second.data();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        if (src[i] > 0.5f) dst[i] = 1.0f;
      }
    }
    if (acc) out.emplace(rule.target_class, std::move(*acc));
  }
  return out;
}

Eligibility eligibility(const Volume& mask) {
  Eligibility e;
  const auto& d = mask.dims();
  const std::size_t plane = d[0] * d[1];
  const auto data = mask.data();
  std::size_t first = d[2], last = 0;
  for (std::size_t z = 0; z < d[2]; ++z) {
    const auto begin = data.begin() + static_cast<std::ptrdiff_t>(z * plane);
    if (std::any_of(begin, begin + static_cast<std::ptrdiff_t>(plane), [](float v) { return v > 0.5f; })) {
      ++e.nonempty_slices;
      first = std::min(first, z);
      last = z;
    }
  }
  e.extent_slices = e.nonempty_slices ? last - first + 1 : 0;
  e.eligible = e.nonempty_slices > kMinAxialSlices;
  return e;
}

bool eligible(const Volume& mask) { return eligibility(mask).eligible; }

SplitSpec ablation_split() { return {"ablation500", 50, 20240501}; }
SplitSpec final_split() { return {"final2500", 250, 20240502}; }

std::uint64_t uniform_below(std::mt19937_64& engine, std::uint64_t bound) {
  if (bound == 0) fail(ErrorCode::InvalidArgument, "empty range");
  // Largest multiple of bound that fits; values at or above it are redrawn.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t x = engine();
    if (x < limit) return x % bound;
  }
}

Manifest build_split(std::vector<ManifestEntry> candidates, const SplitSpec& split,
                     const std::vector<std::string>& classes, const std::string& rule_table_hash) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::map<std::string, std::vector<ManifestEntry>> by_class;
  for (auto& c : candidates) by_class[c.target_class].push_back(std::move(c));
  std::vector<std::string> wanted = classes;
  if (wanted.empty()) {
    for (const auto& [name, _] : by_class) wanted.push_back(name);
  }
  std::sort(wanted.begin(), wanted.end());

  Manifest m;
  m.split = split.name;
  m.seed = split.seed;
  m.per_class = split.per_class;
  m.rule_table_hash = rule_table_hash;
  for (const auto& cls : wanted) {
    auto& pool = by_class[cls];
    if (pool.size() < split.per_class) {
      fail(ErrorCode::InsufficientCandidates,
           "class '" + cls + "' has " + std::to_string(pool.size()) + " eligible candidates, " +
               std::to_string(split.per_class) + " needed",
           cls);
    }
    Fnv1a h;
    h.update(std::to_string(split.seed));
    h.update("/");
    h.update(cls);
    std::mt19937_64 engine(h.digest());
    // Partial Fisher-Yates: the first per_class slots become the sample.
    for (std::size_t i = 0; i < split.per_class; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_below(engine, pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    std::vector<ManifestEntry> picked(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(split.per_class));
    std::sort(picked.begin(), picked.end());
    m.entries.insert(m.entries.end(), picked.begin(), picked.end());
  }
  return m;
}

std::string manifest_to_jsonl(const Manifest& m) {
  std::string out;
  const json header{{"type", "header"},
                    {"schema_version", kManifestSchemaVersion},
                    {"split", m.split},
                    {"seed", m.seed},
                    {"rule_table_hash", m.rule_table_hash},
                    {"per_class", m.per_class},
                    {"total", m.entries.size()}};
  out += header.dump() + "\n";
  for (const auto& e : m.entries) {
    const json line{{"type", "entry"},
                    {"case_id", e.case_id},
                    {"target_class", e.target_class},
                    {"mask", e.mask},
                    {"volume", e.volume}};
    out += line.dump() + "\n";
  }
  return out;
}

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = json::parse(line);
      const auto type = j.value("type", std::string("entry"));
      if (type == "header") {
        if (j.value("schema_version", 0) != kManifestSchemaVersion) {
          fail(ErrorCode::ConfigInvalid, "unsupported manifest schema_version", "schema_version");
        }
        m.split = j.value("split", std::string());
        m.seed = j.value("seed", std::uint64_t{0});
        m.rule_table_hash = j.value("rule_table_hash", std::string());
        m.per_class = j.value("per_class", std::size_t{0});
        header = true;
      } else if (type == "entry") {
        m.entries.push_back({j.at("case_id").get<std::string>(), j.at("target_class").get<std::string>(),
                             j.at("mask").get<std::string>(), j.at("volume").get<std::string>()});
      } else {
        fail(ErrorCode::ConfigInvalid, "unknown manifest record type '" + type + "'", "type");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, "manifest line " + std::to_string(line_no) + ": " + e.what());
  }
  (void)header;  // header-less manifests are accepted for hand-written lists
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << manifest_to_jsonl(manifest);
  if (!out) fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(ErrorCode::ManifestMissing, "manifest " + path.string() + " does not exist", path.string());
  }
  return parse_manifest(read_text(path, ErrorCode::ManifestMissing));
}

Disjointness compare_manifests(const Manifest& a, const Manifest& b) {
  std::set<std::pair<std::string, std::string>> left;
  for (const auto& e : a.entries) left.emplace(e.case_id, e.target_class);
  Disjointness d;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : b.entries) {
    std::pair key{e.case_id, e.target_class};
    if (left.contains(key) && seen.insert(key).second) d.pairs.push_back(key);
  }
  std::sort(d.pairs.begin(), d.pairs.end());
  d.shared = d.pairs.size();
  return d;
}

CurateResult curate(const CurateOptions& options, const RuleTable& rules) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(options.dataset_root, ec)) {
    fail(ErrorCode::IoFailure, "dataset root " + options.dataset_root.string() + " is not a directory");
  }
  std::vector<fs::path> cases;
  for (const auto& entry : fs::directory_iterator(options.dataset_root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "segmentations")) cases.push_back(entry.path());
  }
  std::sort(cases.begin(), cases.end());

  CurateResult result;
  const fs::path mask_dir = options.out_dir / "masks";
  fs::create_directories(mask_dir);
  for (const auto& case_dir : cases) {
    const std::string case_id = case_dir.filename().string();
    fs::path ct = case_dir / "ct.nii.gz";
    if (!fs::exists(ct)) ct = case_dir / "ct.nii";
    if (!fs::exists(ct)) continue;
    ++result.cases_scanned;

    std::map<std::string, Volume> labels;
    for (const auto& rule : rules.rules) {
      for (const auto& label : rule.labels) {
        for (const char* ext : {".nii.gz", ".nii"}) {
          const fs::path p = case_dir / "segmentations" / (label + ext);
          if (fs::exists(p)) {
            labels.emplace(label, load_mask(p));
            break;
          }
        }
      }
    }
    for (auto& [cls, mask] : aggregate_labels(labels, rules.rules)) {
      const Eligibility e = eligibility(mask);
      if (options.verbose) {
        result.log.push_back(case_id + " " + cls + " nonempty_slices=" + std::to_string(e.nonempty_slices) +
                             " extent_slices=" + std::to_string(e.extent_slices) +
                             (e.eligible ? " eligible" : " ineligible"));
      }
      if (!e.eligible) {
        ++result.ineligible;
        continue;
      }
      const fs::path out = mask_dir / (case_id + "_" + cls + ".nii.gz");
      save_volume(mask, out);
      result.candidates.push_back({case_id, cls, fs::relative(out, options.out_dir).generic_string(),
                                   fs::absolute(ct).generic_string()});
    }
  }
  return result;
}

}  // namespace volprop
