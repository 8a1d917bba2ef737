#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "engine/propagate.hpp"
#include "engine/synthetic_backend.hpp"
#include "membank/membank.hpp"
#include "preproc/preproc.hpp"
#include "prompts/prompts.hpp"

namespace volprop {

inline constexpr int kConfigSchemaVersion = 1;

struct CropSpec {
  bool enabled = true;
  std::size_t margin = 8;  // voxels around the ground-truth bounding box
};

struct BackendSpec {
  std::string kind = "synthetic";  // synthetic | onnx
  std::string scale = "small";     // passed through; selects exported graphs
  SyntheticBackendParams synthetic;
  std::string model_dir;           // onnx only
};

struct RunConfig {
  std::string name = "baseline";
  PropagationMode propagation = PropagationMode::Forward;
  Axis axis = Axis::Axial;
  PromptStrategy prompt = PromptStrategy::fml();
  MemoryPolicy memory;
  PreprocessSpec preprocess;
  CropSpec crop;
  BackendSpec backend;
  bool hd95 = false;
  std::uint64_t seed = 0;
};

/// Names accepted by "preset": baseline, np, sps, is, is+sps, three-axis-9.
std::vector<std::string> preset_names();
RunConfig preset(std::string_view name);

/// Strict parse: unknown keys and out-of-range values throw ConfigInvalid
/// whose subject is the dotted key (e.g. "memory.tau").
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_text(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Every field, fully resolved. Keys are sorted on dump.
nlohmann::json config_to_json(const RunConfig& config);

/// Hash of the canonical JSON without "name": two configs that behave the
/// same share an id whatever they are called.
std::string config_id(const RunConfig& config);

/// Apply "--backend synthetic" or "--backend onnx:<dir>".
void apply_backend_flag(RunConfig& config, std::string_view flag);

/// Set one dotted key ("memory.tau", "prompt", ...) from a JSON value.
/// Type errors throw here; call validate_config once all keys are set.
void set_config_value(RunConfig& config, std::string_view key, const nlohmann::json& value);

/// Range checks; throws ConfigInvalid naming the offending key.
void validate_config(const RunConfig& config);

}  // namespace volprop
