#include "app/config.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace volprop {

using nlohmann::json;

std::vector<std::string> preset_names() { return {"baseline", "np", "sps", "is", "is+sps", "three-axis-9"}; }

RunConfig preset(std::string_view name) {
  RunConfig c;
  c.name = std::string(name);
  if (name == "baseline") return c;
  if (name == "np") {
    c.preprocess.window_enabled = false;
  } else if (name == "sps") {
    c.memory.tau = 0.3;
  } else if (name == "is") {
    c.memory.intelligent_slicing = true;
  } else if (name == "is+sps") {
    c.memory.tau = 0.3;
    c.memory.intelligent_slicing = true;
  } else if (name == "three-axis-9") {
    c.propagation = PropagationMode::ThreeAxis;
  } else {
    fail(ErrorCode::ConfigInvalid, "unknown preset '" + std::string(name) + "'", "preset");
  }
  return c;
}

namespace {

[[noreturn]] void invalid(std::string_view key, const std::string& why) {
  fail(ErrorCode::ConfigInvalid, std::string(key) + ": " + why, std::string(key));
}

template <typename T>
T get(std::string_view key, const json& v) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) invalid(key, "expected true or false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) invalid(key, "expected a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) invalid(key, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          invalid(key, "must be >= 0");
        }
      }
    } else {
      if (!v.is_number()) invalid(key, "expected a number");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    invalid(key, e.what());
  }
}

}  // namespace

void validate_config(const RunConfig& c) {
  c.memory.validate();
  if (!(c.preprocess.window.width > 0.0) || !std::isfinite(c.preprocess.window.width)) {
    invalid("window.width", "must be > 0");
  }
  if (!std::isfinite(c.preprocess.window.level)) invalid("window.level", "must be finite");
  if (!(c.preprocess.clahe.clip_limit > 0.0)) invalid("clahe.clip", "must be > 0");
  if (c.preprocess.clahe.tiles[0] < 1 || c.preprocess.clahe.tiles[1] < 1) invalid("clahe.tiles", "must be >= 1");
  if (!(c.backend.synthetic.intensity_tolerance >= 0.0)) invalid("backend.tolerance", "must be >= 0");
  if (c.backend.synthetic.dilation_radius < 0) invalid("backend.dilation", "must be >= 0");
  if (c.backend.kind != "synthetic" && c.backend.kind != "onnx") invalid("backend.kind", "expected synthetic or onnx");
  if (c.backend.kind == "onnx" && c.backend.model_dir.empty()) invalid("backend.model_dir", "required for onnx");
}

namespace {

void walk(RunConfig& c, const std::string& prefix, const json& obj) {
  for (const auto& [k, v] : obj.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object() && prefix.empty() && k != "schema_version") {
      walk(c, key, v);
    } else {
      set_config_value(c, key, v);
    }
  }
}

}  // namespace

void set_config_value(RunConfig& c, std::string_view key, const json& v) {
  if (key == "schema_version") {
    if (get<int>(key, v) != kConfigSchemaVersion) invalid(key, "unsupported schema version");
  } else if (key == "name") {
    c.name = get<std::string>(key, v);
  } else if (key == "preset") {
    // Only meaningful before other keys; parse_config handles it first.
  } else if (key == "propagation") {
    try {
      c.propagation = parse_propagation_mode(get<std::string>(key, v));
    } catch (const Error& e) {
      invalid(key, e.what());
    }
  } else if (key == "axis") {
    try {
      c.axis = parse_axis(get<std::string>(key, v));
    } catch (const Error& e) {
      invalid(key, e.what());
    }
  } else if (key == "prompt") {
    try {
      c.prompt = PromptStrategy::parse(get<std::string>(key, v));
    } catch (const Error& e) {
      invalid(key, e.what());
    }
  } else if (key == "seed") {
    c.seed = get<std::uint64_t>(key, v);
  } else if (key == "memory.tau") {
    c.memory.tau = get<double>(key, v);
  } else if (key == "memory.capacity") {
    c.memory.capacity = get<int>(key, v);
  } else if (key == "memory.stride") {
    c.memory.stride = get<int>(key, v);
  } else if (key == "memory.gate_k") {
    c.memory.gate_k = get<int>(key, v);
  } else if (key == "memory.intelligent_slicing") {
    c.memory.intelligent_slicing = get<bool>(key, v);
  } else if (key == "window.enabled") {
    c.preprocess.window_enabled = get<bool>(key, v);
  } else if (key == "window.level") {
    c.preprocess.window.level = get<double>(key, v);
  } else if (key == "window.width") {
    c.preprocess.window.width = get<double>(key, v);
  } else if (key == "clahe.enabled") {
    c.preprocess.clahe.enabled = get<bool>(key, v);
  } else if (key == "clahe.clip") {
    c.preprocess.clahe.clip_limit = get<double>(key, v);
  } else if (key == "clahe.tiles") {
    if (!v.is_array() || v.size() != 2) invalid(key, "expected [nx, ny]");
    c.preprocess.clahe.tiles = {get<std::size_t>(key, v[0]), get<std::size_t>(key, v[1])};
  } else if (key == "crop.enabled") {
    c.crop.enabled = get<bool>(key, v);
  } else if (key == "crop.margin") {
    c.crop.margin = get<std::size_t>(key, v);
  } else if (key == "backend.kind") {
    c.backend.kind = get<std::string>(key, v);
  } else if (key == "backend.scale") {
    c.backend.scale = get<std::string>(key, v);
  } else if (key == "backend.tolerance") {
    c.backend.synthetic.intensity_tolerance = get<double>(key, v);
  } else if (key == "backend.dilation") {
    c.backend.synthetic.dilation_radius = get<int>(key, v);
  } else if (key == "backend.model_dir") {
    c.backend.model_dir = get<std::string>(key, v);
  } else if (key == "metrics.hd95") {
    c.hd95 = get<bool>(key, v);
  } else {
    fail(ErrorCode::ConfigInvalid, "unknown config key '" + std::string(key) + "'", std::string(key));
  }
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ConfigInvalid, "config must be a JSON object");
  RunConfig c;
  if (j.contains("preset")) c = preset(get<std::string>("preset", j.at("preset")));
  walk(c, "", j);
  validate_config(c);
  return c;
}

RunConfig parse_config_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read config " + path.string(), path.string());
  return parse_config_text(std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

json config_to_json(const RunConfig& c) {
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"name", c.name},
      {"propagation", std::string(to_string(c.propagation))},
      {"axis", std::string(to_string(c.axis))},
      {"prompt", c.prompt.to_string()},
      {"seed", c.seed},
      {"memory",
       {{"tau", c.memory.tau},
        {"capacity", c.memory.capacity},
        {"stride", c.memory.stride},
        {"gate_k", c.memory.gate_k},
        {"intelligent_slicing", c.memory.intelligent_slicing}}},
      {"window",
       {{"enabled", c.preprocess.window_enabled},
        {"level", c.preprocess.window.level},
        {"width", c.preprocess.window.width}}},
      {"clahe",
       {{"enabled", c.preprocess.clahe.enabled},
        {"clip", c.preprocess.clahe.clip_limit},
        {"tiles", {c.preprocess.clahe.tiles[0], c.preprocess.clahe.tiles[1]}}}},
      {"crop", {{"enabled", c.crop.enabled}, {"margin", c.crop.margin}}},
      {"backend",
       {{"kind", c.backend.kind},
        {"scale", c.backend.scale},
        {"tolerance", c.backend.synthetic.intensity_tolerance},
        {"dilation", c.backend.synthetic.dilation_radius},
        {"model_dir", c.backend.model_dir}}},
      {"metrics", {{"hd95", c.hd95}}},
  };
}

std::string config_id(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("name");
  return fnv1a_hex(j.dump());
}

void apply_backend_flag(RunConfig& config, std::string_view flag) {
  if (flag == "synthetic") {
    config.backend.kind = "synthetic";
    config.backend.model_dir.clear();
    return;
  }
  constexpr std::string_view onnx = "onnx:";
  if (flag.substr(0, onnx.size()) == onnx && flag.size() > onnx.size()) {
    config.backend.kind = "onnx";
    config.backend.model_dir = std::string(flag.substr(onnx.size()));
    return;
  }
  fail(ErrorCode::ConfigInvalid, "--backend expects synthetic or onnx:<dir>, got '" + std::string(flag) + "'",
       "backend");
}

}  // namespace volprop
