#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace volprop {

// Just enough of the ONNX protobuf schema to check a graph's interface
// before a runtime is involved: graph inputs/outputs with element type and
// shape, plus model metadata_props.

enum class OnnxElementType : int { Undefined = 0, Float = 1, Int64 = 7 };

struct OnnxDim {
  std::optional<std::int64_t> value;  // dim_value
  std::string param;                  // dim_param; empty when unnamed
};

struct OnnxTensorInfo {
  std::string name;
  int elem_type = 0;
  std::optional<std::vector<OnnxDim>> shape;  // absent when the graph leaves it unknown
};

struct OnnxModelInfo {
  std::vector<OnnxTensorInfo> inputs;
  std::vector<OnnxTensorInfo> outputs;
  std::map<std::string, std::string> metadata;

  const OnnxTensorInfo* find_input(std::string_view name) const noexcept;
  const OnnxTensorInfo* find_output(std::string_view name) const noexcept;
};

/// Throws MalformedHeader when the bytes are not a readable ModelProto.
OnnxModelInfo parse_onnx_model(std::string_view bytes);
OnnxModelInfo read_onnx_model(const std::filesystem::path& path);

/// Writes a minimal ModelProto carrying only the given interface. Used to
/// build fixtures; the result has no nodes and cannot be executed.
std::string encode_onnx_interface(const OnnxModelInfo& info);

// Expected interface of one exported graph. Symbolic dims ("R", "R/16",
// "K") match any size, including a dynamic dim; numbers must match exactly.
struct TensorSpec {
  std::string name;
  std::string dtype;  // "float32" | "int64"
  std::vector<std::string> shape;
  bool optional = false;
};

struct GraphSpec {
  std::string role;  // image_encoder | memory_decoder | memory_encoder
  std::string file;
  std::vector<TensorSpec> inputs;
  std::vector<TensorSpec> outputs;
};

struct SignatureManifest {
  int schema_version = 1;
  std::vector<GraphSpec> graphs;
  std::string slot_count_key;
  std::string input_resolution_key;

  const GraphSpec& graph(std::string_view role) const;
};

SignatureManifest parse_signature_manifest(std::string_view json_text);
/// The manifest compiled into the library.
const SignatureManifest& builtin_signature_manifest();

/// Throws SignatureMismatch naming the first offending tensor.
void check_signature(const OnnxModelInfo& model, const GraphSpec& spec);

}  // namespace volprop
