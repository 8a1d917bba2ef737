#pragma once

#include <filesystem>
#include <memory>

#include "engine/backend.hpp"
#include "engine/onnx_model.hpp"

namespace volprop {

/// Bilinear resampling with pixel-centre alignment (edge pixels clamp).
Slice resize_bilinear(const Slice& slice, std::size_t width, std::size_t height);

/// True when the library was built against onnxruntime.
bool onnx_runtime_available() noexcept;

struct OnnxGraphSet {
  std::filesystem::path dir;
  OnnxModelInfo image_encoder;
  OnnxModelInfo memory_decoder;
  OnnxModelInfo memory_encoder;
  int slot_count = 7;
  int input_resolution = 1024;
};

/// Checks that `model_dir` holds the three graphs with the expected
/// interfaces. Throws MissingGraph or SignatureMismatch.
OnnxGraphSet inspect_onnx_graphs(const std::filesystem::path& model_dir,
                                 const SignatureManifest& manifest = builtin_signature_manifest());

/// Validates the graphs, then binds them to onnxruntime. Throws
/// RuntimeUnavailable when the library was built without it.
std::unique_ptr<SegmentationBackend> onnx_backend(const std::filesystem::path& model_dir);

}  // namespace volprop
