#include "engine/onnx_backend.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"

#ifdef VOLPROP_HAVE_ONNXRUNTIME
#include <onnxruntime_cxx_api.h>
#endif

namespace volprop {

Slice resize_bilinear(const Slice& s, std::size_t width, std::size_t height) {
  if (s.width == 0 || s.height == 0 || width == 0 || height == 0) {
    fail(ErrorCode::InvalidArgument, "cannot resize an empty slice");
  }
  if (s.width == width && s.height == height) return s;
  Slice out(width, height);
  const double sx = static_cast<double>(s.width) / static_cast<double>(width);
  const double sy = static_cast<double>(s.height) / static_cast<double>(height);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(s.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, s.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(s.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, s.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1 - wx) * s.at(x0, y0) + wx * s.at(x1, y0);
      const double bottom = (1 - wx) * s.at(x0, y1) + wx * s.at(x1, y1);
      out.at(x, y) = static_cast<float>((1 - wy) * top + wy * bottom);
    }
  }
  return out;
}

bool onnx_runtime_available() noexcept {
#ifdef VOLPROP_HAVE_ONNXRUNTIME
  return true;
#else
  return false;
#endif
}

namespace {

int metadata_int(const OnnxModelInfo& model, const std::string& key, int fallback) {
  const auto it = model.metadata.find(key);
  if (it == model.metadata.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    fail(ErrorCode::SignatureMismatch, "metadata '" + key + "' is not an integer: " + it->second, key);
  }
}

}  // namespace

OnnxGraphSet inspect_onnx_graphs(const std::filesystem::path& dir, const SignatureManifest& manifest) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    fail(ErrorCode::MissingGraph, "model directory " + dir.string() + " does not exist", dir.string());
  }
  OnnxGraphSet set;
  set.dir = dir;
  auto load = [&](std::string_view role, OnnxModelInfo& into) {
    const GraphSpec& spec = manifest.graph(role);
    const auto path = dir / spec.file;
    if (!std::filesystem::is_regular_file(path, ec)) {
      fail(ErrorCode::MissingGraph, "missing graph " + path.string(), spec.file);
    }
    into = read_onnx_model(path);
    check_signature(into, spec);
  };
  load("image_encoder", set.image_encoder);
  load("memory_decoder", set.memory_decoder);
  load("memory_encoder", set.memory_encoder);

  set.slot_count = metadata_int(set.memory_decoder, manifest.slot_count_key, 7);
  int resolution = metadata_int(set.image_encoder, manifest.input_resolution_key, 0);
  if (resolution == 0) {
    const auto* image = set.image_encoder.find_input(manifest.graph("image_encoder").inputs.at(0).name);
    if (image && image->shape && image->shape->size() == 4 && (*image->shape)[3].value) {
      resolution = static_cast<int>(*(*image->shape)[3].value);
    }
  }
  if (resolution <= 0 || resolution % 16 != 0) {
    fail(ErrorCode::SignatureMismatch, "input resolution must be a positive multiple of 16",
         manifest.input_resolution_key);
  }
  if (set.slot_count < 1) fail(ErrorCode::SignatureMismatch, "slot count must be >= 1", manifest.slot_count_key);
  set.input_resolution = resolution;
  return set;
}

#ifdef VOLPROP_HAVE_ONNXRUNTIME

namespace {

struct OrtEmbedding final : BackendFeature {
  std::size_t width = 0, height = 0;  // native slice size
  std::vector<float> values;          // [1, 256, R/16, R/16]
};

struct OrtMaskFeatures final : BackendFeature {
  std::vector<float> values;  // [1, C, R/16, R/16]
};

struct OrtAttended final : BackendFeature {
  std::vector<float> features;  // [K, C, R/16, R/16]
  std::vector<std::int64_t> slots;
};

class OnnxBackend final : public SegmentationBackend {
 public:
  explicit OnnxBackend(OnnxGraphSet graphs)
      : graphs_(std::move(graphs)),
        env_(ORT_LOGGING_LEVEL_WARNING, "volprop"),
        encoder_(open(graphs_.dir / manifest().graph("image_encoder").file)),
        decoder_(open(graphs_.dir / manifest().graph("memory_decoder").file)),
        mem_encoder_(open(graphs_.dir / manifest().graph("memory_encoder").file)) {}

  std::string name() const override { return "onnx"; }
  int slot_count() const override { return graphs_.slot_count; }
  int input_resolution() const override { return graphs_.input_resolution; }
  std::string cache_tag() const override { return "onnx:" + std::filesystem::absolute(graphs_.dir).string(); }

  FeatureHandle encode_slice(const ThreeChannelSlice& image) const override {
    const auto r = static_cast<std::size_t>(graphs_.input_resolution);
    std::vector<float> input(3 * r * r);
    for (std::size_t c = 0; c < 3; ++c) {
      const Slice resized = resize_bilinear(image.channel(c), r, r);
      std::copy(resized.pixels.begin(), resized.pixels.end(), input.begin() + static_cast<std::ptrdiff_t>(c * r * r));
    }
    const std::array<std::int64_t, 4> shape{1, 3, static_cast<std::int64_t>(r), static_cast<std::int64_t>(r)};
    const auto& spec = manifest().graph("image_encoder");
    auto outputs = run(encoder_, {spec.inputs[0].name}, {tensor(input, shape)}, {spec.outputs[0].name});
    auto e = std::make_shared<OrtEmbedding>();
    e->width = image.width;
    e->height = image.height;
    e->values = copy_out(outputs[0]);
    return e;
  }

  FeatureHandle attend(const FeatureHandle& embedding, std::span<const MemoryEntry> context) const override {
    (void)embedding;
    // Attention itself runs inside the decoder graph; this stage stacks memory.
    auto a = std::make_shared<OrtAttended>();
    for (const auto& entry : context) {
      const auto* mf = dynamic_cast<const OrtMaskFeatures*>(entry.mask_features.get());
      if (!mf) fail(ErrorCode::BackendFailure, "memory entry was not produced by the onnx backend");
      a->features.insert(a->features.end(), mf->values.begin(), mf->values.end());
      a->slots.push_back(entry.embedding_slot);
    }
    return a;
  }

  DecodeOutput decode(const FeatureHandle& embedding, const FeatureHandle& attended,
                      const Slice* prompt) const override {
    const auto& e = as_embedding(embedding);
    DecodeOutput out{Slice(e.width, e.height, -kLogit), 0.0};
    if (prompt) {
      for (std::size_t i = 0; i < prompt->size(); ++i) out.logits.pixels[i] = prompt->pixels[i] > 0.5f ? kLogit : -kLogit;
      out.confidence = 1.0;
      return out;
    }
    const auto* a = dynamic_cast<const OrtAttended*>(attended.get());
    if (!a || a->slots.empty()) return out;

    const auto r = static_cast<std::int64_t>(graphs_.input_resolution);
    const std::int64_t k = static_cast<std::int64_t>(a->slots.size());
    const std::int64_t per = static_cast<std::int64_t>(a->features.size()) / k;
    const std::int64_t g = r / 16;
    const auto& spec = manifest().graph("memory_decoder");
    std::vector<std::string> names{spec.inputs[0].name, spec.inputs[1].name, spec.inputs[2].name};
    std::vector<Ort::Value> inputs;
    auto emb = e.values;
    auto feats = a->features;
    auto slots = a->slots;
    inputs.push_back(tensor(emb, std::array<std::int64_t, 4>{1, 256, g, g}));
    inputs.push_back(tensor(feats, std::array<std::int64_t, 4>{k, per / (g * g), g, g}));
    inputs.push_back(tensor(slots, std::array<std::int64_t, 1>{k}));
    std::vector<float> no_prompt;
    if (graphs_.memory_decoder.find_input(spec.inputs[3].name)) {
      no_prompt.assign(static_cast<std::size_t>(r * r), 0.0f);
      names.push_back(spec.inputs[3].name);
      inputs.push_back(tensor(no_prompt, std::array<std::int64_t, 4>{1, 1, r, r}));
    }
    auto outputs = run(decoder_, names, std::move(inputs), {spec.outputs[0].name, spec.outputs[1].name});
    Slice logits(static_cast<std::size_t>(r), static_cast<std::size_t>(r));
    logits.pixels = copy_out(outputs[0]);
    out.logits = resize_bilinear(logits, e.width, e.height);
    out.confidence = std::clamp(static_cast<double>(copy_out(outputs[1]).at(0)), 0.0, 1.0);
    return out;
  }

  FeatureHandle encode_memory(const FeatureHandle& embedding, const Slice& logits) const override {
    const auto& e = as_embedding(embedding);
    const auto r = static_cast<std::size_t>(graphs_.input_resolution);
    const std::int64_t g = static_cast<std::int64_t>(r / 16);
    auto resized = resize_bilinear(logits, r, r).pixels;
    auto emb = e.values;
    const auto& spec = manifest().graph("memory_encoder");
    std::vector<Ort::Value> inputs;
    inputs.push_back(tensor(emb, std::array<std::int64_t, 4>{1, 256, g, g}));
    inputs.push_back(tensor(resized, std::array<std::int64_t, 4>{1, 1, static_cast<std::int64_t>(r),
                                                                  static_cast<std::int64_t>(r)}));
    auto outputs = run(mem_encoder_, {spec.inputs[0].name, spec.inputs[1].name}, std::move(inputs),
                       {spec.outputs[0].name});
    auto mf = std::make_shared<OrtMaskFeatures>();
    mf->values = copy_out(outputs[0]);
    return mf;
  }

 private:
  static constexpr float kLogit = 8.0f;

  static const SignatureManifest& manifest() { return builtin_signature_manifest(); }

  static const OrtEmbedding& as_embedding(const FeatureHandle& h) {
    const auto* e = dynamic_cast<const OrtEmbedding*>(h.get());
    if (!e) fail(ErrorCode::BackendFailure, "embedding was not produced by the onnx backend");
    return *e;
  }

  Ort::Session open(const std::filesystem::path& path) {
    Ort::SessionOptions options;
    options.SetIntraOpNumThreads(1);
    return Ort::Session(env_, path.c_str(), options);
  }

  template <typename T, std::size_t N>
  static Ort::Value tensor(std::vector<T>& data, const std::array<std::int64_t, N>& shape) {
    static const auto info = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    return Ort::Value::CreateTensor<T>(info, data.data(), data.size(), shape.data(), N);
  }

  static std::vector<float> copy_out(const Ort::Value& v) {
    const auto count = v.GetTensorTypeAndShapeInfo().GetElementCount();
    const float* p = v.GetTensorData<float>();
    return {p, p + count};
  }

  static std::vector<Ort::Value> run(const Ort::Session& session, const std::vector<std::string>& in_names,
                                     std::vector<Ort::Value> inputs, const std::vector<std::string>& out_names) {
    std::vector<const char*> in_ptrs, out_ptrs;
    for (const auto& n : in_names) in_ptrs.push_back(n.c_str());
    for (const auto& n : out_names) out_ptrs.push_back(n.c_str());
    try {
      return const_cast<Ort::Session&>(session).Run(Ort::RunOptions{nullptr}, in_ptrs.data(), inputs.data(),
                                                   inputs.size(), out_ptrs.data(), out_ptrs.size());
    } catch (const Ort::Exception& e) {
      fail(ErrorCode::BackendFailure, std::string("onnxruntime: ") + e.what());
    }
  }

  OnnxGraphSet graphs_;
  Ort::Env env_;
  Ort::Session encoder_;
  Ort::Session decoder_;
  Ort::Session mem_encoder_;
};

}  // namespace

std::unique_ptr<SegmentationBackend> onnx_backend(const std::filesystem::path& model_dir) {
  OnnxGraphSet graphs = inspect_onnx_graphs(model_dir);
  try {
    return std::make_unique<OnnxBackend>(std::move(graphs));
  } catch (const Ort::Exception& e) {
    fail(ErrorCode::BackendFailure, std::string("onnxruntime: ") + e.what());
  }
}

#else

std::unique_ptr<SegmentationBackend> onnx_backend(const std::filesystem::path& model_dir) {
  (void)inspect_onnx_graphs(model_dir);
  fail(ErrorCode::RuntimeUnavailable,
       "graphs in " + model_dir.string() +
           " look valid, but this build has no onnxruntime; reconfigure with -DVOLPROP_ONNXRUNTIME_ROOT=<dir>");
}

#endif

}  // namespace volprop
