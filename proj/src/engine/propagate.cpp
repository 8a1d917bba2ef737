#include "engine/propagate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <system_error>

#include "common/error.hpp"
#include "common/hash.hpp"

namespace volprop {

std::string_view to_string(PropagationMode mode) noexcept {
  switch (mode) {
    case PropagationMode::Forward: return "forward";
    case PropagationMode::ForwardBackward: return "forward-backward";
    case PropagationMode::ThreeAxis: return "three-axis";
  }
  return "?";
}

PropagationMode parse_propagation_mode(std::string_view text) {
  if (text == "forward") return PropagationMode::Forward;
  if (text == "forward-backward") return PropagationMode::ForwardBackward;
  if (text == "three-axis") return PropagationMode::ThreeAxis;
  fail(ErrorCode::ConfigInvalid, "unknown propagation mode '" + std::string(text) + "'", "propagation");
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path EmbeddingCache::entry_path(const SegmentationBackend& backend,
                                                 const ThreeChannelSlice& image) const {
  Fnv1a h;
  h.update(backend.cache_tag());
  const std::uint64_t shape[2] = {image.width, image.height};
  h.update(std::as_bytes(std::span(shape)));
  for (const auto& c : image.channels) h.update(std::as_bytes(std::span(c)));
  return dir_ / (h.hex() + ".emb");
}

FeatureHandle EmbeddingCache::load(const SegmentationBackend& backend, const ThreeChannelSlice& image) const {
  std::ifstream in(entry_path(backend, image), std::ios::binary);
  if (!in) return nullptr;
  return backend.load_embedding(in);
}

void EmbeddingCache::store(const SegmentationBackend& backend, const ThreeChannelSlice& image,
                           const FeatureHandle& embedding) const {
  const auto path = entry_path(backend, image);
  // Write then rename so concurrent workers never read a partial file.
  auto tmp = path;
  tmp += ".tmp" + std::to_string(std::hash<const void*>{}(&embedding));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out || !backend.save_embedding(embedding, out)) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      return;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) std::filesystem::remove(tmp, ec);
}

std::vector<FeatureHandle> encode_sequence(const SliceSequence& seq, const PreprocessSpec& spec,
                                           const SegmentationBackend& backend, Profiler* profiler,
                                           const EmbeddingCache* cache) {
  const auto init_begin = Profiler::now();
  std::vector<FeatureHandle> out(seq.length());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const auto begin = Profiler::now();
    const ThreeChannelSlice image = to_three_channel(preprocess_slice(seq.slice(t), spec));
    FeatureHandle e = cache ? cache->load(backend, image) : nullptr;
    if (!e) {
      e = backend.encode_slice(image);
      if (!e) fail(ErrorCode::BackendFailure, "backend returned no embedding for slice " + std::to_string(t));
      if (cache) cache->store(backend, image, e);
    }
    out[t] = std::move(e);
    if (profiler) profiler->record(Stage::Encode, static_cast<int>(t), begin, Profiler::now());
  }
  if (profiler) profiler->record(Stage::StateInit, -1, init_begin, Profiler::now());
  return out;
}

namespace {

struct Produced {
  Slice logits;
  double confidence = 0.0;
  FeatureHandle features;
};

// Times the three tracking stages with shared boundaries so Tracking is
// exactly their sum.
Produced track(const SegmentationBackend& backend, const FeatureHandle& embedding,
               std::span<const MemoryEntry> context, const Slice* prompt, int t, Profiler* profiler) {
  const auto t0 = Profiler::now();
  const FeatureHandle attended = backend.attend(embedding, context);
  const auto t1 = Profiler::now();
  DecodeOutput decoded = backend.decode(embedding, attended, prompt);
  const auto t2 = Profiler::now();
  FeatureHandle features = backend.encode_memory(embedding, decoded.logits);
  const auto t3 = Profiler::now();
  if (profiler) {
    profiler->record(Stage::MemoryAttention, t, t0, t1);
    profiler->record(Stage::Decode, t, t1, t2);
    profiler->record(Stage::MemoryEncode, t, t2, t3);
    profiler->record(Stage::Tracking, t, t0, t3);
  }
  for (float v : decoded.logits.pixels) {
    if (!std::isfinite(v)) fail(ErrorCode::BackendFailure, "backend produced a non-finite logit at slice " + std::to_string(t));
  }
  return {std::move(decoded.logits), decoded.confidence, std::move(features)};
}

}  // namespace

LogitVolume propagate_axis(const SliceSequence& seq, std::span<const FeatureHandle> embeddings,
                           const PromptSet& prompts, const MemoryPolicy& policy,
                           const SegmentationBackend& backend, Direction direction, Profiler* profiler,
                           PassTrace* trace) {
  if (prompts.entries.empty()) fail(ErrorCode::EmptyPrompts, "propagation needs at least one prompt");
  if (prompts.axis != seq.axis()) {
    fail(ErrorCode::InvalidArgument, "prompts were drawn along " + std::string(to_string(prompts.axis)) +
                                         " but the sequence runs along " + std::string(to_string(seq.axis())));
  }
  if (embeddings.size() != seq.length()) fail(ErrorCode::InvalidArgument, "one embedding per slice is required");

  const int length = static_cast<int>(seq.length());
  const Dims dims{seq.width(), seq.height(), seq.length()};
  for (const auto& p : prompts.entries) {
    if (p.slice_index < 0 || p.slice_index >= length) fail(ErrorCode::InvalidArgument, "prompt slice out of range");
    if (p.mask.width != dims[0] || p.mask.height != dims[1]) {
      fail(ErrorCode::DimensionMismatch, "prompt mask does not match the slice shape");
    }
  }

  MemoryBank bank(length, policy, backend.slot_count(), direction);
  std::map<int, Produced> prompted;
  for (const auto& p : prompts.entries) {
    Produced out = track(backend, embeddings[static_cast<std::size_t>(p.slice_index)], {}, &p.mask, p.slice_index,
                         profiler);
    bank.add_conditioned({p.slice_index, embeddings[static_cast<std::size_t>(p.slice_index)], out.features, true,
                          1.0, 0});
    prompted.emplace(p.slice_index, std::move(out));
  }

  const auto indices = prompts.indices();
  const auto [lo_it, hi_it] = std::minmax_element(indices.begin(), indices.end());
  const bool forward = direction == Direction::Forward;
  const int start = forward ? *lo_it : *hi_it;
  const int stop = forward ? std::max(prompts.extent.last, *hi_it) : std::min(prompts.extent.first, *lo_it);
  const int step = forward ? 1 : -1;

  LogitVolume result = LogitVolume::zeros(seq.axis(), dims);
  for (int t = start;; t += step) {
    if (auto it = prompted.find(t); it != prompted.end()) {
      result.set_slice(static_cast<std::size_t>(t), it->second.logits);
      if (trace) trace->steps.push_back({t, true, {}, {}, 1.0});
    } else {
      const auto context = bank.context_for(t);
      Produced out = track(backend, embeddings[static_cast<std::size_t>(t)], context, nullptr, t, profiler);
      result.set_slice(static_cast<std::size_t>(t), out.logits);
      if (trace) {
        PassTrace::Step s{t, false, {}, {}, out.confidence};
        for (const auto& e : context) {
          s.context_slices.push_back(e.slice_index);
          s.context_slots.push_back(e.embedding_slot);
        }
        trace->steps.push_back(std::move(s));
      }
      bank.admit({t, embeddings[static_cast<std::size_t>(t)], std::move(out.features), false, out.confidence, 0});
    }
    if (t == stop) break;
  }
  return result;
}

LogitVolume merge_bidirectional(const LogitVolume& fwd, const LogitVolume& bwd) {
  if (fwd.reference_frame || bwd.reference_frame || fwd.axis != bwd.axis || fwd.dims != bwd.dims) {
    fail(ErrorCode::DimensionMismatch, "forward and backward passes must share an axis and shape");
  }
  LogitVolume out = LogitVolume::zeros(fwd.axis, fwd.dims);
  const std::size_t plane = fwd.dims[0] * fwd.dims[1];
  for (std::size_t t = 0; t < fwd.dims[2]; ++t) {
    const bool f = fwd.produced[t] != 0, b = bwd.produced[t] != 0;
    if (!f && !b) continue;
    out.produced[t] = 1;
    for (std::size_t i = t * plane; i < (t + 1) * plane; ++i) {
      if (f && b) {
        out.logits[i] = 0.5f * (fwd.logits[i] + bwd.logits[i]);
      } else {
        out.logits[i] = f ? fwd.logits[i] : bwd.logits[i];
      }
    }
  }
  return out;
}

LogitVolume run_forward_backward(const SliceSequence& seq, std::span<const FeatureHandle> embeddings,
                                 const PromptSet& prompts, const MemoryPolicy& policy,
                                 const SegmentationBackend& backend, Profiler* profiler) {
  const LogitVolume fwd = propagate_axis(seq, embeddings, prompts, policy, backend, Direction::Forward, profiler);
  const LogitVolume bwd = propagate_axis(seq, embeddings, prompts, policy, backend, Direction::Backward, profiler);
  return merge_bidirectional(fwd, bwd);
}

double fuse_logits(float a, float b, float c) noexcept {
  std::array<float, 3> v{a, b, c};
  std::sort(v.begin(), v.end());
  const double mean = (static_cast<double>(v[0]) + static_cast<double>(v[1]) + static_cast<double>(v[2])) / 3.0;
  const double p = 1.0 / (1.0 + std::exp(-mean));
  // Keep the probability strictly inside (0, 1) even when exp saturates.
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

FusionResult fuse_three_axis(const LogitVolume& axial, const LogitVolume& coronal, const LogitVolume& sagittal,
                             const Volume& reference) {
  const LogitVolume a = reorient_to_reference(axial, reference);
  const LogitVolume c = reorient_to_reference(coronal, reference);
  const LogitVolume s = reorient_to_reference(sagittal, reference);
  FusionResult out{Volume(reference.dims(), reference.spacing(), VolumeKind::BinaryMask), {}};
  out.mask.set_orientation(reference.orientation(), reference.affine());
  out.probability.resize(a.logits.size());
  float* mask = out.mask.data().data();
  for (std::size_t i = 0; i < a.logits.size(); ++i) {
    out.probability[i] = fuse_logits(a.logits[i], c.logits[i], s.logits[i]);
    mask[i] = out.probability[i] > 0.5 ? 1.0f : 0.0f;
  }
  return out;
}

SegmentResult segment_structure(std::shared_ptr<const Volume> image, const Volume& gt, const SegmentRequest& request,
                                const SegmentationBackend& backend, Profiler* profiler, const EmbeddingCache* cache) {
  if (!image) fail(ErrorCode::InvalidArgument, "no image volume");
  if (!image->same_grid(gt)) fail(ErrorCode::DimensionMismatch, "image and ground truth grids differ");
  request.policy.validate();

  auto run_axis = [&](Axis axis, const PromptSet& prompts) {
    const SliceSequence seq = reslice(image, axis);
    const auto embeddings = encode_sequence(seq, request.preprocess, backend, profiler, cache);
    if (request.mode == PropagationMode::ForwardBackward) {
      return run_forward_backward(seq, embeddings, prompts, request.policy, backend, profiler);
    }
    return propagate_axis(seq, embeddings, prompts, request.policy, backend, Direction::Forward, profiler);
  };

  SegmentResult result{Volume(gt.dims(), gt.spacing(), VolumeKind::BinaryMask), {}, {}};
  if (request.mode == PropagationMode::ThreeAxis) {
    const auto prompt_sets = allocate_three_axis(gt, request.strategy);
    for (Axis axis : kAllAxes) {
      result.axis_logits.emplace(axis, reorient_to_reference(run_axis(axis, prompt_sets.at(axis)), *image));
    }
    FusionResult fused = fuse_three_axis(result.axis_logits.at(Axis::Axial), result.axis_logits.at(Axis::Coronal),
                                         result.axis_logits.at(Axis::Sagittal), *image);
    result.mask = std::move(fused.mask);
    result.probability = std::move(fused.probability);
  } else {
    const PromptSet prompts = simulate_prompts(gt, request.axis, request.strategy);
    const LogitVolume run = run_axis(request.axis, prompts);
    result.mask = threshold_logits(run, *image);
    result.axis_logits.emplace(request.axis, reorient_to_reference(run, *image));
  }
  return result;
}

}  // namespace volprop
