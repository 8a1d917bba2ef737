#pragma once

#include <memory>

#include "engine/backend.hpp"

namespace volprop {

struct SyntheticBackendParams {
  double intensity_tolerance = 0.15;  // in preprocessed [0, 1] units
  int dilation_radius = 2;            // pixels, Euclidean disk
  float logit_magnitude = 8.0f;
  int slot_count = 7;
};

// Deterministic stand-in for a learned segmenter, used for end-to-end tests
// without model weights.
//
//  * With a prompt: +L inside the prompt mask, -L outside, confidence 1.
//  * Otherwise the seed is the union of the stored masks of every attended
//    entry in the highest-priority slot (lowest slot number). Prompted
//    entries all share slot 0, so they are indistinguishable from each other
//    and from the most recent frame. The seed is dilated, then pixels whose
//    intensity is within tolerance of the seed's remembered mean are kept.
//    Confidence = |kept ∩ seed| / |seed|. No seed: all -L, confidence 0.
//  * Attention compares the current image with every attended entry's image
//    pixel by pixel, so its cost grows linearly with the context size.
class SyntheticBackend final : public SegmentationBackend {
 public:
  explicit SyntheticBackend(SyntheticBackendParams params = {});

  std::string name() const override { return "synthetic"; }
  int slot_count() const override { return params_.slot_count; }
  int input_resolution() const override { return 0; }

  FeatureHandle encode_slice(const ThreeChannelSlice& image) const override;
  FeatureHandle attend(const FeatureHandle& embedding, std::span<const MemoryEntry> context) const override;
  DecodeOutput decode(const FeatureHandle& embedding, const FeatureHandle& attended,
                      const Slice* prompt) const override;
  FeatureHandle encode_memory(const FeatureHandle& embedding, const Slice& logits) const override;

  bool save_embedding(const FeatureHandle& embedding, std::ostream& out) const override;
  FeatureHandle load_embedding(std::istream& in) const override;
  std::string cache_tag() const override;

  const SyntheticBackendParams& params() const noexcept { return params_; }

 private:
  SyntheticBackendParams params_;
};

std::unique_ptr<SegmentationBackend> synthetic_backend(SyntheticBackendParams params = {});

}  // namespace volprop
