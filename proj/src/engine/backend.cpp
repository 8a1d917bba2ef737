#include "engine/backend.hpp"

namespace volprop {

bool SegmentationBackend::save_embedding(const FeatureHandle&, std::ostream&) const { return false; }

FeatureHandle SegmentationBackend::load_embedding(std::istream&) const { return nullptr; }

SegmentOutput SegmentationBackend::segment(const FeatureHandle& embedding, std::span<const MemoryEntry> context,
                                           const Slice* prompt) const {
  const FeatureHandle attended = attend(embedding, prompt ? std::span<const MemoryEntry>{} : context);
  DecodeOutput decoded = decode(embedding, attended, prompt);
  FeatureHandle features = encode_memory(embedding, decoded.logits);
  return {std::move(decoded.logits), decoded.confidence, std::move(features)};
}

}  // namespace volprop
