#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>

#include "membank/membank.hpp"
#include "preproc/preproc.hpp"
#include "volgrid/slices.hpp"

namespace volprop {

struct DecodeOutput {
  Slice logits;
  double confidence = 0.0;
};

struct SegmentOutput {
  Slice logits;
  double confidence = 0.0;
  FeatureHandle mask_features;
};

// A promptable, memory-conditioned slice segmenter. Implementations must
// be deterministic and safe to call concurrently through const methods;
// the engine owns all per-pass state. The three tracking stages are
// separate calls so they can be timed individually.
class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;

  virtual std::string name() const = 0;
  /// Number of temporal-embedding slots S.
  virtual int slot_count() const = 0;
  /// Square encoder resolution; 0 means slices are used at native size.
  virtual int input_resolution() const = 0;

  virtual FeatureHandle encode_slice(const ThreeChannelSlice& image) const = 0;
  /// Memory attention over the (slotted) context for the current frame.
  virtual FeatureHandle attend(const FeatureHandle& embedding, std::span<const MemoryEntry> context) const = 0;
  /// Mask decoding. With a prompt the logits reproduce the prompt mask.
  virtual DecodeOutput decode(const FeatureHandle& embedding, const FeatureHandle& attended,
                              const Slice* prompt) const = 0;
  virtual FeatureHandle encode_memory(const FeatureHandle& embedding, const Slice& logits) const = 0;

  /// Embedding persistence for the on-disk cache; unsupported by default.
  virtual bool save_embedding(const FeatureHandle& embedding, std::ostream& out) const;
  virtual FeatureHandle load_embedding(std::istream& in) const;
  /// Identifies everything that changes embeddings (for cache keys).
  virtual std::string cache_tag() const { return name(); }

  SegmentOutput segment(const FeatureHandle& embedding, std::span<const MemoryEntry> context,
                        const Slice* prompt) const;
};

}  // namespace volprop
