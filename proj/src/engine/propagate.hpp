#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "engine/backend.hpp"
#include "membank/membank.hpp"
#include "preproc/preproc.hpp"
#include "profiler/profiler.hpp"
#include "prompts/prompts.hpp"
#include "volgrid/slices.hpp"

namespace volprop {

enum class PropagationMode { Forward, ForwardBackward, ThreeAxis };

std::string_view to_string(PropagationMode mode) noexcept;
/// "forward" | "forward-backward" | "three-axis"
PropagationMode parse_propagation_mode(std::string_view text);

// On-disk embedding cache keyed by backend tag and encoder input bytes.
// Reads and writes are best effort; a corrupt entry is re-encoded.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path dir);

  FeatureHandle load(const SegmentationBackend& backend, const ThreeChannelSlice& image) const;
  void store(const SegmentationBackend& backend, const ThreeChannelSlice& image, const FeatureHandle& embedding) const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path entry_path(const SegmentationBackend& backend, const ThreeChannelSlice& image) const;
  std::filesystem::path dir_;
};

/// Preprocesses and encodes every slice of `seq` (state initialization).
std::vector<FeatureHandle> encode_sequence(const SliceSequence& seq, const PreprocessSpec& spec,
                                           const SegmentationBackend& backend, Profiler* profiler = nullptr,
                                           const EmbeddingCache* cache = nullptr);

// What each produced slice attended to, in traversal order. Tests use it to
// check the memory policy as the engine applies it.
struct PassTrace {
  struct Step {
    int slice_index = 0;
    bool prompted = false;
    std::vector<int> context_slices;
    std::vector<int> context_slots;
    double confidence = 0.0;
  };
  std::vector<Step> steps;
};

/// One pass over the slices of `seq`. Forward covers [first prompt, extent
/// end], backward covers [extent start, last prompt]. Prompted slices are
/// registered as conditioned memory before traversal starts. Slices the pass
/// does not reach keep logit 0 and produced = 0.
LogitVolume propagate_axis(const SliceSequence& seq, std::span<const FeatureHandle> embeddings,
                           const PromptSet& prompts, const MemoryPolicy& policy,
                           const SegmentationBackend& backend, Direction direction, Profiler* profiler = nullptr,
                           PassTrace* trace = nullptr);

/// Mean of the two passes where both produced a slice, the single pass elsewhere.
LogitVolume merge_bidirectional(const LogitVolume& forward, const LogitVolume& backward);

LogitVolume run_forward_backward(const SliceSequence& seq, std::span<const FeatureHandle> embeddings,
                                 const PromptSet& prompts, const MemoryPolicy& policy,
                                 const SegmentationBackend& backend, Profiler* profiler = nullptr);

struct FusionResult {
  Volume mask;                      // probability > 0.5
  std::vector<double> probability;  // sigmoid of the mean logit, strictly inside (0, 1)
};

/// Sigmoid of the mean of three reference-frame logit volumes.
FusionResult fuse_three_axis(const LogitVolume& axial, const LogitVolume& coronal, const LogitVolume& sagittal,
                             const Volume& reference);

/// Probability for one voxel; summation order does not depend on argument order.
double fuse_logits(float a, float b, float c) noexcept;

struct SegmentRequest {
  PropagationMode mode = PropagationMode::Forward;
  PromptStrategy strategy = PromptStrategy::fml();
  MemoryPolicy policy;
  PreprocessSpec preprocess;
  Axis axis = Axis::Axial;  // single-axis modes only
};

struct SegmentResult {
  Volume mask;
  // Reference-frame logits per executed axis, before any fusion.
  std::map<Axis, LogitVolume> axis_logits;
  std::vector<double> probability;  // three-axis only
};

/// Full pipeline on one structure: `image` is already windowed/normalized,
/// `gt` provides the simulated prompts. Both share a grid.
SegmentResult segment_structure(std::shared_ptr<const Volume> image, const Volume& gt, const SegmentRequest& request,
                                const SegmentationBackend& backend, Profiler* profiler = nullptr,
                                const EmbeddingCache* cache = nullptr);

}  // namespace volprop
