#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

namespace volprop {

// Opaque per-backend payload (image embedding, memory features, ...).
struct BackendFeature {
  virtual ~BackendFeature() = default;
};
using FeatureHandle = std::shared_ptr<const BackendFeature>;

struct MemoryEntry {
  int slice_index = 0;
  FeatureHandle embedding;
  FeatureHandle mask_features;
  bool conditioned = false;
  double confidence = 0.0;  // [0, 1]; prompted entries carry 1
  int embedding_slot = 0;   // prompted entries always sit at slot 0
};

struct MemoryPolicy {
  double tau = 1.0;       // conditioned admission threshold on |p - t| / D
  int capacity = 6;       // non-conditioned window N
  int stride = 1;         // spacing between retained non-conditioned frames
  int gate_k = 0;         // keep top-k confident frames; 0 disables gating
  bool intelligent_slicing = false;

  int effective_capacity() const noexcept { return intelligent_slicing ? 2 : capacity; }

  /// Throws ConfigInvalid naming the offending memory.* key.
  void validate() const;

  bool operator==(const MemoryPolicy&) const = default;
};

enum class Direction { Forward, Backward };

/// Prompted slices p with |p - t| / length <= tau, ascending.
std::vector<int> select_conditioned(std::span<const int> prompt_indices, int t, int length, double tau);

/// Non-conditioned entries at traversal offsets 1, 1 + stride, ..., 1 + (N-1)*stride
/// behind t, most recent first; missing offsets are skipped. With intelligent
/// slicing: the two most recent entries behind t. `processed` is in traversal order.
std::vector<MemoryEntry> select_noncond(std::span<const MemoryEntry> processed, int t, const MemoryPolicy& policy,
                                        Direction direction = Direction::Forward);

/// Keep the gate_k most confident entries (ties go to the more recent one),
/// preserving recency order. gate_k == 0 or gate_k >= size is the identity.
std::vector<MemoryEntry> gate_by_confidence(std::vector<MemoryEntry> selected, int gate_k);

/// Recency slots 0..n-1 (0 = most recent). Intelligent slicing maps the most
/// recent entry to slot 0 and the second to slot_count - 1. Throws SlotOverflow.
std::vector<MemoryEntry> assign_embedding_slots(std::vector<MemoryEntry> selected, const MemoryPolicy& policy,
                                                int slot_count);

// Per-pass memory state. Prompted frames are registered up front; every
// other frame is admitted once, in traversal order, after it is segmented.
class MemoryBank {
 public:
  MemoryBank(int sequence_length, MemoryPolicy policy, int slot_count, Direction direction);

  void add_conditioned(MemoryEntry entry);
  void admit(MemoryEntry entry);

  /// Everything frame t attends to: selected prompted entries (slot 0)
  /// followed by the gated, slotted non-conditioned window.
  std::vector<MemoryEntry> context_for(int t) const;

  std::vector<int> conditioned_indices() const;
  const std::vector<MemoryEntry>& processed() const noexcept { return processed_; }
  const MemoryPolicy& policy() const noexcept { return policy_; }

 private:
  int length_;
  MemoryPolicy policy_;
  int slot_count_;
  Direction direction_;
  std::map<int, MemoryEntry> conditioned_;
  std::vector<MemoryEntry> processed_;
};

}  // namespace volprop
