#include "membank/membank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <unordered_map>

#include "common/error.hpp"

namespace volprop {

void MemoryPolicy::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) fail(ErrorCode::ConfigInvalid, "tau must lie in [0, 1]", "memory.tau");
  if (capacity < 0) fail(ErrorCode::ConfigInvalid, "capacity must be >= 0", "memory.capacity");
  if (stride < 1) fail(ErrorCode::ConfigInvalid, "stride must be >= 1", "memory.stride");
  if (gate_k < 0) fail(ErrorCode::ConfigInvalid, "gate_k must be >= 0", "memory.gate_k");
}

std::vector<int> select_conditioned(std::span<const int> prompt_indices, int t, int length, double tau) {
  if (length <= 0) fail(ErrorCode::InvalidArgument, "sequence length must be positive");
  std::vector<int> out;
  for (int p : prompt_indices) {
    const double distance = static_cast<double>(std::abs(p - t)) / static_cast<double>(length);
    if (distance <= tau) out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MemoryEntry> select_noncond(std::span<const MemoryEntry> processed, int t, const MemoryPolicy& policy,
                                        Direction direction) {
  const int sign = direction == Direction::Forward ? 1 : -1;
  auto behind = [&](int s) { return sign * (t - s) > 0; };

  std::vector<MemoryEntry> out;
  if (policy.intelligent_slicing) {
    for (auto it = processed.rbegin(); it != processed.rend() && out.size() < 2; ++it) {
      if (!it->conditioned && behind(it->slice_index)) out.push_back(*it);
    }
    return out;
  }

  const int n = policy.effective_capacity();
  if (n == 0) return out;
  std::unordered_map<int, const MemoryEntry*> by_slice;
  by_slice.reserve(processed.size());
  for (const auto& e : processed) {
    if (!e.conditioned) by_slice[e.slice_index] = &e;
  }
  for (int i = 0; i < n; ++i) {
    const int s = t - sign * (1 + i * policy.stride);
    if (auto it = by_slice.find(s); it != by_slice.end()) out.push_back(*it->second);
  }
  return out;
}

std::vector<MemoryEntry> gate_by_confidence(std::vector<MemoryEntry> selected, int gate_k) {
  if (gate_k < 0) fail(ErrorCode::InvalidArgument, "gate_k must be >= 0");
  if (gate_k == 0 || static_cast<std::size_t>(gate_k) >= selected.size()) return selected;
  // Input is most-recent-first, so a lower position is more recent.
  std::vector<std::size_t> order(selected.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return selected[a].confidence > selected[b].confidence; });
  order.resize(static_cast<std::size_t>(gate_k));
  std::sort(order.begin(), order.end());
  std::vector<MemoryEntry> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(std::move(selected[i]));
  return out;
}

std::vector<MemoryEntry> assign_embedding_slots(std::vector<MemoryEntry> selected, const MemoryPolicy& policy,
                                                int slot_count) {
  if (policy.intelligent_slicing) {
    if (selected.size() > 2 || (selected.size() == 2 && slot_count < 2)) {
      fail(ErrorCode::SlotOverflow, "intelligent slicing holds at most two entries");
    }
    if (!selected.empty()) selected[0].embedding_slot = 0;
    if (selected.size() == 2) selected[1].embedding_slot = slot_count - 1;
    return selected;
  }
  if (selected.size() > static_cast<std::size_t>(std::max(slot_count, 0))) {
    fail(ErrorCode::SlotOverflow, std::to_string(selected.size()) + " memory entries exceed " +
                                      std::to_string(slot_count) + " temporal slots");
  }
  for (std::size_t i = 0; i < selected.size(); ++i) selected[i].embedding_slot = static_cast<int>(i);
  return selected;
}

MemoryBank::MemoryBank(int sequence_length, MemoryPolicy policy, int slot_count, Direction direction)
    : length_(sequence_length), policy_(policy), slot_count_(slot_count), direction_(direction) {
  policy_.validate();
  if (length_ <= 0) fail(ErrorCode::InvalidArgument, "sequence length must be positive");
}

void MemoryBank::add_conditioned(MemoryEntry entry) {
  entry.conditioned = true;
  entry.embedding_slot = 0;
  entry.confidence = 1.0;
  conditioned_[entry.slice_index] = std::move(entry);
}

void MemoryBank::admit(MemoryEntry entry) {
  if (conditioned_.contains(entry.slice_index)) {
    fail(ErrorCode::InvalidArgument, "prompted slice " + std::to_string(entry.slice_index) +
                                         " cannot be admitted as non-conditioned");
  }
  entry.conditioned = false;
  processed_.push_back(std::move(entry));
}

std::vector<int> MemoryBank::conditioned_indices() const {
  std::vector<int> out;
  out.reserve(conditioned_.size());
  for (const auto& [slice, _] : conditioned_) out.push_back(slice);
  return out;
}

std::vector<MemoryEntry> MemoryBank::context_for(int t) const {
  std::vector<MemoryEntry> context;
  const auto prompts = conditioned_indices();
  for (int p : select_conditioned(prompts, t, length_, policy_.tau)) context.push_back(conditioned_.at(p));

  auto window = select_noncond(processed_, t, policy_, direction_);
  window = gate_by_confidence(std::move(window), policy_.gate_k);
  window = assign_embedding_slots(std::move(window), policy_, slot_count_);
  for (auto& e : window) context.push_back(std::move(e));
  return context;
}

}  // namespace volprop
