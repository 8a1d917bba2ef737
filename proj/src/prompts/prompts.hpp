#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "volgrid/slices.hpp"
#include "volgrid/volume.hpp"

namespace volprop {

struct SliceExtent {
  int first = 0;
  int last = 0;
  int count() const noexcept { return last - first + 1; }
  bool operator==(const SliceExtent&) const = default;
};

enum class PromptKind { Middle, FirstLast, FirstMiddleLast, Uniform };

struct PromptStrategy {
  PromptKind kind = PromptKind::FirstMiddleLast;
  int k = 3;  // only meaningful for Uniform

  static PromptStrategy middle() { return {PromptKind::Middle, 1}; }
  static PromptStrategy first_last() { return {PromptKind::FirstLast, 2}; }
  static PromptStrategy fml() { return {PromptKind::FirstMiddleLast, 3}; }
  static PromptStrategy uniform(int k);

  /// "middle" | "first-last" | "fml" | "uniform:k"
  static PromptStrategy parse(std::string_view text);
  std::string to_string() const;
  int nominal_count() const noexcept;

  bool operator==(const PromptStrategy&) const = default;
};

struct Prompt {
  int slice_index = 0;
  Slice mask;  // full ground-truth slice, values in {0, 1}
};

struct PromptSet {
  Axis axis = Axis::Axial;
  PromptStrategy strategy;
  SliceExtent extent;  // structure extent the prompts were drawn from
  std::vector<Prompt> entries;

  std::vector<int> indices() const;
  const Prompt* find(int slice_index) const noexcept;
};

/// Minimal and maximal slice along `axis` holding foreground. Throws EmptyMask.
SliceExtent structure_extent(const Volume& gt, Axis axis);

/// Slice indices chosen by a strategy. Midpoints use floor, Uniform rounds
/// half away from zero. Throws ExtentTooSmall when the extent holds fewer
/// slices than the strategy's nominal count.
std::vector<int> prompt_indices(const SliceExtent& extent, const PromptStrategy& strategy);

PromptSet simulate_prompts(const Volume& gt, Axis axis, const PromptStrategy& strategy);

/// One independent prompt set per axis, all using the same strategy.
std::map<Axis, PromptSet> allocate_three_axis(const Volume& gt, const PromptStrategy& per_axis);

}  // namespace volprop
