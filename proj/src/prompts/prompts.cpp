#include "prompts/prompts.hpp"

#include <charconv>
#include <cmath>

#include "common/error.hpp"

namespace volprop {

PromptStrategy PromptStrategy::uniform(int k) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "uniform prompting needs k >= 2", "prompt");
  return {PromptKind::Uniform, k};
}

PromptStrategy PromptStrategy::parse(std::string_view text) {
  if (text == "middle") return middle();
  if (text == "first-last") return first_last();
  if (text == "fml") return fml();
  constexpr std::string_view prefix = "uniform:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto digits = text.substr(prefix.size());
    int k = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && ptr == digits.data() + digits.size()) return uniform(k);
  }
  fail(ErrorCode::InvalidArgument, "unknown prompt strategy '" + std::string(text) + "'", "prompt");
}

std::string PromptStrategy::to_string() const {
  switch (kind) {
    case PromptKind::Middle: return "middle";
    case PromptKind::FirstLast: return "first-last";
    case PromptKind::FirstMiddleLast: return "fml";
    case PromptKind::Uniform: return "uniform:" + std::to_string(k);
  }
  return "fml";
}

int PromptStrategy::nominal_count() const noexcept {
  switch (kind) {
    case PromptKind::Middle: return 1;
    case PromptKind::FirstLast: return 2;
    case PromptKind::FirstMiddleLast: return 3;
    case PromptKind::Uniform: return k;
  }
  return 0;
}

std::vector<int> PromptSet::indices() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& p : entries) out.push_back(p.slice_index);
  return out;
}

const Prompt* PromptSet::find(int slice_index) const noexcept {
  for (const auto& p : entries) {
    if (p.slice_index == slice_index) return &p;
  }
  return nullptr;
}

SliceExtent structure_extent(const Volume& gt, Axis axis) {
  const int sd = sweep_dim(axis);
  const Dims& d = gt.dims();
  int first = -1, last = -1;
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (gt.at(x, y, z) <= 0.5f) continue;
        const Index3 p{x, y, z};
        const int s = static_cast<int>(p[static_cast<std::size_t>(sd)]);
        if (first < 0 || s < first) first = s;
        if (s > last) last = s;
      }
    }
  }
  if (first < 0) fail(ErrorCode::EmptyMask, "ground-truth mask has no foreground");
  return {first, last};
}

std::vector<int> prompt_indices(const SliceExtent& e, const PromptStrategy& s) {
  const int need = s.nominal_count();
  if (e.count() < need) {
    fail(ErrorCode::ExtentTooSmall, "structure spans " + std::to_string(e.count()) + " slices, strategy " +
                                        s.to_string() + " needs " + std::to_string(need));
  }
  const int mid = e.first + (e.last - e.first) / 2;
  switch (s.kind) {
    case PromptKind::Middle: return {mid};
    case PromptKind::FirstLast: return {e.first, e.last};
    case PromptKind::FirstMiddleLast: return {e.first, mid, e.last};
    case PromptKind::Uniform: {
      std::vector<int> out;
      out.reserve(static_cast<std::size_t>(s.k));
      const double step = static_cast<double>(e.last - e.first) / (s.k - 1);
      for (int i = 0; i < s.k; ++i) out.push_back(static_cast<int>(std::round(e.first + i * step)));
      return out;
    }
  }
  return {};
}

PromptSet simulate_prompts(const Volume& gt, Axis axis, const PromptStrategy& strategy) {
  PromptSet set;
  set.axis = axis;
  set.strategy = strategy;
  set.extent = structure_extent(gt, axis);
  for (int t : prompt_indices(set.extent, strategy)) {
    set.entries.push_back({t, extract_slice(gt, axis, static_cast<std::size_t>(t))});
  }
  return set;
}

std::map<Axis, PromptSet> allocate_three_axis(const Volume& gt, const PromptStrategy& per_axis) {
  std::map<Axis, PromptSet> out;
  for (Axis a : kAllAxes) out.emplace(a, simulate_prompts(gt, a, per_axis));
  return out;
}

}  // namespace volprop
