#pragma once

#include <array>

#include "volgrid/slices.hpp"
#include "volgrid/volume.hpp"

namespace volprop {

struct WindowSpec {
  double level = 400.0;  // HU
  double width = 1800.0; // HU, > 0
};

/// Clamp to [level - width/2, level + width/2], then map linearly to [0, 1].
Volume hu_window(const Volume& volume, const WindowSpec& window);
float window_value(float hu, const WindowSpec& window) noexcept;

/// Min-max scaling to [0, 1]; a constant volume maps to all zeros.
Volume normalize_full_range(const Volume& volume);

struct ClaheSpec {
  bool enabled = false;
  double clip_limit = 2.0;
  std::array<std::size_t, 2> tiles{8, 8};  // (nx, ny)
};

inline constexpr std::size_t kClaheBins = 256;

// Contrast-limited adaptive histogram equalization on a [0, 1] slice.
// Each tile's 256-bin histogram is clipped at clip_limit * area / 256
// (excess spread evenly), mapped through its normalized CDF, and pixel
// values are bilinearly blended between the four nearest tile centres.
// An infinite clip_limit disables clipping.
Slice clahe(const Slice& slice, double clip_limit, std::array<std::size_t, 2> tiles);

struct ThreeChannelSlice {
  std::size_t width = 0;
  std::size_t height = 0;
  std::array<std::vector<float>, 3> channels;

  Slice channel(std::size_t c) const;
};

ThreeChannelSlice to_three_channel(const Slice& slice);

struct PreprocessSpec {
  bool window_enabled = true;
  WindowSpec window;
  ClaheSpec clahe;
};

/// Volume-level step: bone window (or full-range normalization when the
/// window is disabled). Dimensions, spacing and orientation are unchanged.
Volume preprocess_volume(const Volume& volume, const PreprocessSpec& spec);

/// Slice-level step applied right before encoding (CLAHE when enabled).
Slice preprocess_slice(const Slice& slice, const PreprocessSpec& spec);

}  // namespace volprop
