#pragma once

#include <filesystem>
#include <optional>

#include "volgrid/volume.hpp"

namespace volprop {

// Half-open voxel box [lo, hi).
struct Roi {
  Index3 lo{};
  Index3 hi{};

  bool empty() const noexcept { return lo[0] >= hi[0] || lo[1] >= hi[1] || lo[2] >= hi[2]; }
  Dims size() const noexcept { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
  bool operator==(const Roi&) const = default;
};

struct CropInfo {
  Index3 origin{};
  std::size_t margin = 0;
  bool operator==(const CropInfo&) const = default;
};

struct CroppedVolume {
  Volume volume;
  CropInfo info;
};

/// Tight box around foreground voxels; nullopt for an empty mask.
std::optional<Roi> bounding_box(const Volume& mask);

/// Crop to `roi` grown by `margin` voxels per side, clamped to the volume.
CroppedVolume crop_to_roi(const Volume& volume, const Roi& roi, std::size_t margin);

/// Place a cropped volume back onto `reference`'s grid, zero elsewhere.
Volume uncrop(const Volume& cropped, const CropInfo& info, const Volume& reference);

/// Sidecar JSON: {"origin": [x, y, z], "margin": m}.
void write_crop_sidecar(const std::filesystem::path& path, const CropInfo& info);
CropInfo read_crop_sidecar(const std::filesystem::path& path);

}  // namespace volprop
