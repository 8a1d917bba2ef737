#pragma once

#include <filesystem>
#include <optional>

#include "volgrid/volume.hpp"

namespace volprop {

enum class NiftiDatatype : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

// NIfTI-1 single-file (.nii / .nii.gz), little-endian. Data is reordered at
// load so that x, y, z increase towards Right, Anterior, Superior; the
// applied permutation is kept in Volume::orientation() and undone by
// save_volume. scl_slope/scl_inter are applied when present.
Volume load_volume(const std::filesystem::path& path);

/// load_volume, then binarize: any nonzero voxel becomes 1.
Volume load_mask(const std::filesystem::path& path);

/// Writes in the original file frame. Without an explicit datatype: masks
/// as uint8, logits as float32, intensities as int16 when lossless.
void save_volume(const Volume& volume, const std::filesystem::path& path,
                 std::optional<NiftiDatatype> datatype = std::nullopt);

/// Canonicalizing orientation for a voxel-to-world affine (largest
/// absolute direction cosine per axis, resolved greedily).
Orientation ras_orientation(const Affine& affine);

}  // namespace volprop
