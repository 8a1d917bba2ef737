#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace volprop {

enum class VolumeKind { Intensity, Logit, BinaryMask };

// Propagation axes. Axial sweeps z, coronal sweeps y, sagittal sweeps x.
enum class Axis { Axial, Coronal, Sagittal };

inline constexpr std::array<Axis, 3> kAllAxes{Axis::Axial, Axis::Coronal, Axis::Sagittal};

std::string_view to_string(Axis axis) noexcept;
Axis parse_axis(std::string_view name);
std::string_view to_string(VolumeKind kind) noexcept;

/// Index (0 = x, 1 = y, 2 = z) of the volume dimension an axis sweeps.
int sweep_dim(Axis axis) noexcept;

using Dims = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;
using Index3 = std::array<std::size_t, 3>;
/// Row-major 4x4 voxel-index to world (mm) transform.
using Affine = std::array<double, 16>;

Affine diagonal_affine(const Spacing& spacing) noexcept;

// Canonical axis `a` reads source axis perm[a], reversed when flip[a].
struct Orientation {
  std::array<int, 3> perm{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};

  static Orientation identity() noexcept { return {}; }
  bool is_identity() const noexcept;
  Orientation inverse() const noexcept;
  /// Orientation equivalent to applying `first`, then `*this`.
  Orientation after(const Orientation& first) const noexcept;
  bool valid() const noexcept;

  bool operator==(const Orientation&) const = default;
};

// Dense scalar grid, x fastest. Holds CT intensities, logits or binary
// masks. `orientation` records how the data was permuted/flipped away from
// the on-disk layout so results can be written back in the file frame.
class Volume {
 public:
  Volume();
  Volume(Dims dims, Spacing spacing, VolumeKind kind, std::vector<float> data = {});

  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim(int axis) const noexcept { return dims_[static_cast<std::size_t>(axis)]; }
  const Spacing& spacing() const noexcept { return spacing_; }
  VolumeKind kind() const noexcept { return kind_; }
  const Orientation& orientation() const noexcept { return orientation_; }
  const Affine& affine() const noexcept { return affine_; }
  std::size_t voxel_count() const noexcept { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_[0] * (y + dims_[1] * z);
  }
  float at(std::size_t x, std::size_t y, std::size_t z) const noexcept { return data_[index(x, y, z)]; }
  float& at(std::size_t x, std::size_t y, std::size_t z) noexcept { return data_[index(x, y, z)]; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  void set_orientation(const Orientation& orientation, const Affine& affine);
  void set_affine(const Affine& affine) noexcept { affine_ = affine; }

  /// Same data relabelled; BinaryMask requires every voxel in {0, 1}.
  Volume with_kind(VolumeKind kind) const;

  bool same_grid(const Volume& other) const noexcept {
    return dims_ == other.dims_ && spacing_ == other.spacing_;
  }

 private:
  Dims dims_{1, 1, 1};
  Spacing spacing_{1.0, 1.0, 1.0};
  VolumeKind kind_ = VolumeKind::Intensity;
  Orientation orientation_;
  Affine affine_{};
  std::vector<float> data_;
};

/// Permute/flip data, spacing and affine. The result's orientation is the
/// composition with the volume's existing one.
Volume apply_orientation(const Volume& volume, const Orientation& orientation);

/// Counts voxels > 0.5; the BinaryMask convention for "foreground".
std::size_t count_foreground(const Volume& mask) noexcept;

}  // namespace volprop
