#include "volgrid/volume.hpp"

#include <algorithm>
#include <string>

#include "common/error.hpp"

namespace volprop {

std::string_view to_string(Axis axis) noexcept {
  switch (axis) {
    case Axis::Axial: return "axial";
    case Axis::Coronal: return "coronal";
    case Axis::Sagittal: return "sagittal";
  }
  return "axial";
}

Axis parse_axis(std::string_view name) {
  if (name == "axial") return Axis::Axial;
  if (name == "coronal") return Axis::Coronal;
  if (name == "sagittal") return Axis::Sagittal;
  fail(ErrorCode::InvalidArgument, "unknown axis '" + std::string(name) + "'");
}

std::string_view to_string(VolumeKind kind) noexcept {
  switch (kind) {
    case VolumeKind::Intensity: return "intensity";
    case VolumeKind::Logit: return "logit";
    case VolumeKind::BinaryMask: return "mask";
  }
  return "intensity";
}

int sweep_dim(Axis axis) noexcept {
  switch (axis) {
    case Axis::Axial: return 2;
    case Axis::Coronal: return 1;
    case Axis::Sagittal: return 0;
  }
  return 2;
}

Affine diagonal_affine(const Spacing& spacing) noexcept {
  Affine a{};
  a[0] = spacing[0];
  a[5] = spacing[1];
  a[10] = spacing[2];
  a[15] = 1.0;
  return a;
}

bool Orientation::is_identity() const noexcept { return *this == Orientation{}; }

bool Orientation::valid() const noexcept {
  std::array<bool, 3> seen{};
  for (int p : perm) {
    if (p < 0 || p > 2 || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = true;
  }
  return true;
}

Orientation Orientation::inverse() const noexcept {
  Orientation inv;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto src = static_cast<std::size_t>(perm[a]);
    inv.perm[src] = static_cast<int>(a);
    inv.flip[src] = flip[a];
  }
  return inv;
}

Orientation Orientation::after(const Orientation& first) const noexcept {
  Orientation out;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto mid = static_cast<std::size_t>(perm[a]);
    out.perm[a] = first.perm[mid];
    out.flip[a] = flip[a] != first.flip[mid];
  }
  return out;
}

Volume::Volume() : affine_(diagonal_affine(spacing_)), data_(1, 0.0f) {}

Volume::Volume(Dims dims, Spacing spacing, VolumeKind kind, std::vector<float> data)
    : dims_(dims), spacing_(spacing), kind_(kind), affine_(diagonal_affine(spacing)), data_(std::move(data)) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (dims_[a] < 1) fail(ErrorCode::InvalidArgument, "volume dimensions must be >= 1");
    if (!(spacing_[a] > 0.0)) fail(ErrorCode::InvalidArgument, "voxel spacing must be > 0");
  }
  const std::size_t n = dims_[0] * dims_[1] * dims_[2];
  if (data_.empty()) {
    data_.assign(n, 0.0f);
  } else if (data_.size() != n) {
    fail(ErrorCode::DimensionMismatch,
         "data has " + std::to_string(data_.size()) + " voxels, dims imply " + std::to_string(n));
  }
  if (kind_ == VolumeKind::BinaryMask) {
    const bool binary = std::all_of(data_.begin(), data_.end(), [](float v) { return v == 0.0f || v == 1.0f; });
    if (!binary) fail(ErrorCode::InvalidArgument, "binary mask contains values other than 0 and 1");
  }
}

void Volume::set_orientation(const Orientation& orientation, const Affine& affine) {
  if (!orientation.valid()) fail(ErrorCode::InvalidArgument, "orientation is not an axis permutation");
  orientation_ = orientation;
  affine_ = affine;
}

Volume Volume::with_kind(VolumeKind kind) const {
  Volume out(dims_, spacing_, kind, data_);
  out.set_orientation(orientation_, affine_);
  return out;
}

Volume apply_orientation(const Volume& volume, const Orientation& orientation) {
  if (!orientation.valid()) fail(ErrorCode::InvalidArgument, "orientation is not an axis permutation");
  const Dims& in_dims = volume.dims();
  Dims dims{};
  Spacing spacing{};
  for (std::size_t a = 0; a < 3; ++a) {
    const auto src = static_cast<std::size_t>(orientation.perm[a]);
    dims[a] = in_dims[src];
    spacing[a] = volume.spacing()[src];
  }

  std::vector<float> data(volume.voxel_count());
  Index3 src_idx{};
  std::size_t out = 0;
  for (std::size_t z = 0; z < dims[2]; ++z) {
    for (std::size_t y = 0; y < dims[1]; ++y) {
      for (std::size_t x = 0; x < dims[0]; ++x, ++out) {
        const Index3 c{x, y, z};
        for (std::size_t a = 0; a < 3; ++a) {
          const auto src = static_cast<std::size_t>(orientation.perm[a]);
          src_idx[src] = orientation.flip[a] ? dims[a] - 1 - c[a] : c[a];
        }
        data[out] = volume.at(src_idx[0], src_idx[1], src_idx[2]);
      }
    }
  }

  // world = A_old * f, with f[perm[a]] = flip[a] ? n_a - 1 - c[a] : c[a].
  const Affine& old = volume.affine();
  Affine affine{};
  affine[15] = 1.0;
  for (std::size_t r = 0; r < 3; ++r) {
    affine[r * 4 + 3] = old[r * 4 + 3];
    for (std::size_t a = 0; a < 3; ++a) {
      const auto src = static_cast<std::size_t>(orientation.perm[a]);
      const double col = old[r * 4 + src];
      if (orientation.flip[a]) {
        affine[r * 4 + a] = -col;
        affine[r * 4 + 3] += col * static_cast<double>(dims[a] - 1);
      } else {
        affine[r * 4 + a] = col;
      }
    }
  }

  Volume result(dims, spacing, volume.kind(), std::move(data));
  result.set_orientation(orientation.after(volume.orientation()), affine);
  return result;
}

std::size_t count_foreground(const Volume& mask) noexcept {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(), [](float v) { return v > 0.5f; }));
}

}  // namespace volprop
