#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "volgrid/volume.hpp"

namespace volprop {

// Row-major 2D grid, u fastest.
struct Slice {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  Slice() = default;
  Slice(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}

  float at(std::size_t u, std::size_t v) const noexcept { return pixels[u + width * v]; }
  float& at(std::size_t u, std::size_t v) noexcept { return pixels[u + width * v]; }
  std::size_t size() const noexcept { return pixels.size(); }

  bool operator==(const Slice&) const = default;
};

/// Volume dimensions seen from a propagation run: (u, v, t).
/// Axial: (x, y, z). Coronal: (x, z, y). Sagittal: (y, z, x).
Dims run_dims(Axis axis, const Dims& reference) noexcept;

/// Reference-frame (x, y, z) index of run-frame voxel (u, v, t).
Index3 run_to_reference(Axis axis, std::size_t u, std::size_t v, std::size_t t) noexcept;

/// Slice t along `axis`, copied out of `volume`.
Slice extract_slice(const Volume& volume, Axis axis, std::size_t t);

// Ordered slices of a volume along one axis. Slices are copied out on
// demand; the source volume is shared and never mutated.
class SliceSequence {
 public:
  SliceSequence(std::shared_ptr<const Volume> source, Axis axis);

  Axis axis() const noexcept { return axis_; }
  std::size_t length() const noexcept { return dims_[2]; }
  std::size_t width() const noexcept { return dims_[0]; }
  std::size_t height() const noexcept { return dims_[1]; }
  const Volume& source() const noexcept { return *source_; }
  const std::shared_ptr<const Volume>& shared_source() const noexcept { return source_; }

  Slice slice(std::size_t t) const;

 private:
  std::shared_ptr<const Volume> source_;
  Axis axis_;
  Dims dims_;
};

SliceSequence reslice(std::shared_ptr<const Volume> volume, Axis axis);

/// Inverse of reslice: rebuild a volume shaped like `like` from its slices.
Volume stack(std::span<const Slice> slices, Axis axis, const Volume& like);

// Per-voxel logits from one propagation pass. `axis` always records the
// pass that produced them; shape inference is never used to reorient.
struct LogitVolume {
  Axis axis = Axis::Axial;
  bool reference_frame = false;
  Dims dims{1, 1, 1};
  std::vector<float> logits;
  // Run frame only: 1 where the pass emitted slice t.
  std::vector<std::uint8_t> produced;

  static LogitVolume zeros(Axis axis, const Dims& run_frame_dims);

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + dims[0] * (j + dims[1] * k);
  }
  void set_slice(std::size_t t, const Slice& slice);
  Slice slice(std::size_t t) const;
};

/// Map run-frame logits onto the reference volume's (x, y, z) grid.
/// Throws DimensionMismatch when the recorded axis cannot reconcile shapes.
LogitVolume reorient_to_reference(const LogitVolume& logits, const Volume& reference);

/// Inverse of reorient_to_reference.
LogitVolume reorient_to_run(const LogitVolume& reference_logits, Axis axis);

/// Wrap reference-frame logits as a Logit volume on the reference grid.
Volume logits_as_volume(const LogitVolume& reference_logits, const Volume& reference);

/// Strict threshold: logit > 0 is foreground, exactly 0 is background.
Volume threshold_logits(const LogitVolume& reference_logits, const Volume& reference);

}  // namespace volprop
