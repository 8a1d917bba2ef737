#include "volgrid/slices.hpp"

#include <string>

#include "common/error.hpp"

namespace volprop {

Dims run_dims(Axis axis, const Dims& r) noexcept {
  switch (axis) {
    case Axis::Axial: return {r[0], r[1], r[2]};
    case Axis::Coronal: return {r[0], r[2], r[1]};
    case Axis::Sagittal: return {r[1], r[2], r[0]};
  }
  return r;
}

Index3 run_to_reference(Axis axis, std::size_t u, std::size_t v, std::size_t t) noexcept {
  switch (axis) {
    case Axis::Axial: return {u, v, t};
    case Axis::Coronal: return {u, t, v};
    case Axis::Sagittal: return {t, u, v};
  }
  return {u, v, t};
}

SliceSequence::SliceSequence(std::shared_ptr<const Volume> source, Axis axis)
    : source_(std::move(source)), axis_(axis) {
  if (!source_) fail(ErrorCode::InvalidArgument, "slice sequence needs a source volume");
  dims_ = run_dims(axis_, source_->dims());
}

Slice extract_slice(const Volume& volume, Axis axis, std::size_t t) {
  const Dims d = run_dims(axis, volume.dims());
  if (t >= d[2]) fail(ErrorCode::InvalidArgument, "slice index " + std::to_string(t) + " out of range");
  Slice out(d[0], d[1]);
  for (std::size_t v = 0; v < d[1]; ++v) {
    for (std::size_t u = 0; u < d[0]; ++u) {
      const Index3 r = run_to_reference(axis, u, v, t);
      out.at(u, v) = volume.at(r[0], r[1], r[2]);
    }
  }
  return out;
}

Slice SliceSequence::slice(std::size_t t) const { return extract_slice(*source_, axis_, t); }

SliceSequence reslice(std::shared_ptr<const Volume> volume, Axis axis) {
  return SliceSequence(std::move(volume), axis);
}

Volume stack(std::span<const Slice> slices, Axis axis, const Volume& like) {
  const Dims rd = run_dims(axis, like.dims());
  if (slices.size() != rd[2]) fail(ErrorCode::DimensionMismatch, "slice count does not match volume depth");
  Volume out(like.dims(), like.spacing(), like.kind());
  out.set_orientation(like.orientation(), like.affine());
  for (std::size_t t = 0; t < rd[2]; ++t) {
    const Slice& s = slices[t];
    if (s.width != rd[0] || s.height != rd[1]) fail(ErrorCode::DimensionMismatch, "slice shape mismatch");
    for (std::size_t v = 0; v < rd[1]; ++v) {
      for (std::size_t u = 0; u < rd[0]; ++u) {
        const Index3 r = run_to_reference(axis, u, v, t);
        out.at(r[0], r[1], r[2]) = s.at(u, v);
      }
    }
  }
  return out;
}

LogitVolume LogitVolume::zeros(Axis axis, const Dims& d) {
  LogitVolume l;
  l.axis = axis;
  l.dims = d;
  l.logits.assign(d[0] * d[1] * d[2], 0.0f);
  l.produced.assign(d[2], 0);
  return l;
}

void LogitVolume::set_slice(std::size_t t, const Slice& s) {
  if (s.width != dims[0] || s.height != dims[1] || t >= dims[2]) {
    fail(ErrorCode::DimensionMismatch, "logit slice does not fit the logit volume");
  }
  std::copy(s.pixels.begin(), s.pixels.end(), logits.begin() + static_cast<std::ptrdiff_t>(index(0, 0, t)));
  if (!produced.empty()) produced[t] = 1;
}

Slice LogitVolume::slice(std::size_t t) const {
  Slice s(dims[0], dims[1]);
  const auto begin = logits.begin() + static_cast<std::ptrdiff_t>(index(0, 0, t));
  std::copy(begin, begin + static_cast<std::ptrdiff_t>(s.size()), s.pixels.begin());
  return s;
}

LogitVolume reorient_to_reference(const LogitVolume& l, const Volume& reference) {
  if (l.reference_frame) {
    if (l.dims != reference.dims()) fail(ErrorCode::DimensionMismatch, "logits do not match the reference grid");
    return l;
  }
  const Dims expected = run_dims(l.axis, reference.dims());
  if (l.dims != expected) {
    fail(ErrorCode::DimensionMismatch,
         "logits from a " + std::string(to_string(l.axis)) + " run do not match the reference shape");
  }
  LogitVolume out;
  out.axis = l.axis;
  out.reference_frame = true;
  out.dims = reference.dims();
  out.logits.assign(l.logits.size(), 0.0f);
  for (std::size_t t = 0; t < l.dims[2]; ++t) {
    for (std::size_t v = 0; v < l.dims[1]; ++v) {
      for (std::size_t u = 0; u < l.dims[0]; ++u) {
        const Index3 r = run_to_reference(l.axis, u, v, t);
        out.logits[reference.index(r[0], r[1], r[2])] = l.logits[l.index(u, v, t)];
      }
    }
  }
  return out;
}

LogitVolume reorient_to_run(const LogitVolume& ref, Axis axis) {
  if (!ref.reference_frame) fail(ErrorCode::InvalidArgument, "logits are already in a run frame");
  LogitVolume out = LogitVolume::zeros(axis, run_dims(axis, ref.dims));
  out.produced.assign(out.dims[2], 1);
  for (std::size_t t = 0; t < out.dims[2]; ++t) {
    for (std::size_t v = 0; v < out.dims[1]; ++v) {
      for (std::size_t u = 0; u < out.dims[0]; ++u) {
        const Index3 r = run_to_reference(axis, u, v, t);
        out.logits[out.index(u, v, t)] = ref.logits[ref.index(r[0], r[1], r[2])];
      }
    }
  }
  return out;
}

Volume logits_as_volume(const LogitVolume& l, const Volume& reference) {
  const LogitVolume r = reorient_to_reference(l, reference);
  Volume out(reference.dims(), reference.spacing(), VolumeKind::Logit, r.logits);
  out.set_orientation(reference.orientation(), reference.affine());
  return out;
}

Volume threshold_logits(const LogitVolume& l, const Volume& reference) {
  const LogitVolume r = reorient_to_reference(l, reference);
  std::vector<float> mask(r.logits.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = r.logits[i] > 0.0f ? 1.0f : 0.0f;
  Volume out(reference.dims(), reference.spacing(), VolumeKind::BinaryMask, std::move(mask));
  out.set_orientation(reference.orientation(), reference.affine());
  return out;
}

}  // namespace volprop
