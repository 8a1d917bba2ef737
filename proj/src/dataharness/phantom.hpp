#pragma once

#include <filesystem>
#include <vector>

#include "dataharness/dataharness.hpp"
#include "volgrid/volume.hpp"

namespace volprop {

struct Ball {
  std::array<double, 3> center{32.0, 32.0, 32.0};  // voxel coordinates
  double radius = 10.0;                             // voxels
};

struct PhantomSpec {
  Dims dims{64, 64, 64};
  Spacing spacing{1.0, 1.0, 1.0};
  float foreground_hu = 1000.0f;
  float background_hu = -1000.0f;
  Ball target;
  std::vector<Ball> distractors;  // same intensity, absent from the mask
};

struct Phantom {
  Volume image;  // Intensity, HU
  Volume mask;   // BinaryMask of the target only
};

/// Voxel (x, y, z) is inside a ball when its centre lies within the radius.
Phantom make_phantom(const PhantomSpec& spec);

/// 64^3, radius 10, +1000 HU on -1000 HU.
PhantomSpec sphere_phantom_spec();

/// A target sphere filling a short volume plus a small distractor of
/// identical intensity near one end. It sits outside every cross section of
/// the target except the widest one, so only a memory that keeps the
/// far-away middle prompt can lead the segmenter onto it.
PhantomSpec two_sphere_phantom_spec();

/// Writes `count` sphere phantoms (radius and centre vary per case) as
/// NIfTI files under dir and returns their manifest (also written to
/// dir/manifest.jsonl). Class name "sphere".
Manifest write_phantom_suite(const std::filesystem::path& dir, std::size_t count = 10);

}  // namespace volprop
