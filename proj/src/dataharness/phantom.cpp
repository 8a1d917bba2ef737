#include "dataharness/phantom.hpp"

#include <cstdio>

#include "common/error.hpp"
#include "volgrid/nifti.hpp"

namespace volprop {

namespace {

bool inside(const Ball& b, std::size_t x, std::size_t y, std::size_t z) noexcept {
  const double dx = static_cast<double>(x) - b.center[0];
  const double dy = static_cast<double>(y) - b.center[1];
  const double dz = static_cast<double>(z) - b.center[2];
  return dx * dx + dy * dy + dz * dz <= b.radius * b.radius;
}

}  // namespace

Phantom make_phantom(const PhantomSpec& spec) {
  Phantom p{Volume(spec.dims, spec.spacing, VolumeKind::Intensity),
            Volume(spec.dims, spec.spacing, VolumeKind::BinaryMask)};
  for (std::size_t z = 0; z < spec.dims[2]; ++z) {
    for (std::size_t y = 0; y < spec.dims[1]; ++y) {
      for (std::size_t x = 0; x < spec.dims[0]; ++x) {
        const bool target = inside(spec.target, x, y, z);
        bool bright = target;
        for (const auto& d : spec.distractors) bright = bright || inside(d, x, y, z);
        p.image.at(x, y, z) = bright ? spec.foreground_hu : spec.background_hu;
        p.mask.at(x, y, z) = target ? 1.0f : 0.0f;
      }
    }
  }
  return p;
}

PhantomSpec sphere_phantom_spec() { return {}; }

PhantomSpec two_sphere_phantom_spec() {
  PhantomSpec s;
  s.dims = {48, 48, 35};
  // The target is clipped by both ends of the volume, so its first and last
  // slices are already wide and every slice-to-slice step stays within the
  // segmenter's reach. The distractor is out of reach of every target slice
  // it shares, but inside the widest (middle) one.
  s.target = {{24.0, 24.0, 17.0}, 22.0};
  s.distractors = {{{24.0 + 21.0, 24.0, 3.0}, 2.5}};
  return s;
}

Manifest write_phantom_suite(const std::filesystem::path& dir, std::size_t count) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Manifest m;
  m.split = "phantom";
  m.per_class = count;
  for (std::size_t i = 0; i < count; ++i) {
    PhantomSpec spec = sphere_phantom_spec();
    const double shift = static_cast<double>(i % 5) - 2.0;
    spec.target.radius = 8.0 + static_cast<double>(i % 5);
    spec.target.center = {32.0 + shift, 32.0 - shift, 32.0 + 0.5 * shift};
    const Phantom p = make_phantom(spec);
    char id[32];
    std::snprintf(id, sizeof id, "phantom%02zu", i);
    const std::string image = std::string(id) + "_ct.nii.gz";
    const std::string mask = std::string(id) + "_sphere.nii.gz";
    save_volume(p.image, dir / image);
    save_volume(p.mask, dir / mask);
    m.entries.push_back({id, "sphere", mask, image});
  }
  write_manifest(m, dir / "manifest.jsonl");
  return m;
}

}  // namespace volprop
