#include "volgrid/crop.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "common/error.hpp"

namespace volprop {

std::optional<Roi> bounding_box(const Volume& mask) {
  const Dims& d = mask.dims();
  Roi box{{d[0], d[1], d[2]}, {0, 0, 0}};
  bool any = false;
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (mask.at(x, y, z) <= 0.5f) continue;
        any = true;
        const Index3 p{x, y, z};
        for (std::size_t a = 0; a < 3; ++a) {
          box.lo[a] = std::min(box.lo[a], p[a]);
          box.hi[a] = std::max(box.hi[a], p[a] + 1);
        }
      }
    }
  }
  if (!any) return std::nullopt;
  return box;
}

CroppedVolume crop_to_roi(const Volume& volume, const Roi& roi, std::size_t margin) {
  if (roi.empty()) fail(ErrorCode::EmptyRoi, "region of interest is empty");
  const Dims& d = volume.dims();
  for (std::size_t a = 0; a < 3; ++a) {
    if (roi.hi[a] > d[a]) fail(ErrorCode::InvalidArgument, "region of interest exceeds the volume");
  }
  Index3 lo{};
  Dims size{};
  for (std::size_t a = 0; a < 3; ++a) {
    lo[a] = roi.lo[a] > margin ? roi.lo[a] - margin : 0;
    const std::size_t hi = std::min(d[a], roi.hi[a] + margin);
    size[a] = hi - lo[a];
  }

  std::vector<float> data(size[0] * size[1] * size[2]);
  std::size_t i = 0;
  for (std::size_t z = 0; z < size[2]; ++z) {
    for (std::size_t y = 0; y < size[1]; ++y) {
      for (std::size_t x = 0; x < size[0]; ++x) data[i++] = volume.at(lo[0] + x, lo[1] + y, lo[2] + z);
    }
  }
  Volume out(size, volume.spacing(), volume.kind(), std::move(data));

  Affine affine = volume.affine();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t a = 0; a < 3; ++a) affine[r * 4 + 3] += affine[r * 4 + a] * static_cast<double>(lo[a]);
  }
  out.set_orientation(volume.orientation(), affine);
  return {std::move(out), CropInfo{lo, margin}};
}

Volume uncrop(const Volume& cropped, const CropInfo& info, const Volume& reference) {
  const Dims& c = cropped.dims();
  const Dims& d = reference.dims();
  for (std::size_t a = 0; a < 3; ++a) {
    if (info.origin[a] + c[a] > d[a]) fail(ErrorCode::DimensionMismatch, "cropped volume does not fit the reference");
  }
  Volume out(d, reference.spacing(), cropped.kind());
  out.set_orientation(reference.orientation(), reference.affine());
  for (std::size_t z = 0; z < c[2]; ++z) {
    for (std::size_t y = 0; y < c[1]; ++y) {
      for (std::size_t x = 0; x < c[0]; ++x) {
        out.at(info.origin[0] + x, info.origin[1] + y, info.origin[2] + z) = cropped.at(x, y, z);
      }
    }
  }
  return out;
}

void write_crop_sidecar(const std::filesystem::path& path, const CropInfo& info) {
  nlohmann::json j;
  j["origin"] = {info.origin[0], info.origin[1], info.origin[2]};
  j["margin"] = info.margin;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump() << '\n';
}

CropInfo read_crop_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    CropInfo info;
    const auto& origin = j.at("origin");
    if (!origin.is_array() || origin.size() != 3) fail(ErrorCode::InvalidArgument, "origin must have 3 entries");
    for (std::size_t a = 0; a < 3; ++a) info.origin[a] = origin[a].get<std::size_t>();
    info.margin = j.at("margin").get<std::size_t>();
    return info;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "bad crop sidecar " + path.string() + ": " + e.what());
  }
}

}  // namespace volprop
