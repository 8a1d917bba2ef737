#include "volgrid/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "common/error.hpp"

namespace volprop {

static_assert(std::endian::native == std::endian::little, "NIfTI IO assumes a little-endian host");

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kSingleFileOffset = 352;

template <typename T>
T get(const unsigned char* buf, std::size_t offset) {
  T v;
  std::memcpy(&v, buf + offset, sizeof v);
  return v;
}

template <typename T>
void put(unsigned char* buf, std::size_t offset, T v) {
  std::memcpy(buf + offset, &v, sizeof v);
}

struct GzFile {
  gzFile handle = nullptr;
  GzFile(const std::filesystem::path& path, const char* mode) : handle(gzopen(path.c_str(), mode)) {}
  ~GzFile() {
    if (handle) gzclose(handle);
  }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;
};

void read_exact(gzFile f, void* dst, std::size_t n, const std::filesystem::path& path) {
  auto* p = static_cast<unsigned char*>(dst);
  while (n > 0) {
    const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int got = gzread(f, p, chunk);
    if (got <= 0) fail(ErrorCode::IoFailure, "truncated NIfTI data in " + path.string());
    p += got;
    n -= static_cast<std::size_t>(got);
  }
}

void write_exact(gzFile f, const void* src, std::size_t n, const std::filesystem::path& path) {
  const auto* p = static_cast<const unsigned char*>(src);
  while (n > 0) {
    const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
    const int put_n = gzwrite(f, p, chunk);
    if (put_n <= 0) fail(ErrorCode::IoFailure, "write failed for " + path.string());
    p += put_n;
    n -= static_cast<std::size_t>(put_n);
  }
}

bool is_gz(const std::filesystem::path& path) { return path.extension() == ".gz"; }

Affine quaternion_affine(const unsigned char* h, const Spacing& spacing) {
  const double b = get<float>(h, 256), c = get<float>(h, 260), d = get<float>(h, 264);
  const double qx = get<float>(h, 268), qy = get<float>(h, 272), qz = get<float>(h, 276);
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  const double qfac = get<float>(h, 76) < 0.0f ? -1.0 : 1.0;
  const double r[3][3] = {
      {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
      {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
      {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b},
  };
  Affine m{};
  const double s[3] = {spacing[0], spacing[1], spacing[2] * qfac};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) m[i * 4 + j] = r[i][j] * s[j];
  }
  m[3] = qx;
  m[7] = qy;
  m[11] = qz;
  m[15] = 1.0;
  return m;
}

}  // namespace

Orientation ras_orientation(const Affine& affine) {
  Orientation o;
  std::array<bool, 3> row_used{}, col_used{};
  for (int round = 0; round < 3; ++round) {
    double best = -1.0;
    std::size_t br = 0, bc = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      if (row_used[r]) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        if (col_used[c]) continue;
        const double v = std::abs(affine[r * 4 + c]);
        if (v > best) {
          best = v;
          br = r;
          bc = c;
        }
      }
    }
    row_used[br] = col_used[bc] = true;
    o.perm[br] = static_cast<int>(bc);
    o.flip[br] = affine[br * 4 + bc] < 0.0;
  }
  return o;
}

Volume load_volume(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::IoFailure, "no such file: " + path.string());
  GzFile file(path, "rb");
  if (!file.handle) fail(ErrorCode::IoFailure, "cannot open " + path.string());

  unsigned char h[kHeaderSize];
  if (gzread(file.handle, h, kHeaderSize) != static_cast<int>(kHeaderSize)) {
    fail(ErrorCode::MalformedHeader, "short NIfTI header in " + path.string());
  }
  const auto sizeof_hdr = get<std::int32_t>(h, 0);
  if (sizeof_hdr != 348) {
    if (sizeof_hdr == 0x5C010000) fail(ErrorCode::MalformedHeader, "big-endian NIfTI is not supported");
    fail(ErrorCode::MalformedHeader, "sizeof_hdr is not 348 in " + path.string());
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0) {
    fail(ErrorCode::MalformedHeader, "expected single-file NIfTI-1 magic 'n+1' in " + path.string());
  }

  const auto ndim = get<std::int16_t>(h, 40);
  if (ndim < 1 || ndim > 7) fail(ErrorCode::MalformedHeader, "dim[0] out of range");
  Dims dims{1, 1, 1};
  for (int i = 1; i <= ndim; ++i) {
    const auto n = get<std::int16_t>(h, 40 + 2 * static_cast<std::size_t>(i));
    if (n < 1) fail(ErrorCode::MalformedHeader, "non-positive dimension in header");
    if (i <= 3) {
      dims[static_cast<std::size_t>(i - 1)] = static_cast<std::size_t>(n);
    } else if (n != 1) {
      fail(ErrorCode::MalformedHeader, "only 3D volumes are supported");
    }
  }

  Spacing spacing{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = std::abs(get<float>(h, 80 + 4 * i));
    if (!(p > 0.0) || !std::isfinite(p)) {
      if (i < static_cast<std::size_t>(ndim)) fail(ErrorCode::MalformedHeader, "voxel spacing must be positive");
    }
    spacing[i] = p > 0.0 && std::isfinite(p) ? p : 1.0;
  }

  const auto datatype = get<std::int16_t>(h, 70);
  std::size_t bytes_per_voxel = 0;
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::UInt8: bytes_per_voxel = 1; break;
    case NiftiDatatype::Int16: bytes_per_voxel = 2; break;
    case NiftiDatatype::Float32: bytes_per_voxel = 4; break;
    default:
      fail(ErrorCode::UnsupportedDatatype, "NIfTI datatype " + std::to_string(datatype) +
                                               " (only uint8, int16, float32 are supported)");
  }

  const double vox_offset = get<float>(h, 108);
  if (vox_offset < static_cast<double>(kSingleFileOffset) || vox_offset != std::floor(vox_offset)) {
    fail(ErrorCode::MalformedHeader, "invalid vox_offset");
  }
  std::vector<unsigned char> skip(static_cast<std::size_t>(vox_offset) - kHeaderSize);
  read_exact(file.handle, skip.data(), skip.size(), path);

  const std::size_t n = dims[0] * dims[1] * dims[2];
  std::vector<unsigned char> raw(n * bytes_per_voxel);
  read_exact(file.handle, raw.data(), raw.size(), path);

  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (bytes_per_voxel) {
      case 1: data[i] = raw[i]; break;
      case 2: data[i] = get<std::int16_t>(raw.data(), 2 * i); break;
      default: data[i] = get<float>(raw.data(), 4 * i); break;
    }
  }
  const float slope = get<float>(h, 112);
  const float inter = get<float>(h, 116);
  if (slope != 0.0f && std::isfinite(slope) && std::isfinite(inter) && (slope != 1.0f || inter != 0.0f)) {
    for (float& v : data) v = v * slope + inter;
  }

  Affine affine;
  if (get<std::int16_t>(h, 254) > 0) {
    affine = {};
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) affine[r * 4 + c] = get<float>(h, 280 + 16 * r + 4 * c);
    }
    affine[15] = 1.0;
  } else if (get<std::int16_t>(h, 252) > 0) {
    affine = quaternion_affine(h, spacing);
  } else {
    affine = diagonal_affine(spacing);
  }

  Volume file_frame(dims, spacing, VolumeKind::Intensity, std::move(data));
  file_frame.set_affine(affine);
  const Orientation to_ras = ras_orientation(affine);
  if (to_ras.is_identity()) return file_frame;
  return apply_orientation(file_frame, to_ras);
}

Volume load_mask(const std::filesystem::path& path) {
  Volume v = load_volume(path);
  for (float& x : v.data()) x = x != 0.0f ? 1.0f : 0.0f;
  return v.with_kind(VolumeKind::BinaryMask);
}

void save_volume(const Volume& volume, const std::filesystem::path& path, std::optional<NiftiDatatype> datatype) {
  const Volume file_frame =
      volume.orientation().is_identity() ? volume : apply_orientation(volume, volume.orientation().inverse());

  NiftiDatatype dt;
  if (datatype) {
    dt = *datatype;
  } else if (volume.kind() == VolumeKind::BinaryMask) {
    dt = NiftiDatatype::UInt8;
  } else if (volume.kind() == VolumeKind::Logit) {
    dt = NiftiDatatype::Float32;
  } else {
    const auto d = file_frame.data();
    const bool integral = std::all_of(d.begin(), d.end(), [](float v) {
      return v == std::nearbyint(v) && v >= std::numeric_limits<std::int16_t>::min() &&
             v <= std::numeric_limits<std::int16_t>::max();
    });
    dt = integral ? NiftiDatatype::Int16 : NiftiDatatype::Float32;
  }

  unsigned char h[kSingleFileOffset] = {};
  put<std::int32_t>(h, 0, 348);
  put<std::int16_t>(h, 40, 3);
  for (std::size_t i = 0; i < 3; ++i) put<std::int16_t>(h, 42 + 2 * i, static_cast<std::int16_t>(file_frame.dims()[i]));
  for (std::size_t i = 3; i < 7; ++i) put<std::int16_t>(h, 42 + 2 * i, 1);
  put<std::int16_t>(h, 70, static_cast<std::int16_t>(dt));
  const std::int16_t bitpix = dt == NiftiDatatype::UInt8 ? 8 : dt == NiftiDatatype::Int16 ? 16 : 32;
  put<std::int16_t>(h, 72, bitpix);
  put<float>(h, 76, 1.0f);
  for (std::size_t i = 0; i < 3; ++i) put<float>(h, 80 + 4 * i, static_cast<float>(file_frame.spacing()[i]));
  put<float>(h, 108, static_cast<float>(kSingleFileOffset));
  put<float>(h, 112, 1.0f);
  put<float>(h, 116, 0.0f);
  h[123] = 2 | 8;  // mm, seconds
  put<std::int16_t>(h, 252, 0);
  put<std::int16_t>(h, 254, 1);
  const Affine& a = file_frame.affine();
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) put<float>(h, 280 + 16 * r + 4 * c, static_cast<float>(a[r * 4 + c]));
  }
  std::memcpy(h + 344, "n+1\0", 4);

  const auto src = file_frame.data();
  const std::size_t bpv = static_cast<std::size_t>(bitpix / 8);
  std::vector<unsigned char> raw(src.size() * bpv);
  for (std::size_t i = 0; i < src.size(); ++i) {
    switch (dt) {
      case NiftiDatatype::UInt8:
        raw[i] = static_cast<unsigned char>(std::clamp(std::nearbyint(src[i]), 0.0f, 255.0f));
        break;
      case NiftiDatatype::Int16:
        put<std::int16_t>(raw.data(), 2 * i, static_cast<std::int16_t>(std::clamp(std::nearbyint(src[i]), -32768.0f, 32767.0f)));
        break;
      case NiftiDatatype::Float32:
        put<float>(raw.data(), 4 * i, src[i]);
        break;
    }
  }

  GzFile file(path, is_gz(path) ? "wb6" : "wbT");
  if (!file.handle) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  write_exact(file.handle, h, sizeof h, path);
  write_exact(file.handle, raw.data(), raw.size(), path);
}

}  // namespace volprop
