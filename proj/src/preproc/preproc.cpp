#include "preproc/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "common/error.hpp"

namespace volprop {

namespace {

Volume like(const Volume& src, std::vector<float> data) {
  Volume out(src.dims(), src.spacing(), VolumeKind::Intensity, std::move(data));
  out.set_orientation(src.orientation(), src.affine());
  return out;
}

}  // namespace

float window_value(float hu, const WindowSpec& w) noexcept {
  const double lo = w.level - w.width / 2.0;
  const double v = (static_cast<double>(hu) - lo) / w.width;
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

Volume hu_window(const Volume& volume, const WindowSpec& window) {
  if (!(window.width > 0.0)) fail(ErrorCode::InvalidArgument, "window width must be > 0", "window.width");
  if (volume.kind() != VolumeKind::Intensity) fail(ErrorCode::InvalidArgument, "windowing needs an intensity volume");
  std::vector<float> out(volume.voxel_count());
  const auto in = volume.data();
  std::transform(in.begin(), in.end(), out.begin(), [&](float v) { return window_value(v, window); });
  return like(volume, std::move(out));
}

Volume normalize_full_range(const Volume& volume) {
  const auto in = volume.data();
  const auto [mn, mx] = std::minmax_element(in.begin(), in.end());
  const double lo = *mn, range = static_cast<double>(*mx) - lo;
  std::vector<float> out(in.size(), 0.0f);
  if (range > 0.0) {
    std::transform(in.begin(), in.end(), out.begin(),
                   [&](float v) { return static_cast<float>((static_cast<double>(v) - lo) / range); });
  }
  return like(volume, std::move(out));
}

Slice clahe(const Slice& slice, double clip_limit, std::array<std::size_t, 2> tiles) {
  const std::size_t w = slice.width, h = slice.height;
  const std::size_t nx = tiles[0], ny = tiles[1];
  if (nx == 0 || ny == 0) fail(ErrorCode::InvalidArgument, "CLAHE needs at least one tile per direction");
  if (!(clip_limit > 0.0)) fail(ErrorCode::InvalidArgument, "CLAHE clip limit must be > 0", "clahe.clip");

  // Tile i spans [i*w/nx, (i+1)*w/nx).
  auto edge = [](std::size_t i, std::size_t n, std::size_t extent) { return i * extent / n; };
  for (std::size_t ty = 0; ty < ny; ++ty) {
    for (std::size_t tx = 0; tx < nx; ++tx) {
      const std::size_t tw = edge(tx + 1, nx, w) - edge(tx, nx, w);
      const std::size_t th = edge(ty + 1, ny, h) - edge(ty, ny, h);
      if (tw * th < 2) fail(ErrorCode::TileTooSmall, "CLAHE tile has fewer than 2 pixels");
    }
  }

  auto bin_of = [](float v) {
    const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
    return std::min<std::size_t>(kClaheBins - 1, static_cast<std::size_t>(c * kClaheBins));
  };

  // Per-tile lookup tables, mapping a bin to its normalized CDF value.
  std::vector<std::array<float, kClaheBins>> lut(nx * ny);
  for (std::size_t ty = 0; ty < ny; ++ty) {
    for (std::size_t tx = 0; tx < nx; ++tx) {
      std::array<double, kClaheBins> hist{};
      const std::size_t x0 = edge(tx, nx, w), x1 = edge(tx + 1, nx, w);
      const std::size_t y0 = edge(ty, ny, h), y1 = edge(ty + 1, ny, h);
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) hist[bin_of(slice.at(x, y))] += 1.0;
      }
      const double area = static_cast<double>((x1 - x0) * (y1 - y0));
      if (std::isfinite(clip_limit)) {
        const double limit = std::max(1.0, clip_limit * area / kClaheBins);
        double excess = 0.0;
        for (double& c : hist) {
          if (c > limit) {
            excess += c - limit;
            c = limit;
          }
        }
        const double share = excess / kClaheBins;
        for (double& c : hist) c += share;
      }
      auto& table = lut[ty * nx + tx];
      double cdf = 0.0;
      for (std::size_t b = 0; b < kClaheBins; ++b) {
        cdf += hist[b];
        table[b] = static_cast<float>(std::clamp(cdf / area, 0.0, 1.0));
      }
    }
  }

  // Tile centres in pixel coordinates.
  std::vector<double> cx(nx), cy(ny);
  for (std::size_t i = 0; i < nx; ++i) cx[i] = 0.5 * static_cast<double>(edge(i, nx, w) + edge(i + 1, nx, w)) - 0.5;
  for (std::size_t i = 0; i < ny; ++i) cy[i] = 0.5 * static_cast<double>(edge(i, ny, h) + edge(i + 1, ny, h)) - 0.5;

  auto bracket = [](const std::vector<double>& centres, double p, std::size_t& i0, std::size_t& i1, double& f) {
    const std::size_t n = centres.size();
    if (n == 1 || p <= centres.front()) {
      i0 = i1 = 0;
      f = 0.0;
      return;
    }
    if (p >= centres.back()) {
      i0 = i1 = n - 1;
      f = 0.0;
      return;
    }
    i1 = static_cast<std::size_t>(std::upper_bound(centres.begin(), centres.end(), p) - centres.begin());
    i0 = i1 - 1;
    f = (p - centres[i0]) / (centres[i1] - centres[i0]);
  };

  Slice out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    std::size_t ty0, ty1;
    double fy;
    bracket(cy, static_cast<double>(y), ty0, ty1, fy);
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t tx0, tx1;
      double fx;
      bracket(cx, static_cast<double>(x), tx0, tx1, fx);
      const std::size_t b = bin_of(slice.at(x, y));
      const double top = (1.0 - fx) * lut[ty0 * nx + tx0][b] + fx * lut[ty0 * nx + tx1][b];
      const double bottom = (1.0 - fx) * lut[ty1 * nx + tx0][b] + fx * lut[ty1 * nx + tx1][b];
      out.at(x, y) = static_cast<float>(std::clamp((1.0 - fy) * top + fy * bottom, 0.0, 1.0));
    }
  }
  return out;
}

Slice ThreeChannelSlice::channel(std::size_t c) const {
  Slice s;
  s.width = width;
  s.height = height;
  s.pixels = channels.at(c);
  return s;
}

ThreeChannelSlice to_three_channel(const Slice& slice) {
  ThreeChannelSlice out;
  out.width = slice.width;
  out.height = slice.height;
  out.channels.fill(slice.pixels);
  return out;
}

Volume preprocess_volume(const Volume& volume, const PreprocessSpec& spec) {
  return spec.window_enabled ? hu_window(volume, spec.window) : normalize_full_range(volume);
}

Slice preprocess_slice(const Slice& slice, const PreprocessSpec& spec) {
  if (!spec.clahe.enabled) return slice;
  return clahe(slice, spec.clahe.clip_limit, spec.clahe.tiles);
}

}  // namespace volprop
