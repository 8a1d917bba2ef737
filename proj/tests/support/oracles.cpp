#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

Volume random_mask(const Dims& dims, double density, std::mt19937_64& rng, const Spacing& spacing) {
  std::bernoulli_distribution coin(density);
  std::vector<float> data(dims[0] * dims[1] * dims[2]);
  for (auto& v : data) v = coin(rng) ? 1.0f : 0.0f;
  return Volume(dims, spacing, volprop::VolumeKind::BinaryMask, std::move(data));
}

Volume ball(const Dims& dims, std::array<double, 3> c, double r, const Spacing& spacing) {
  Volume m(dims, spacing, volprop::VolumeKind::BinaryMask);
  for (std::size_t z = 0; z < dims[2]; ++z)
    for (std::size_t y = 0; y < dims[1]; ++y)
      for (std::size_t x = 0; x < dims[0]; ++x) {
        const double dx = x - c[0], dy = y - c[1], dz = z - c[2];
        if (dx * dx + dy * dy + dz * dz <= r * r) m.at(x, y, z) = 1.0f;
      }
  return m;
}

namespace {

std::vector<std::array<std::size_t, 3>> points(const Volume& m) {
  std::vector<std::array<std::size_t, 3>> out;
  for (std::size_t z = 0; z < m.dims()[2]; ++z)
    for (std::size_t y = 0; y < m.dims()[1]; ++y)
      for (std::size_t x = 0; x < m.dims()[0]; ++x)
        if (m.at(x, y, z) > 0.5f) out.push_back({x, y, z});
  return out;
}

double directed(const std::vector<std::array<std::size_t, 3>>& from, const std::vector<std::array<std::size_t, 3>>& to,
                const Spacing& s) {
  double worst = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : to) {
      const double dx = (static_cast<double>(p[0]) - static_cast<double>(g[0])) * s[0];
      const double dy = (static_cast<double>(p[1]) - static_cast<double>(g[1])) * s[1];
      const double dz = (static_cast<double>(p[2]) - static_cast<double>(g[2])) * s[2];
      best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

double hausdorff_all_pairs(const Volume& a, const Volume& b) {
  const auto pa = points(a), pb = points(b);
  return std::max(directed(pa, pb, a.spacing()), directed(pb, pa, a.spacing()));
}

Counts set_counts(const Volume& a, const Volume& b) {
  Counts c;
  for (std::size_t i = 0; i < a.voxel_count(); ++i) {
    const bool x = a.data()[i] > 0.5f, y = b.data()[i] > 0.5f;
    c.a += x;
    c.b += y;
    c.both += x && y;
    c.either += x || y;
  }
  return c;
}

std::vector<std::vector<double>> cosine_matrix(const std::vector<std::vector<double>>& v) {
  std::vector<std::vector<double>> m(v.size(), std::vector<double>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t k = 0; k < v[i].size(); ++k) {
        dot += v[i][k] * v[j][k];
        ni += v[i][k] * v[i][k];
        nj += v[j][k] * v[j][k];
      }
      m[i][j] = dot / std::sqrt(ni * nj);
    }
  return m;
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

std::filesystem::path scratch_dir(const std::string& name) {
  static std::mt19937_64 rng(std::random_device{}());
  const auto dir = std::filesystem::temp_directory_path() /
                   ("volprop-" + name + "-" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
