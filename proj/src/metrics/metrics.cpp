#include "metrics/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "common/error.hpp"

namespace volprop {

namespace {

void require_same_grid(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims()) fail(ErrorCode::DimensionMismatch, "masks have different dimensions");
}

bool fg(float v) noexcept { return v > 0.5f; }

std::vector<Index3> foreground_voxels(const Volume& mask) {
  std::vector<Index3> out;
  const auto& d = mask.dims();
  const auto data = mask.data();
  std::size_t i = 0;
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x, ++i) {
        if (fg(data[i])) out.push_back({x, y, z});
      }
    }
  }
  return out;
}

// Squared distance in mm between voxel centres. Every code path that
// compares distances goes through this one expression.
double squared_mm(const Index3& a, const Index3& b, const Spacing& s) noexcept {
  const double dx = (static_cast<double>(a[0]) - static_cast<double>(b[0])) * s[0];
  const double dy = (static_cast<double>(a[1]) - static_cast<double>(b[1])) * s[1];
  const double dz = (static_cast<double>(a[2]) - static_cast<double>(b[2])) * s[2];
  return dx * dx + dy * dy + dz * dz;
}

// Static 3-d tree over voxel indices for exact nearest-neighbour queries.
class KdTree {
 public:
  KdTree(std::vector<Index3> points, const Spacing& spacing) : pts_(std::move(points)), s_(spacing) {
    build(0, pts_.size(), 0);
  }

  double nearest_squared(const Index3& q) const {
    double best = std::numeric_limits<double>::infinity();
    search(q, 0, pts_.size(), 0, best);
    return best;
  }

 private:
  void build(std::size_t lo, std::size_t hi, int depth) {
    if (hi - lo <= 1) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const int axis = depth % 3;
    std::nth_element(pts_.begin() + static_cast<std::ptrdiff_t>(lo), pts_.begin() + static_cast<std::ptrdiff_t>(mid),
                     pts_.begin() + static_cast<std::ptrdiff_t>(hi),
                     [axis](const Index3& a, const Index3& b) { return a[axis] < b[axis]; });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void search(const Index3& q, std::size_t lo, std::size_t hi, int depth, double& best) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const int axis = depth % 3;
    const Index3& p = pts_[mid];
    best = std::min(best, squared_mm(q, p, s_));
    const bool left_first = q[axis] < p[axis];
    if (left_first) {
      search(q, lo, mid, depth + 1, best);
    } else {
      search(q, mid + 1, hi, depth + 1, best);
    }
    // Points across the plane differ from q by at least this much along `axis`,
    // and their squared distance is never smaller than the single term.
    const double gap = static_cast<double>(left_first ? p[axis] - q[axis] : q[axis] - p[axis]) * s_[axis];
    if (gap * gap >= best) return;
    if (left_first) {
      search(q, mid + 1, hi, depth + 1, best);
    } else {
      search(q, lo, mid, depth + 1, best);
    }
  }

  std::vector<Index3> pts_;
  Spacing s_;
};

// Squared distance from every foreground voxel of `from` to the foreground
// of `to`. The nearest voxel of `to` to any outside point lies on its surface.
std::vector<double> directed_squared(const std::vector<Index3>& from, const Volume& to) {
  const KdTree tree(surface_voxels(to), to.spacing());
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& p : from) out.push_back(fg(to.at(p[0], p[1], p[2])) ? 0.0 : tree.nearest_squared(p));
  return out;
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, values.size() - 1);
  return values[i] + (pos - static_cast<double>(i)) * (values[j] - values[i]);
}

}  // namespace

OverlapCounts overlap_counts(const Volume& pred, const Volume& truth) {
  require_same_grid(pred, truth);
  OverlapCounts c;
  const auto p = pred.data();
  const auto g = truth.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = fg(p[i]), b = fg(g[i]);
    c.pred += a;
    c.truth += b;
    c.intersection += a && b;
  }
  return c;
}

double dice(const Volume& pred, const Volume& truth) {
  const auto c = overlap_counts(pred, truth);
  if (c.pred + c.truth == 0) fail(ErrorCode::BothEmpty, "Dice is undefined for two empty masks");
  return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.pred + c.truth);
}

double iou(const Volume& pred, const Volume& truth) {
  const auto c = overlap_counts(pred, truth);
  const std::size_t uni = c.pred + c.truth - c.intersection;
  if (uni == 0) fail(ErrorCode::BothEmpty, "IoU is undefined for two empty masks");
  return static_cast<double>(c.intersection) / static_cast<double>(uni);
}

std::vector<Index3> surface_voxels(const Volume& mask) {
  std::vector<Index3> out;
  const auto& d = mask.dims();
  auto inside = [&](std::size_t x, std::size_t y, std::size_t z, int ax, int step) {
    Index3 n{x, y, z};
    const auto a = static_cast<std::size_t>(ax);
    if (step < 0 && n[a] == 0) return false;
    if (step > 0 && n[a] + 1 >= d[a]) return false;
    n[a] = step < 0 ? n[a] - 1 : n[a] + 1;
    return fg(mask.at(n[0], n[1], n[2]));
  };
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (!fg(mask.at(x, y, z))) continue;
        bool interior = true;
        for (int ax = 0; ax < 3 && interior; ++ax) {
          interior = inside(x, y, z, ax, -1) && inside(x, y, z, ax, +1);
        }
        if (!interior) out.push_back({x, y, z});
      }
    }
  }
  return out;
}

double hausdorff_mm(const Volume& pred, const Volume& truth) {
  require_same_grid(pred, truth);
  if (pred.spacing() != truth.spacing()) fail(ErrorCode::DimensionMismatch, "masks have different spacing");
  const auto p = foreground_voxels(pred);
  const auto g = foreground_voxels(truth);
  if (p.empty() || g.empty()) fail(ErrorCode::EitherEmpty, "Hausdorff distance needs two nonempty masks");
  double worst = 0.0;
  for (double d : directed_squared(p, truth)) worst = std::max(worst, d);
  for (double d : directed_squared(g, pred)) worst = std::max(worst, d);
  return std::sqrt(worst);
}

double hausdorff_quantile_mm(const Volume& pred, const Volume& truth, double q) {
  require_same_grid(pred, truth);
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::InvalidArgument, "quantile must lie in [0, 1]");
  const auto ps = surface_voxels(pred);
  const auto gs = surface_voxels(truth);
  if (ps.empty() || gs.empty()) fail(ErrorCode::EitherEmpty, "Hausdorff distance needs two nonempty masks");
  auto dist = [](std::vector<double> sq) {
    for (double& v : sq) v = std::sqrt(v);
    return sq;
  };
  return std::max(quantile(dist(directed_squared(ps, truth)), q), quantile(dist(directed_squared(gs, pred)), q));
}

std::vector<std::vector<double>> cosine_similarity_matrix(std::span<const std::vector<double>> vectors) {
  const std::size_t n = vectors.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].size() != vectors[0].size()) fail(ErrorCode::InvalidArgument, "vectors differ in length");
    double sq = 0.0;
    for (double v : vectors[i]) sq += v * v;
    norms[i] = std::sqrt(sq);
    if (norms[i] == 0.0) fail(ErrorCode::ZeroVector, "vector " + std::to_string(i) + " has zero norm");
  }
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) dot += vectors[i][k] * vectors[j][k];
      m[i][j] = m[j][i] = dot / (norms[i] * norms[j]);
    }
  }
  return m;
}

MetricsRecord evaluate(const Volume& pred, const Volume& truth, const MetricOptions& options) {
  const auto c = overlap_counts(pred, truth);
  if (c.truth == 0) fail(ErrorCode::EmptyMask, "ground truth is empty");
  MetricsRecord r;
  r.dice = dice(pred, truth);
  r.iou = iou(pred, truth);
  if (c.pred > 0) {
    r.hausdorff_mm = hausdorff_mm(pred, truth);
    if (options.hd95) r.hd95_mm = hausdorff_quantile_mm(pred, truth, 0.95);
  }
  return r;
}

Stat describe(std::span<const double> values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(s.n));
  return s;
}

namespace {

ClassSummary summarize_class(std::string name, const std::vector<const MetricsRecord*>& records) {
  ClassSummary c;
  c.structure = std::move(name);
  c.count = records.size();
  std::vector<double> d, j, h;
  for (const auto* r : records) {
    d.push_back(r->dice);
    j.push_back(r->iou);
    if (r->hausdorff_mm) {
      h.push_back(*r->hausdorff_mm);
    } else {
      ++c.hd_excluded;
    }
  }
  c.dice = describe(d);
  c.iou = describe(j);
  c.hausdorff_mm = describe(h);
  return c;
}

}  // namespace

AggregateTable aggregate(std::span<const MetricsRecord> records) {
  std::map<std::string, std::vector<const MetricsRecord*>> by_class;
  std::vector<const MetricsRecord*> all;
  for (const auto& r : records) {
    by_class[r.structure].push_back(&r);
    all.push_back(&r);
  }
  AggregateTable t;
  for (const auto& [name, rs] : by_class) t.classes.push_back(summarize_class(name, rs));
  t.overall = summarize_class("all", all);
  return t;
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_records_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path, bool hd95) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "config_id,case_id,structure,dice,iou,hausdorff_mm" << (hd95 ? ",hd95_mm" : "") << "\n";
  for (const auto& r : records) {
    out << r.config_id << ',' << r.case_id << ',' << r.structure << ',' << format_number(r.dice) << ','
        << format_number(r.iou) << ',' << (r.hausdorff_mm ? format_number(*r.hausdorff_mm) : "");
    if (hd95) out << ',' << (r.hd95_mm ? format_number(*r.hd95_mm) : "");
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoFailure, "failed writing " + path.string());
}

}  // namespace volprop
