#include "engine/synthetic_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>

#include "common/error.hpp"

namespace volprop {

namespace {

struct Embedding final : BackendFeature {
  Slice image;
};

struct MaskFeatures final : BackendFeature {
  std::vector<std::uint8_t> mask;
  std::size_t area = 0;
  double mean_intensity = 0.0;
};

struct Readout final : BackendFeature {
  std::vector<std::uint8_t> seed;
  std::size_t seed_area = 0;
  double seed_mean = 0.0;
  // Mean absolute image difference to each attended entry, in context order.
  std::vector<double> appearance_distance;
};

const Embedding& as_embedding(const FeatureHandle& h) {
  const auto* e = dynamic_cast<const Embedding*>(h.get());
  if (!e) fail(ErrorCode::BackendFailure, "embedding was not produced by the synthetic backend");
  return *e;
}

const MaskFeatures* as_mask_features(const FeatureHandle& h) {
  return dynamic_cast<const MaskFeatures*>(h.get());
}

}  // namespace

SyntheticBackend::SyntheticBackend(SyntheticBackendParams params) : params_(params) {
  if (params_.dilation_radius < 0) fail(ErrorCode::InvalidArgument, "dilation radius must be >= 0", "backend.dilation");
  if (!(params_.intensity_tolerance >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "intensity tolerance must be >= 0", "backend.tolerance");
  }
  if (params_.slot_count < 1) fail(ErrorCode::InvalidArgument, "slot count must be >= 1");
}

FeatureHandle SyntheticBackend::encode_slice(const ThreeChannelSlice& image) const {
  auto e = std::make_shared<Embedding>();
  e->image = image.channel(0);
  return e;
}

FeatureHandle SyntheticBackend::attend(const FeatureHandle& embedding, std::span<const MemoryEntry> context) const {
  const Embedding& current = as_embedding(embedding);
  const std::size_t n = current.image.size();
  auto r = std::make_shared<Readout>();
  r->seed.assign(n, 0);
  if (context.empty()) return r;

  int top_slot = std::numeric_limits<int>::max();
  for (const auto& entry : context) top_slot = std::min(top_slot, entry.embedding_slot);

  double weighted_mean = 0.0;
  std::size_t weight = 0;
  r->appearance_distance.reserve(context.size());
  for (const auto& entry : context) {
    const Embedding& past = as_embedding(entry.embedding);
    if (past.image.size() != n) fail(ErrorCode::BackendFailure, "memory entry has a different slice shape");
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff += std::abs(current.image.pixels[i] - past.image.pixels[i]);
    r->appearance_distance.push_back(diff / static_cast<double>(n));

    if (entry.embedding_slot != top_slot) continue;
    const MaskFeatures* mf = as_mask_features(entry.mask_features);
    if (!mf || mf->area == 0) continue;
    for (std::size_t i = 0; i < n; ++i) r->seed[i] |= mf->mask[i];
    weighted_mean += mf->mean_intensity * static_cast<double>(mf->area);
    weight += mf->area;
  }
  r->seed_area = static_cast<std::size_t>(std::count(r->seed.begin(), r->seed.end(), std::uint8_t{1}));
  r->seed_mean = weight > 0 ? weighted_mean / static_cast<double>(weight) : 0.0;
  return r;
}

DecodeOutput SyntheticBackend::decode(const FeatureHandle& embedding, const FeatureHandle& attended,
                                      const Slice* prompt) const {
  const Embedding& current = as_embedding(embedding);
  const std::size_t w = current.image.width, h = current.image.height;
  const float L = params_.logit_magnitude;
  DecodeOutput out{Slice(w, h, -L), 0.0};

  if (prompt) {
    if (prompt->width != w || prompt->height != h) fail(ErrorCode::BackendFailure, "prompt mask shape mismatch");
    for (std::size_t i = 0; i < prompt->size(); ++i) out.logits.pixels[i] = prompt->pixels[i] > 0.5f ? L : -L;
    out.confidence = 1.0;
    return out;
  }

  const auto* r = dynamic_cast<const Readout*>(attended.get());
  if (!r || r->seed_area == 0) return out;

  const int rad = params_.dilation_radius;
  std::vector<std::uint8_t> dilated(w * h, 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!r->seed[x + w * y]) continue;
      for (int dy = -rad; dy <= rad; ++dy) {
        for (int dx = -rad; dx <= rad; ++dx) {
          if (dx * dx + dy * dy > rad * rad) continue;
          const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
          if (xx < 0 || yy < 0 || xx >= static_cast<std::ptrdiff_t>(w) || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          dilated[static_cast<std::size_t>(xx) + w * static_cast<std::size_t>(yy)] = 1;
        }
      }
    }
  }

  std::size_t overlap = 0;
  for (std::size_t i = 0; i < w * h; ++i) {
    if (!dilated[i]) continue;
    if (std::abs(static_cast<double>(current.image.pixels[i]) - r->seed_mean) > params_.intensity_tolerance) continue;
    out.logits.pixels[i] = L;
    if (r->seed[i]) ++overlap;
  }
  out.confidence = static_cast<double>(overlap) / static_cast<double>(r->seed_area);
  return out;
}

FeatureHandle SyntheticBackend::encode_memory(const FeatureHandle& embedding, const Slice& logits) const {
  const Embedding& current = as_embedding(embedding);
  if (logits.size() != current.image.size()) fail(ErrorCode::BackendFailure, "logit slice shape mismatch");
  auto mf = std::make_shared<MaskFeatures>();
  mf->mask.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const bool on = logits.pixels[i] > 0.0f;
    mf->mask[i] = on ? 1 : 0;
    if (on) {
      ++mf->area;
      sum += current.image.pixels[i];
    }
  }
  mf->mean_intensity = mf->area > 0 ? sum / static_cast<double>(mf->area) : 0.0;
  return mf;
}

bool SyntheticBackend::save_embedding(const FeatureHandle& embedding, std::ostream& out) const {
  const Embedding& e = as_embedding(embedding);
  const std::uint64_t dims[2] = {e.image.width, e.image.height};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(e.image.pixels.data()),
            static_cast<std::streamsize>(e.image.pixels.size() * sizeof(float)));
  return static_cast<bool>(out);
}

FeatureHandle SyntheticBackend::load_embedding(std::istream& in) const {
  std::uint64_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) return nullptr;
  auto e = std::make_shared<Embedding>();
  e->image = Slice(dims[0], dims[1]);
  if (!in.read(reinterpret_cast<char*>(e->image.pixels.data()),
               static_cast<std::streamsize>(e->image.pixels.size() * sizeof(float)))) {
    return nullptr;
  }
  return e;
}

std::string SyntheticBackend::cache_tag() const { return "synthetic-v1"; }

std::unique_ptr<SegmentationBackend> synthetic_backend(SyntheticBackendParams params) {
  return std::make_unique<SyntheticBackend>(params);
}

}  // namespace volprop
