#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "common/error.hpp"
#include "preproc/preproc.hpp"

using namespace volprop;

namespace {

// Plain histogram equalization over 256 bins: each pixel maps to the
// fraction of pixels in its bin or below.
Slice equalize(const Slice& s) {
  auto bin = [](float v) { return std::min(255, static_cast<int>(std::clamp(v, 0.0f, 1.0f) * 256.0)); };
  Slice out(s.width, s.height);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t below = 0;
    for (float q : s.pixels) below += bin(q) <= bin(s.pixels[i]);
    out.pixels[i] = static_cast<float>(static_cast<double>(below) / static_cast<double>(s.size()));
  }
  return out;
}

Slice random_slice(std::size_t w, std::size_t h, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Slice s(w, h);
  for (auto& p : s.pixels) p = u(rng);
  return s;
}

}  // namespace

TEST_CASE("bone window endpoints and centre") {
  const WindowSpec w{400.0, 1800.0};
  CHECK(window_value(-500.0f, w) == 0.0f);
  CHECK(window_value(1300.0f, w) == 1.0f);
  CHECK(window_value(400.0f, w) == doctest::Approx(0.5));
  CHECK(window_value(-3000.0f, w) == 0.0f);
  CHECK(window_value(3000.0f, w) == 1.0f);
}

TEST_CASE("windowing a random volume matches the formula and keeps order") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<float> hu(-1500.0f, 2500.0f);
  Volume v({7, 5, 3}, {1, 1, 1}, VolumeKind::Intensity);
  for (auto& x : v.data()) x = hu(rng);
  const WindowSpec w{400.0, 1800.0};
  const Volume out = hu_window(v, w);
  CHECK(out.dims() == v.dims());
  for (std::size_t i = 0; i < v.voxel_count(); ++i) {
    const double expect = std::clamp((v.data()[i] - (400.0 - 900.0)) / 1800.0, 0.0, 1.0);
    CHECK(out.data()[i] == doctest::Approx(expect).epsilon(1e-6));
    for (std::size_t j = 0; j < v.voxel_count(); ++j) {
      if (v.data()[i] < v.data()[j]) CHECK(out.data()[i] <= out.data()[j]);
    }
  }
}

TEST_CASE("full-range normalization") {
  Volume v({3, 1, 1}, {1, 1, 1}, VolumeKind::Intensity, {-10.0f, 0.0f, 30.0f});
  const Volume n = normalize_full_range(v);
  CHECK(n.data()[0] == 0.0f);
  CHECK(n.data()[1] == doctest::Approx(0.25));
  CHECK(n.data()[2] == 1.0f);
  Volume flat({2, 2, 1}, {1, 1, 1}, VolumeKind::Intensity, {5, 5, 5, 5});
  const Volume nf = normalize_full_range(flat);
  for (float x : nf.data()) CHECK(x == 0.0f);

  PreprocessSpec spec;
  spec.window_enabled = false;
  const Volume p = preprocess_volume(v, spec);
  CHECK(std::equal(p.data().begin(), p.data().end(), n.data().begin()));
}

TEST_CASE("CLAHE on a constant slice is constant") {
  const Slice s(16, 12, 0.37f);
  const Slice out = clahe(s, 2.0, {4, 3});
  for (float p : out.pixels) CHECK(p == out.pixels[0]);
}

TEST_CASE("CLAHE with one tile and no clipping is histogram equalization") {
  std::mt19937 rng(5);
  const Slice s = random_slice(23, 17, rng);
  const Slice out = clahe(s, std::numeric_limits<double>::infinity(), {1, 1});
  const Slice expect = equalize(s);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(out.pixels[i] == doctest::Approx(expect.pixels[i]).epsilon(1e-6));
}

// Rank order holds among pixels mapped through one tile's table alone: with
// 2x2 tiles on 20x20 those are the corner blocks outside the tile centres.
TEST_CASE("CLAHE on a checkerboard stays in range and keeps per-tile rank order") {
  std::mt19937 rng(6);
  std::uniform_real_distribution<float> jitter(0.0f, 0.2f);
  Slice s(20, 20);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 20; ++x) s.at(x, y) = ((x + y) % 2 ? 0.75f : 0.05f) + jitter(rng);
  const Slice out = clahe(s, 2.0, {2, 2});
  for (float p : out.pixels) {
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
  for (std::size_t ty = 0; ty < 2; ++ty)
    for (std::size_t tx = 0; tx < 2; ++tx) {
      std::vector<std::pair<float, float>> px;
      const std::size_t y0 = ty ? 15 : 0, x0 = tx ? 15 : 0;
      for (std::size_t y = y0; y < y0 + 5; ++y)
        for (std::size_t x = x0; x < x0 + 5; ++x) px.emplace_back(s.at(x, y), out.at(x, y));
      for (const auto& a : px)
        for (const auto& b : px) {
          if (a.first < b.first) CHECK(a.second <= b.second);
        }
    }
}

TEST_CASE("CLAHE argument errors") {
  const Slice s(4, 4, 0.5f);
  try {
    clahe(s, 2.0, {4, 4});
    FAIL("expected TileTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TileTooSmall);
  }
  CHECK_THROWS_AS(clahe(s, 0.0, {1, 1}), Error);
  CHECK_THROWS_AS(clahe(s, 2.0, {0, 1}), Error);
}

TEST_CASE("three-channel replication") {
  const Slice one(1, 1, 0.3f);
  const auto t = to_three_channel(one);
  for (const auto& c : t.channels) CHECK(c == std::vector<float>{0.3f});

  std::mt19937 rng(7);
  const Slice s = random_slice(9, 4, rng);
  const auto r = to_three_channel(s);
  CHECK(r.channels[0] == r.channels[1]);
  CHECK(r.channels[1] == r.channels[2]);
  CHECK(r.channel(0) == s);
}

TEST_CASE("slice preprocessing only runs CLAHE when enabled") {
  std::mt19937 rng(8);
  const Slice s = random_slice(16, 16, rng);
  PreprocessSpec spec;
  CHECK(preprocess_slice(s, spec) == s);
  spec.clahe.enabled = true;
  spec.clahe.tiles = {2, 2};
  CHECK(preprocess_slice(s, spec) == clahe(s, spec.clahe.clip_limit, {2, 2}));
}
