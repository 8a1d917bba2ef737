#include <doctest.h>

#include <random>

#include "common/error.hpp"
#include "dataharness/phantom.hpp"
#include "prompts/prompts.hpp"
#include "support/oracles.hpp"

using namespace volprop;

namespace {

Volume slab(std::size_t first, std::size_t last, std::size_t depth = 12) {
  Volume m({4, 4, depth}, {1, 1, 1}, VolumeKind::BinaryMask);
  for (std::size_t z = first; z <= last; ++z) m.at(1, 2, z) = 1.0f;
  return m;
}

template <class F>
ErrorCode error_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("structure extent examples") {
  CHECK(structure_extent(slab(3, 9), Axis::Axial) == SliceExtent{3, 9});
  CHECK(structure_extent(slab(5, 5), Axis::Axial) == SliceExtent{5, 5});
  CHECK(structure_extent(slab(3, 9), Axis::Sagittal) == SliceExtent{1, 1});
  CHECK(structure_extent(slab(3, 9), Axis::Coronal) == SliceExtent{2, 2});
  CHECK(error_of([] { structure_extent(Volume({2, 2, 2}, {1, 1, 1}, VolumeKind::BinaryMask), Axis::Axial); }) ==
        ErrorCode::EmptyMask);
}

TEST_CASE("structure extent matches an exhaustive slice scan") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const Volume m = oracle::random_mask({6, 7, 8}, 0.01, rng);
    if (count_foreground(m) == 0) continue;
    for (Axis axis : kAllAxes) {
      const int dim = sweep_dim(axis);
      int first = -1, last = -1;
      for (std::size_t z = 0; z < m.dims()[2]; ++z)
        for (std::size_t y = 0; y < m.dims()[1]; ++y)
          for (std::size_t x = 0; x < m.dims()[0]; ++x) {
            if (m.at(x, y, z) < 0.5f) continue;
            const int s = static_cast<int>(Index3{x, y, z}[static_cast<std::size_t>(dim)]);
            if (first < 0 || s < first) first = s;
            last = std::max(last, s);
          }
      CHECK(structure_extent(m, axis) == SliceExtent{first, last});
    }
  }
}

TEST_CASE("prompt index examples") {
  CHECK(prompt_indices({0, 99}, PromptStrategy::fml()) == std::vector<int>{0, 49, 99});
  CHECK(prompt_indices({10, 10}, PromptStrategy::middle()) == std::vector<int>{10});
  CHECK(prompt_indices({0, 99}, PromptStrategy::first_last()) == std::vector<int>{0, 99});
  // Golden: round half away from zero.
  CHECK(prompt_indices({0, 99}, PromptStrategy::uniform(5)) == std::vector<int>{0, 25, 50, 74, 99});
  CHECK(prompt_indices({3, 9}, PromptStrategy::uniform(7)) == std::vector<int>{3, 4, 5, 6, 7, 8, 9});
  CHECK(error_of([] { prompt_indices({4, 5}, PromptStrategy::fml()); }) == ErrorCode::ExtentTooSmall);
  CHECK(error_of([] { prompt_indices({0, 5}, PromptStrategy::uniform(7)); }) == ErrorCode::ExtentTooSmall);
}

TEST_CASE("strategy text round trip") {
  for (const char* text : {"middle", "first-last", "fml", "uniform:5", "uniform:9"}) {
    CHECK(PromptStrategy::parse(text).to_string() == text);
  }
  CHECK(PromptStrategy::parse("uniform:7").nominal_count() == 7);
  CHECK_THROWS_AS(PromptStrategy::parse("uniform:1"), Error);
  CHECK_THROWS_AS(PromptStrategy::parse("corners"), Error);
}

TEST_CASE("simulated prompts carry the ground-truth slices") {
  const Volume gt = slab(2, 8);
  const PromptSet p = simulate_prompts(gt, Axis::Axial, PromptStrategy::fml());
  CHECK(p.indices() == std::vector<int>{2, 5, 8});
  for (const auto& e : p.entries) {
    CHECK(e.mask.at(1, 2) == 1.0f);
    CHECK(std::count(e.mask.pixels.begin(), e.mask.pixels.end(), 1.0f) == 1);
  }
  CHECK(p.find(5) != nullptr);
  CHECK(p.find(6) == nullptr);
}

TEST_CASE("three-axis allocation") {
  const Phantom ph = make_phantom(sphere_phantom_spec());
  const auto fml = allocate_three_axis(ph.mask, PromptStrategy::fml());
  std::size_t total = 0;
  for (const auto& [axis, set] : fml) {
    total += set.entries.size();
    CHECK(set.axis == axis);
    // Radius 10 about voxel 32: extremal slices 22 and 42 on every axis.
    CHECK(set.extent == SliceExtent{22, 42});
    CHECK(set.indices().front() == 22);
    CHECK(set.indices().back() == 42);
  }
  CHECK(fml.size() == 3);
  CHECK(total == 9);

  const auto middle = allocate_three_axis(ph.mask, PromptStrategy::middle());
  total = 0;
  for (const auto& [axis, set] : middle) total += set.entries.size();
  CHECK(total == 3);
}
