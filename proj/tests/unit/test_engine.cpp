#include <doctest.h>

#include <cmath>
#include <fstream>

#include "common/error.hpp"
#include "dataharness/phantom.hpp"
#include "engine/onnx_backend.hpp"
#include "engine/onnx_model.hpp"
#include "engine/propagate.hpp"
#include "engine/synthetic_backend.hpp"
#include "metrics/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace volprop;
namespace fs = std::filesystem;

namespace {

template <class F>
ErrorCode error_of(F f, std::string* subject = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (subject) *subject = e.subject();
    return e.code();
  }
  return ErrorCode{};
}

Slice mask_logits(const Slice& mask, float l = 8.0f) {
  Slice out(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.size(); ++i) out.pixels[i] = mask.pixels[i] > 0.5f ? l : -l;
  return out;
}

struct Prepared {
  Phantom phantom;
  std::shared_ptr<const Volume> image;
};

Prepared prepare(const PhantomSpec& spec) {
  Phantom ph = make_phantom(spec);
  auto image = std::make_shared<const Volume>(preprocess_volume(ph.image, {}));
  return {std::move(ph), std::move(image)};
}

}  // namespace

TEST_CASE("synthetic backend echoes a prompt") {
  const SyntheticBackend b;
  Slice img(6, 5, 0.2f);
  Slice prompt(6, 5);
  prompt.at(2, 2) = prompt.at(3, 2) = 1.0f;
  const auto emb = b.encode_slice(to_three_channel(img));
  const SegmentOutput out = b.segment(emb, {}, &prompt);
  CHECK(out.confidence == 1.0);
  CHECK(out.logits == mask_logits(prompt));
}

TEST_CASE("synthetic backend with no context is all negative") {
  const SyntheticBackend b;
  const auto emb = b.encode_slice(to_three_channel(Slice(4, 4, 0.5f)));
  const SegmentOutput out = b.segment(emb, {}, nullptr);
  CHECK(out.confidence == 0.0);
  for (float v : out.logits.pixels) CHECK(v == -8.0f);
}

TEST_CASE("synthetic backend segments only the seeded blob") {
  // Two equal-intensity discs further apart than twice the dilation radius.
  const SyntheticBackend b;
  Slice img(40, 20, 0.0f), seed(40, 20), blob_a(40, 20);
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 40; ++x) {
      const double da = std::hypot(x - 8.0, y - 10.0), db = std::hypot(x - 30.0, y - 10.0);
      if (da <= 5.0 || db <= 5.0) img.at(x, y) = 0.8f;
      if (da <= 5.0) blob_a.at(x, y) = 1.0f;
      if (da <= 3.0) seed.at(x, y) = 1.0f;
    }
  const auto emb = b.encode_slice(to_three_channel(img));
  const MemoryEntry past{0, emb, b.encode_memory(emb, mask_logits(seed)), false, 1.0, 0};
  const SegmentOutput out = b.segment(emb, std::span(&past, 1), nullptr);
  // Expected: blob pixels within distance 2 of some seed pixel.
  for (std::size_t i = 0; i < img.size(); ++i) {
    bool near = false;
    for (std::size_t j = 0; j < seed.size(); ++j) {
      const double dx = double(i % 40) - double(j % 40), dy = double(i / 40) - double(j / 40);
      near = near || (seed.pixels[j] > 0.5f && dx * dx + dy * dy <= 4.0);
    }
    CHECK((out.logits.pixels[i] > 0.0f) == (near && blob_a.pixels[i] > 0.5f));
  }
  CHECK(out.confidence == 1.0);
}

TEST_CASE("forward pass tracks an analytic sphere slice by slice") {
  const auto [ph, image] = prepare(sphere_phantom_spec());
  const Volume analytic = oracle::ball({64, 64, 64}, {32, 32, 32}, 10.0);
  const SyntheticBackend b;
  for (Axis axis : kAllAxes) {
    const SliceSequence seq = reslice(image, axis);
    const auto emb = encode_sequence(seq, {}, b);
    const PromptSet prompts = simulate_prompts(ph.mask, axis, PromptStrategy::fml());
    const LogitVolume run = propagate_axis(seq, emb, prompts, {}, b, Direction::Forward);
    const Volume pred = threshold_logits(reorient_to_reference(run, *image), *image);
    // The pass starts at the first prompt, which is the sphere's first slice.
    CHECK(dice(pred, analytic) == 1.0);
  }
}

TEST_CASE("single-slice structure, prompt on that slice") {
  Volume gt({8, 8, 5}, {1, 1, 1}, VolumeKind::BinaryMask);
  gt.at(3, 4, 2) = gt.at(4, 4, 2) = gt.at(4, 5, 2) = 1.0f;
  Volume ct({8, 8, 5}, {1, 1, 1}, VolumeKind::Intensity);
  for (std::size_t i = 0; i < ct.voxel_count(); ++i) ct.data()[i] = gt.data()[i] > 0 ? 1000.0f : -1000.0f;
  auto image = std::make_shared<const Volume>(preprocess_volume(ct, {}));
  SegmentRequest req;
  req.strategy = PromptStrategy::middle();
  const SyntheticBackend b;
  const SegmentResult r = segment_structure(image, gt, req, b);
  CHECK(std::equal(r.mask.data().begin(), r.mask.data().end(), gt.data().begin()));
}

TEST_CASE("pass coverage and trace") {
  const auto [ph, image] = prepare(sphere_phantom_spec());
  const SyntheticBackend b;
  const SliceSequence seq = reslice(image, Axis::Axial);
  const auto emb = encode_sequence(seq, {}, b);
  const PromptSet prompts = simulate_prompts(ph.mask, Axis::Axial, PromptStrategy::fml());
  REQUIRE(prompts.indices() == std::vector<int>{22, 32, 42});

  SUBCASE("forward from the first prompt to the extent end") {
    PassTrace trace;
    const LogitVolume run = propagate_axis(seq, emb, prompts, {}, b, Direction::Forward, nullptr, &trace);
    REQUIRE(trace.steps.size() == 21);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) CHECK(trace.steps[i].slice_index == 22 + static_cast<int>(i));
    for (std::size_t t = 0; t < 64; ++t) CHECK(run.produced[t] == (t >= 22 && t <= 42));
    const auto& s = trace.steps[30 - 22];
    CHECK(s.context_slices == std::vector<int>{22, 32, 42, 29, 28, 27, 26, 25, 24});
    CHECK(s.context_slots == std::vector<int>{0, 0, 0, 0, 1, 2, 3, 4, 5});
  }
  SUBCASE("backward runs downwards from the last prompt") {
    PassTrace trace;
    propagate_axis(seq, emb, prompts, {}, b, Direction::Backward, nullptr, &trace);
    REQUIRE(trace.steps.size() == 21);
    CHECK(trace.steps.front().slice_index == 42);
    CHECK(trace.steps.back().slice_index == 22);
    const auto& s = trace.steps[42 - 40];
    CHECK(s.context_slices == std::vector<int>{22, 32, 42, 41});
  }
  SUBCASE("intelligent slicing uses the first and last slots") {
    MemoryPolicy is;
    is.intelligent_slicing = true;
    is.tau = 0.1;
    PassTrace trace;
    propagate_axis(seq, emb, prompts, is, b, Direction::Forward, nullptr, &trace);
    for (const auto& s : trace.steps) {
      if (s.prompted) continue;
      std::size_t noncond = 0;
      for (std::size_t i = 0; i < s.context_slices.size(); ++i) {
        const bool is_prompt = s.context_slices[i] == 22 || s.context_slices[i] == 32 || s.context_slices[i] == 42;
        if (is_prompt) continue;
        ++noncond;
        CHECK((s.context_slots[i] == 0 || s.context_slots[i] == b.slot_count() - 1));
      }
      CHECK(noncond <= 2);
    }
  }
  SUBCASE("no prompts") {
    PromptSet none = prompts;
    none.entries.clear();
    CHECK(error_of([&] { propagate_axis(seq, emb, none, {}, b, Direction::Forward); }) == ErrorCode::EmptyPrompts);
  }
}

TEST_CASE("forward-backward is the mean of separately run passes") {
  PhantomSpec spec = two_sphere_phantom_spec();
  spec.target.center = {21.0, 25.0, 15.5};
  const auto [ph, image] = prepare(spec);
  const SyntheticBackend b;
  MemoryPolicy policy;
  policy.tau = 0.4;
  const SliceSequence seq = reslice(image, Axis::Axial);
  const auto emb = encode_sequence(seq, {}, b);
  const PromptSet prompts = simulate_prompts(ph.mask, Axis::Axial, PromptStrategy::fml());
  const LogitVolume f = propagate_axis(seq, emb, prompts, policy, b, Direction::Forward);
  const LogitVolume k = propagate_axis(seq, emb, prompts, policy, b, Direction::Backward);
  const LogitVolume fb = run_forward_backward(seq, emb, prompts, policy, b);
  for (std::size_t i = 0; i < fb.logits.size(); ++i) {
    const std::size_t t = i / (seq.width() * seq.height());
    float expect = 0.0f;
    if (f.produced[t] && k.produced[t]) expect = 0.5f * (f.logits[i] + k.logits[i]);
    else if (f.produced[t]) expect = f.logits[i];
    else if (k.produced[t]) expect = k.logits[i];
    CHECK(fb.logits[i] == expect);
  }
}

TEST_CASE("forward-backward with a single first-slice prompt equals forward") {
  const auto [ph, image] = prepare(sphere_phantom_spec());
  const SyntheticBackend b;
  const SliceSequence seq = reslice(image, Axis::Axial);
  const auto emb = encode_sequence(seq, {}, b);
  PromptSet prompts = simulate_prompts(ph.mask, Axis::Axial, PromptStrategy::first_last());
  prompts.entries.pop_back();
  const LogitVolume f = propagate_axis(seq, emb, prompts, {}, b, Direction::Forward);
  const LogitVolume fb = run_forward_backward(seq, emb, prompts, {}, b);
  CHECK(fb.logits == f.logits);
}

TEST_CASE("symmetric phantom: both directions agree on the middle slice") {
  const auto [ph, image] = prepare(sphere_phantom_spec());
  const SyntheticBackend b;
  const SliceSequence seq = reslice(image, Axis::Axial);
  const auto emb = encode_sequence(seq, {}, b);
  // Prompts at 22 and 42 only, so slice 32 is produced by tracking.
  const PromptSet prompts = simulate_prompts(ph.mask, Axis::Axial, PromptStrategy::first_last());
  const LogitVolume f = propagate_axis(seq, emb, prompts, {}, b, Direction::Forward);
  const LogitVolume k = propagate_axis(seq, emb, prompts, {}, b, Direction::Backward);
  const LogitVolume fb = merge_bidirectional(f, k);
  CHECK(f.slice(32) == k.slice(32));
  CHECK(fb.slice(32) == f.slice(32));
}

TEST_CASE("fusion arithmetic") {
  CHECK(fuse_logits(0, 0, 0) == 0.5);
  CHECK(fuse_logits(2, -1, -1) == 0.5);
  CHECK(fuse_logits(3, 1, -2) == fuse_logits(-2, 3, 1));
  CHECK(fuse_logits(1e30f, 1e30f, 1e30f) < 1.0);
  CHECK(fuse_logits(-1e30f, -1e30f, -1e30f) > 0.0);
  CHECK(fuse_logits(1, 2, 3) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));

  const Volume ref({3, 4, 2}, {1, 1, 1}, VolumeKind::Intensity);
  auto zeros = [&](Axis a) { return LogitVolume::zeros(a, run_dims(a, ref.dims())); };
  const FusionResult z = fuse_three_axis(zeros(Axis::Axial), zeros(Axis::Coronal), zeros(Axis::Sagittal), ref);
  for (double p : z.probability) CHECK(p == 0.5);
  CHECK(count_foreground(z.mask) == 0);

  LogitVolume a = zeros(Axis::Axial), c = zeros(Axis::Coronal), s = zeros(Axis::Sagittal);
  std::fill(a.logits.begin(), a.logits.end(), 2.0f);
  std::fill(c.logits.begin(), c.logits.end(), -1.0f);
  std::fill(s.logits.begin(), s.logits.end(), -1.0f);
  const FusionResult r = fuse_three_axis(a, c, s, ref);
  for (double p : r.probability) CHECK(p == 0.5);
  CHECK(count_foreground(r.mask) == 0);
}

TEST_CASE("three-axis segmentation keeps per-axis logits in the reference frame") {
  const auto [ph, image] = prepare(sphere_phantom_spec());
  SegmentRequest req;
  req.mode = PropagationMode::ThreeAxis;
  const SyntheticBackend b;
  const SegmentResult r = segment_structure(image, ph.mask, req, b);
  REQUIRE(r.axis_logits.size() == 3);
  for (const auto& [axis, l] : r.axis_logits) {
    CHECK(l.reference_frame);
    CHECK(l.axis == axis);
    CHECK(l.dims == image->dims());
  }
  CHECK(r.probability.size() == image->voxel_count());
  CHECK(dice(r.mask, ph.mask) >= 0.95);
}

TEST_CASE("embedding cache reuses stored embeddings") {
  const auto dir = oracle::scratch_dir("cache");
  const auto [ph, image] = prepare(sphere_phantom_spec());
  const SyntheticBackend b;
  const EmbeddingCache cache(dir / "emb");
  const SliceSequence seq = reslice(image, Axis::Axial);
  const auto first = encode_sequence(seq, {}, b, nullptr, &cache);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "emb")) ++files;
  CHECK(files > 0);
  CHECK(files <= seq.length());
  const auto second = encode_sequence(seq, {}, b, nullptr, &cache);
  const PromptSet prompts = simulate_prompts(ph.mask, Axis::Axial, PromptStrategy::fml());
  CHECK(propagate_axis(seq, first, prompts, {}, b, Direction::Forward).logits ==
        propagate_axis(seq, second, prompts, {}, b, Direction::Forward).logits);

  // A corrupt entry is re-encoded instead of failing.
  for (const auto& e : fs::directory_iterator(dir / "emb")) std::ofstream(e.path(), std::ios::trunc) << "junk";
  const auto third = encode_sequence(seq, {}, b, nullptr, &cache);
  CHECK(propagate_axis(seq, third, prompts, {}, b, Direction::Forward).logits ==
        propagate_axis(seq, first, prompts, {}, b, Direction::Forward).logits);
  fs::remove_all(dir);
}

TEST_CASE("propagation mode names") {
  for (auto m : {PropagationMode::Forward, PropagationMode::ForwardBackward, PropagationMode::ThreeAxis}) {
    CHECK(parse_propagation_mode(to_string(m)) == m);
  }
  std::string subject;
  CHECK(error_of([] { parse_propagation_mode("sideways"); }, &subject) == ErrorCode::ConfigInvalid);
  CHECK(subject == "propagation");
}

TEST_CASE("onnx interface encode and parse round trip") {
  OnnxModelInfo info;
  info.inputs.push_back({"image", 1, std::vector<OnnxDim>{{1, ""}, {3, ""}, {std::nullopt, "R"}, {1024, ""}}});
  info.inputs.push_back({"memory_slots", 7, std::nullopt});
  info.outputs.push_back({"logits", 1, std::vector<OnnxDim>{}});
  info.metadata["num_maskmem"] = "7";
  const OnnxModelInfo back = parse_onnx_model(encode_onnx_interface(info));
  REQUIRE(back.inputs.size() == 2);
  CHECK(back.inputs[0].name == "image");
  CHECK(back.inputs[0].elem_type == 1);
  REQUIRE(back.inputs[0].shape);
  CHECK(back.inputs[0].shape->size() == 4);
  CHECK(back.inputs[0].shape->at(2).param == "R");
  CHECK_FALSE(back.inputs[0].shape->at(2).value);
  CHECK(back.inputs[0].shape->at(3).value == 1024);
  CHECK_FALSE(back.inputs[1].shape);
  CHECK(back.find_output("logits") != nullptr);
  CHECK(back.metadata.at("num_maskmem") == "7");
  CHECK(error_of([] { parse_onnx_model("\x0a\xff\xff"); }) == ErrorCode::MalformedHeader);
}

TEST_CASE("onnx graph validation") {
  const auto dir = oracle::scratch_dir("onnx");
  std::string subject;
  CHECK(error_of([&] { inspect_onnx_graphs(dir / "absent"); }) == ErrorCode::MissingGraph);

  fixture::write_onnx_graphs(dir / "good", 512);
  const OnnxGraphSet set = inspect_onnx_graphs(dir / "good");
  CHECK(set.input_resolution == 512);
  CHECK(set.slot_count == 7);

  fixture::write_onnx_graphs(dir / "partial");
  fs::remove(dir / "partial" / "memory_encoder.onnx");
  CHECK(error_of([&] { inspect_onnx_graphs(dir / "partial"); }, &subject) == ErrorCode::MissingGraph);
  CHECK(subject == "memory_encoder.onnx");

  fixture::write_onnx_graphs(dir / "rank", 1024, [](const std::string& role, OnnxModelInfo& m) {
    if (role == "memory_decoder") m.inputs[1].shape->pop_back();
  });
  CHECK(error_of([&] { inspect_onnx_graphs(dir / "rank"); }, &subject) == ErrorCode::SignatureMismatch);
  CHECK(subject == "memory_features");

  fixture::write_onnx_graphs(dir / "missing-tensor", 1024, [](const std::string& role, OnnxModelInfo& m) {
    if (role == "image_encoder") m.outputs[0].name = "features";
  });
  CHECK(error_of([&] { inspect_onnx_graphs(dir / "missing-tensor"); }, &subject) == ErrorCode::SignatureMismatch);
  CHECK(subject == "image_embedding");

  fixture::write_onnx_graphs(dir / "odd-res", 1000);
  CHECK(error_of([&] { inspect_onnx_graphs(dir / "odd-res"); }) == ErrorCode::SignatureMismatch);

  // The optional prompt input may be left out of the decoder graph.
  fixture::write_onnx_graphs(dir / "no-prompt", 1024, [](const std::string& role, OnnxModelInfo& m) {
    if (role == "memory_decoder") m.inputs.pop_back();
  });
  CHECK(error_of([&] { inspect_onnx_graphs(dir / "no-prompt"); }) == ErrorCode{});

  if (!onnx_runtime_available()) {
    CHECK(error_of([&] { onnx_backend(dir / "good"); }) == ErrorCode::RuntimeUnavailable);
  }
  fs::remove_all(dir);
}

TEST_CASE("bilinear resize") {
  Slice s(3, 2);
  for (std::size_t i = 0; i < s.size(); ++i) s.pixels[i] = static_cast<float>(i);
  CHECK(resize_bilinear(s, 3, 2) == s);
  const Slice flat(5, 7, 0.25f);
  for (float v : resize_bilinear(flat, 16, 16).pixels) CHECK(v == doctest::Approx(0.25));
  const Slice up = resize_bilinear(s, 6, 4);
  CHECK(up.width == 6);
  CHECK(up.at(0, 0) == 0.0f);
  CHECK(up.at(5, 3) == 5.0f);
}
