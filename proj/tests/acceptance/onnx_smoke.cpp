// Manual check of the ONNX backend on one real case:
//   onnx_smoke <model_dir> <ct.nii.gz> <mask.nii.gz> [preset]
// Exits 0 on a completed run, 77 when the build has no onnxruntime, 1 on
// any other error.
#include <cstdio>
#include <string>

#include "app/runner.hpp"
#include "common/error.hpp"
#include "engine/onnx_backend.hpp"

using namespace volprop;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc < 4) {
    std::fprintf(stderr, "usage: %s <model_dir> <ct.nii.gz> <mask.nii.gz> [preset]\n", argv[0]);
    return 2;
  }
  try {
    const OnnxGraphSet graphs = inspect_onnx_graphs(argv[1]);
    std::printf("graphs ok: resolution %d, %d memory slots\n", graphs.input_resolution, graphs.slot_count);
    if (!onnx_runtime_available()) {
      std::printf("built without onnxruntime; skipping inference\n");
      return 77;
    }
    RunConfig config = preset(argc > 4 ? argv[4] : "baseline");
    apply_backend_flag(config, std::string("onnx:") + argv[1]);
    const auto backend = make_backend(config.backend);
    const ManifestEntry entry{"smoke", "structure", fs::absolute(argv[3]).string(), fs::absolute(argv[2]).string()};
    Profiler profiler(true, "smoke", config_id(config));
    const MetricsRecord r = run_case(config, entry, fs::current_path(), *backend, &profiler);
    std::printf("dice %.4f iou %.4f hd %s mm\n", r.dice, r.iou,
                r.hausdorff_mm ? format_number(*r.hausdorff_mm).c_str() : "n/a");
    for (const auto& s : summarize(profiler.timings())) {
      std::printf("  %-16s n=%zu median %.2f ms\n", std::string(to_string(s.stage)).c_str(), s.count, s.median);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s (%s)\n", e.what(), std::string(to_string(e.code())).c_str());
    return 1;
  }
  return 0;
}
