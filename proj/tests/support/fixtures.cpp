#include "support/fixtures.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <iterator>
#include <stdexcept>

namespace fixture {

namespace fs = std::filesystem;
using volprop::OnnxDim;
using volprop::OnnxModelInfo;
using volprop::OnnxTensorInfo;

namespace {

OnnxTensorInfo tensor(const volprop::TensorSpec& spec, int resolution) {
  OnnxTensorInfo t;
  t.name = spec.name;
  t.elem_type = spec.dtype == "int64" ? 7 : 1;
  std::vector<OnnxDim> dims;
  for (const auto& d : spec.shape) {
    OnnxDim dim;
    if (d == "R") dim.value = resolution;
    else if (d == "R/16") dim.value = resolution / 16;
    else if (d == "K") dim.param = "K";
    else dim.value = std::stoll(d);
    dims.push_back(dim);
  }
  t.shape = dims;
  return t;
}

}  // namespace

void write_onnx_graphs(const fs::path& dir, int resolution,
                       const std::function<void(const std::string&, OnnxModelInfo&)>& edit) {
  fs::create_directories(dir);
  const auto& manifest = volprop::builtin_signature_manifest();
  for (const auto& g : manifest.graphs) {
    OnnxModelInfo info;
    for (const auto& t : g.inputs) info.inputs.push_back(tensor(t, resolution));
    for (const auto& t : g.outputs) info.outputs.push_back(tensor(t, resolution));
    if (g.role == "image_encoder") info.metadata[manifest.input_resolution_key] = std::to_string(resolution);
    if (g.role == "memory_decoder") info.metadata[manifest.slot_count_key] = "7";
    if (edit) edit(g.role, info);
    std::ofstream(dir / g.file, std::ios::binary) << volprop::encode_onnx_interface(info);
  }
}

pid_t spawn(const std::vector<std::string>& argv, const fs::path& log) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int fd = open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      dup2(fd, 1);
      dup2(fd, 2);
    }
    execv(args[0], args.data());
    _exit(127);
  }
  return pid;
}

int wait_for(pid_t pid) {
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

int run(const std::vector<std::string>& argv, const fs::path& log) { return wait_for(spawn(argv, log)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
