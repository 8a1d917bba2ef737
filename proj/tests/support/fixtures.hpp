#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <sys/types.h>
#include <vector>

#include "engine/onnx_model.hpp"

namespace fixture {

// Interface-only ONNX files for every graph in the built-in signature
// manifest. `edit` may tamper with a model before it is written.
void write_onnx_graphs(const std::filesystem::path& dir, int resolution = 1024,
                       const std::function<void(const std::string& role, volprop::OnnxModelInfo&)>& edit = {});

// Child process with stdout/stderr appended to `log`.
pid_t spawn(const std::vector<std::string>& argv, const std::filesystem::path& log);
/// Exit status, or 128 + signal.
int wait_for(pid_t pid);
int run(const std::vector<std::string>& argv, const std::filesystem::path& log);

std::string read_file(const std::filesystem::path& path);

}  // namespace fixture
