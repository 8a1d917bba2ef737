#include "engine/onnx_model.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "common/error.hpp"
#include "onnx_signature_data.inc"

namespace volprop {

namespace {

// Protobuf wire format reader over a byte range.
class WireReader {
 public:
  explicit WireReader(std::string_view bytes) : data_(bytes) {}

  bool done() const noexcept { return pos_ >= data_.size(); }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= data_.size()) bad("truncated varint");
      const auto b = static_cast<unsigned char>(data_[pos_++]);
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
    }
    bad("varint too long");
  }

  // Returns (field number, wire type).
  std::pair<std::uint32_t, int> tag() {
    const std::uint64_t t = varint();
    return {static_cast<std::uint32_t>(t >> 3), static_cast<int>(t & 7)};
  }

  std::string_view bytes() {
    const std::uint64_t n = varint();
    if (n > data_.size() - pos_) bad("length-delimited field overruns the buffer");
    const auto out = data_.substr(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }

  void skip(int wire_type) {
    switch (wire_type) {
      case 0: varint(); break;
      case 1: advance(8); break;
      case 2: bytes(); break;
      case 5: advance(4); break;
      default: bad("unsupported wire type " + std::to_string(wire_type));
    }
  }

 private:
  void advance(std::size_t n) {
    if (n > data_.size() - pos_) bad("fixed-width field overruns the buffer");
    pos_ += n;
  }
  [[noreturn]] static void bad(const std::string& what) {
    fail(ErrorCode::MalformedHeader, "not a readable ONNX model: " + what);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

OnnxDim parse_dim(std::string_view bytes) {
  OnnxDim d;
  WireReader r(bytes);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 1 && wt == 0) {
      d.value = static_cast<std::int64_t>(r.varint());
    } else if (field == 2 && wt == 2) {
      d.param = std::string(r.bytes());
    } else {
      r.skip(wt);
    }
  }
  return d;
}

void parse_tensor_type(std::string_view bytes, OnnxTensorInfo& info) {
  WireReader r(bytes);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 1 && wt == 0) {
      info.elem_type = static_cast<int>(r.varint());
    } else if (field == 2 && wt == 2) {
      std::vector<OnnxDim> dims;
      WireReader shape(r.bytes());
      while (!shape.done()) {
        const auto [f, w] = shape.tag();
        if (f == 1 && w == 2) {
          dims.push_back(parse_dim(shape.bytes()));
        } else {
          shape.skip(w);
        }
      }
      info.shape = std::move(dims);
    } else {
      r.skip(wt);
    }
  }
}

OnnxTensorInfo parse_value_info(std::string_view bytes) {
  OnnxTensorInfo info;
  WireReader r(bytes);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 1 && wt == 2) {
      info.name = std::string(r.bytes());
    } else if (field == 2 && wt == 2) {
      WireReader type(r.bytes());
      while (!type.done()) {
        const auto [f, w] = type.tag();
        if (f == 1 && w == 2) {
          parse_tensor_type(type.bytes(), info);
        } else {
          type.skip(w);
        }
      }
    } else {
      r.skip(wt);
    }
  }
  return info;
}

void parse_graph(std::string_view bytes, OnnxModelInfo& model) {
  WireReader r(bytes);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 11 && wt == 2) {
      model.inputs.push_back(parse_value_info(r.bytes()));
    } else if (field == 12 && wt == 2) {
      model.outputs.push_back(parse_value_info(r.bytes()));
    } else {
      r.skip(wt);
    }
  }
}

// Writer side, for fixtures.
void put_varint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

void put_tag(std::string& out, std::uint32_t field, int wire_type) {
  put_varint(out, (static_cast<std::uint64_t>(field) << 3) | static_cast<std::uint64_t>(wire_type));
}

void put_bytes(std::string& out, std::uint32_t field, std::string_view bytes) {
  put_tag(out, field, 2);
  put_varint(out, bytes.size());
  out.append(bytes);
}

std::string encode_value_info(const OnnxTensorInfo& t) {
  std::string tensor;
  put_tag(tensor, 1, 0);
  put_varint(tensor, static_cast<std::uint64_t>(t.elem_type));
  if (t.shape) {
    std::string shape;
    for (const auto& d : *t.shape) {
      std::string dim;
      if (d.value) {
        put_tag(dim, 1, 0);
        put_varint(dim, static_cast<std::uint64_t>(*d.value));
      } else if (!d.param.empty()) {
        put_bytes(dim, 2, d.param);
      }
      put_bytes(shape, 1, dim);
    }
    put_bytes(tensor, 2, shape);
  }
  std::string type;
  put_bytes(type, 1, tensor);
  std::string vi;
  put_bytes(vi, 1, t.name);
  put_bytes(vi, 2, type);
  return vi;
}

int dtype_code(const std::string& dtype) {
  if (dtype == "float32") return static_cast<int>(OnnxElementType::Float);
  if (dtype == "int64") return static_cast<int>(OnnxElementType::Int64);
  fail(ErrorCode::InvalidArgument, "unknown dtype '" + dtype + "' in signature manifest");
}

std::string describe_shape(const std::optional<std::vector<OnnxDim>>& shape) {
  if (!shape) return "unknown";
  std::string s = "[";
  for (std::size_t i = 0; i < shape->size(); ++i) {
    if (i) s += ",";
    const auto& d = (*shape)[i];
    s += d.value ? std::to_string(*d.value) : (d.param.empty() ? "?" : d.param);
  }
  return s + "]";
}

void check_tensor(const OnnxTensorInfo* actual, const TensorSpec& spec, const std::string& graph) {
  if (!actual) {
    if (spec.optional) return;
    fail(ErrorCode::SignatureMismatch, graph + ": missing tensor '" + spec.name + "'", spec.name);
  }
  if (actual->elem_type != dtype_code(spec.dtype)) {
    fail(ErrorCode::SignatureMismatch,
         graph + ": tensor '" + spec.name + "' has element type " + std::to_string(actual->elem_type) +
             ", expected " + spec.dtype,
         spec.name);
  }
  if (!actual->shape) return;  // unknown shape: nothing to contradict
  if (actual->shape->size() != spec.shape.size()) {
    fail(ErrorCode::SignatureMismatch,
         graph + ": tensor '" + spec.name + "' has rank " + std::to_string(actual->shape->size()) + " " +
             describe_shape(actual->shape) + ", expected rank " + std::to_string(spec.shape.size()),
         spec.name);
  }
  for (std::size_t i = 0; i < spec.shape.size(); ++i) {
    const std::string& want = spec.shape[i];
    const auto& have = (*actual->shape)[i];
    const bool numeric = !want.empty() && want.find_first_not_of("0123456789") == std::string::npos;
    if (numeric && have.value && *have.value != std::stoll(want)) {
      fail(ErrorCode::SignatureMismatch,
           graph + ": tensor '" + spec.name + "' dim " + std::to_string(i) + " is " + std::to_string(*have.value) +
               ", expected " + want,
           spec.name);
    }
  }
}

}  // namespace

const OnnxTensorInfo* OnnxModelInfo::find_input(std::string_view name) const noexcept {
  for (const auto& t : inputs) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const OnnxTensorInfo* OnnxModelInfo::find_output(std::string_view name) const noexcept {
  for (const auto& t : outputs) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

OnnxModelInfo parse_onnx_model(std::string_view bytes) {
  OnnxModelInfo model;
  WireReader r(bytes);
  bool has_graph = false;
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 7 && wt == 2) {
      parse_graph(r.bytes(), model);
      has_graph = true;
    } else if (field == 14 && wt == 2) {
      WireReader kv(r.bytes());
      std::string key, value;
      while (!kv.done()) {
        const auto [f, w] = kv.tag();
        if (f == 1 && w == 2) {
          key = std::string(kv.bytes());
        } else if (f == 2 && w == 2) {
          value = std::string(kv.bytes());
        } else {
          kv.skip(w);
        }
      }
      model.metadata[key] = value;
    } else {
      r.skip(wt);
    }
  }
  if (!has_graph) fail(ErrorCode::MalformedHeader, "not a readable ONNX model: no graph");
  return model;
}

OnnxModelInfo read_onnx_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_onnx_model(bytes);
}

std::string encode_onnx_interface(const OnnxModelInfo& info) {
  std::string graph;
  put_bytes(graph, 2, "interface");
  for (const auto& t : info.inputs) put_bytes(graph, 11, encode_value_info(t));
  for (const auto& t : info.outputs) put_bytes(graph, 12, encode_value_info(t));
  std::string model;
  put_tag(model, 1, 0);
  put_varint(model, 8);  // ir_version
  put_bytes(model, 7, graph);
  for (const auto& [k, v] : info.metadata) {
    std::string kv;
    put_bytes(kv, 1, k);
    put_bytes(kv, 2, v);
    put_bytes(model, 14, kv);
  }
  return model;
}

const GraphSpec& SignatureManifest::graph(std::string_view role) const {
  for (const auto& g : graphs) {
    if (g.role == role) return g;
  }
  fail(ErrorCode::InvalidArgument, "signature manifest has no graph with role '" + std::string(role) + "'");
}

SignatureManifest parse_signature_manifest(std::string_view json_text) {
  SignatureManifest m;
  try {
    const auto j = nlohmann::json::parse(json_text);
    m.schema_version = j.at("schema_version").get<int>();
    m.slot_count_key = j.at("metadata").at("slot_count").get<std::string>();
    m.input_resolution_key = j.at("metadata").at("input_resolution").get<std::string>();
    for (const auto& g : j.at("graphs")) {
      GraphSpec spec;
      spec.role = g.at("role").get<std::string>();
      spec.file = g.at("file").get<std::string>();
      auto tensors = [](const nlohmann::json& list) {
        std::vector<TensorSpec> out;
        for (const auto& t : list) {
          out.push_back({t.at("name").get<std::string>(), t.at("dtype").get<std::string>(),
                         t.at("shape").get<std::vector<std::string>>(), t.value("optional", false)});
        }
        return out;
      };
      spec.inputs = tensors(g.at("inputs"));
      spec.outputs = tensors(g.at("outputs"));
      m.graphs.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("bad signature manifest: ") + e.what());
  }
  return m;
}

const SignatureManifest& builtin_signature_manifest() {
  static const SignatureManifest manifest = parse_signature_manifest(kOnnxSignatureJson);
  return manifest;
}

void check_signature(const OnnxModelInfo& model, const GraphSpec& spec) {
  for (const auto& t : spec.inputs) check_tensor(model.find_input(t.name), t, spec.file);
  for (const auto& t : spec.outputs) check_tensor(model.find_output(t.name), t, spec.file);
}

}  // namespace volprop
