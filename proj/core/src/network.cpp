// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "gdr/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gdr {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'E', 'N'};
constexpr std::uint16_t kFormatVersion = 1;

void check_input_dim(const MlpModel& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.input_dim()) {
    throw ShapeError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(m.input_dim()));
  }
}

}  // namespace

void MlpModel::validate() const {
  if (layer_dims.size() < 2) throw ValueError("model needs at least input and output dims");
  for (int d : layer_dims) {
    if (d <= 0) throw ValueError("layer dims must be positive");
  }
  if (weights.size() + 1 != layer_dims.size() || biases.size() != weights.size()) {
    throw ShapeError("layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows != layer_dims[l + 1] || weights[l].cols != layer_dims[l]) {
      throw ShapeError("weight shape mismatch at layer " + std::to_string(l));
    }
    if (biases[l].rows != layer_dims[l + 1] || biases[l].cols != 1) {
      throw ShapeError("bias shape mismatch at layer " + std::to_string(l));
    }
    if (!weights[l].all_finite() || !biases[l].all_finite()) {
      throw NumericError("non-finite parameter at layer " + std::to_string(l));
    }
  }
}

MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw ValueError("init_mlp: need at least two dims");
  MlpModel m;
  m.layer_dims = layer_dims;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w(fan_out, fan_in);
    for (double& v : w.data) v = dist(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 1);
  }
  m.validate();
  return m;
}

void Ensemble::validate() const {
  if (models.empty()) throw ValueError("ensemble must have at least one model");
  if (!names.empty() && names.size() != models.size()) {
    throw ValueError("ensemble names/models size mismatch");
  }
  for (const MlpModel& m : models) {
    m.validate();
    if (m.input_dim() != models.front().input_dim() ||
        m.class_count() != models.front().class_count()) {
      throw ShapeError("ensemble members must share input dimension and class count");
    }
  }
}

std::vector<double> confidences(const MlpModel& model, std::span<const double> x) {
  check_input_dim(model, x);
  std::vector<double> h(x.begin(), x.end());
  const int layers = model.layer_count();
  for (int l = 0; l < layers; ++l) {
    const Tensor& w = model.weights[l];
    const Tensor& b = model.biases[l];
    std::vector<double> z(w.rows);
    for (int i = 0; i < w.rows; ++i) {
      const double* row = &w.data[static_cast<std::size_t>(i) * w.cols];
      double s = b.data[i];
      for (int j = 0; j < w.cols; ++j) s += row[j] * h[j];
      z[i] = s;
    }
    if (l + 1 < layers) {
      for (double& v : z) v = std::tanh(v);
    }
    h = std::move(z);
  }
  double m = -std::numeric_limits<double>::infinity();
  for (double v : h) m = std::max(m, v);
  double sum = 0.0;
  for (double& v : h) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : h) {
    v /= sum;
    if (!std::isfinite(v)) throw NumericError("confidences: non-finite activation");
  }
  return h;
}

int predict_class(const MlpModel& model, std::span<const double> x) {
  const std::vector<double> p = confidences(model, x);
  int best = 0;
  for (int c = 1; c < static_cast<int>(p.size()); ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

ModelNodes record_params(Graph& g, const MlpModel& model, bool trainable) {
  ModelNodes nodes;
  for (int l = 0; l < model.layer_count(); ++l) {
    nodes.weights.push_back(trainable ? g.leaf(model.weights[l]) : g.constant(model.weights[l]));
    nodes.biases.push_back(trainable ? g.leaf(model.biases[l]) : g.constant(model.biases[l]));
  }
  return nodes;
}

NodeId forward_with_params(Graph& g, const ModelNodes& params, NodeId input) {
  const std::size_t layers = params.weights.size();
  NodeId h = input;
  for (std::size_t l = 0; l < layers; ++l) {
    h = g.add(g.matmul(params.weights[l], h), params.biases[l]);
    if (l + 1 < layers) h = g.tanh(h);
  }
  return h;  // logits
}

NodeId forward_graph(Graph& g, const MlpModel& model, NodeId input, bool params_trainable,
                     ModelNodes* nodes) {
  ModelNodes recorded = record_params(g, model, params_trainable);
  const NodeId logits = forward_with_params(g, recorded, input);
  if (nodes) *nodes = std::move(recorded);
  return logits;
}

std::vector<double> input_gradient(const MlpModel& model, std::span<const double> x, int label) {
  check_input_dim(model, x);
  if (label < 0 || label >= model.class_count()) {
    throw ValueError("input_gradient: label " + std::to_string(label) + " out of range");
  }
  InputGradientEvaluator eval(model);
  return eval.eval(x, label);
}

InputGradientEvaluator::InputGradientEvaluator(const MlpModel& model)
    : classes_(model.class_count()) {
  model.validate();
  input_ = graph_.leaf(Tensor(model.input_dim(), 1));
  const NodeId logits = forward_graph(graph_, model, input_, /*params_trainable=*/false);
  softmax_ = graph_.softmax(logits);
}

std::vector<double> InputGradientEvaluator::eval(std::span<const double> x, int label) {
  if (label < 0 || label >= classes_) {
    throw ValueError("input_gradient: label " + std::to_string(label) + " out of range");
  }
  Tensor xv(static_cast<int>(x.size()), 1);
  std::copy(x.begin(), x.end(), xv.data.begin());
  graph_.set_value(input_, xv);  // throws ShapeError on dimension mismatch
  graph_.recompute();
  Tensor seed(classes_, 1);
  seed.data[label] = 1.0;
  const NodeId wrt[] = {input_};
  std::vector<Tensor> grads = graph_.gradient_seeded(softmax_, seed, wrt);
  return std::move(grads[0].data);
}

// --- serialization ---------------------------------------------------------

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw IoError("model payload truncated (needed " + std::to_string(n) + " bytes at offset " +
                    std::to_string(pos_) + ")");
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint16_t u16() {
    auto s = take(2);
    return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
  }
  std::uint32_t u32() {
    auto s = take(4);
    return static_cast<std::uint32_t>(s[0]) | (static_cast<std::uint32_t>(s[1]) << 8) |
           (static_cast<std::uint32_t>(s[2]) << 16) | (static_cast<std::uint32_t>(s[3]) << 24);
  }
  double f64() {
    auto s = take(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const MlpModel& model) {
  model.validate();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(model.layer_count()));
  for (int d : model.layer_dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (int l = 0; l < model.layer_count(); ++l) {
    for (double v : model.weights[l].data) put_f64(out, v);
    for (double v : model.biases[l].data) put_f64(out, v);
  }
  return out;
}

MlpModel deserialize_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw IoError("bad magic header: not a model file");
  }
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t layers = r.u32();
  if (layers == 0 || layers > 64) throw IoError("implausible layer count");
  MlpModel m;
  m.layer_dims.resize(layers + 1);
  for (auto& d : m.layer_dims) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > (1u << 24)) throw IoError("implausible layer dimension");
    d = static_cast<int>(v);
  }
  for (std::uint32_t l = 0; l < layers; ++l) {
    Tensor w(m.layer_dims[l + 1], m.layer_dims[l]);
    for (double& v : w.data) v = r.f64();
    Tensor b(m.layer_dims[l + 1], 1);
    for (double& v : b.data) v = r.f64();
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  if (!r.done()) throw IoError("trailing bytes after model payload");
  m.validate();
  return m;
}

void save_model(const std::string& path, const MlpModel& model) {
  const std::vector<std::uint8_t> bytes = serialize_model(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path);
}

MlpModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

void save_ensemble(const std::string& dir, const Ensemble& ensemble) {
  ensemble.validate();
  fs::create_directories(dir);
  json manifest;
  manifest["schema_version"] = 1;
  json members = json::array();
  for (std::size_t i = 0; i < ensemble.models.size(); ++i) {
    const std::string name =
        ensemble.names.empty() ? "model_" + std::to_string(i) : ensemble.names[i];
    const std::string file = name + ".gden";
    save_model((fs::path(dir) / file).string(), ensemble.models[i]);
    members.push_back({{"name", name}, {"file", file}});
  }
  manifest["models"] = members;
  std::ofstream f(fs::path(dir) / "manifest.json");
  if (!f) throw IoError("cannot write manifest in " + dir);
  f << manifest.dump(2) << "\n";
}

Ensemble load_ensemble(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open " + manifest_path.string());
  json manifest;
  try {
    f >> manifest;
  } catch (const json::parse_error& e) {
    throw IoError("malformed manifest: " + std::string(e.what()));
  }
  if (!manifest.contains("models") || !manifest["models"].is_array() ||
      manifest["models"].empty()) {
    throw IoError("manifest has no models");
  }
  Ensemble e;
  for (const auto& entry : manifest["models"]) {
    const std::string file = entry.at("file").get<std::string>();
    e.names.push_back(entry.value("name", file));
    fs::path p(file);
    if (p.is_relative()) p = fs::path(dir) / p;
    e.models.push_back(load_model(p.string()));
  }
  e.validate();
  return e;
}

}  // namespace gdr
