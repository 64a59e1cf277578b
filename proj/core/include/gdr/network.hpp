// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gdr/autodiff.hpp"
#include "gdr/tensor.hpp"

namespace gdr {

/// Feedforward classifier: linear layers with tanh hidden activations and a
/// softmax over the final layer. tanh is fixed so the gradient-loss terms
/// have usable second derivatives.
struct MlpModel {
  std::vector<int> layer_dims;   // input, hidden..., classes
  std::vector<Tensor> weights;   // (out x in) per linear layer
  std::vector<Tensor> biases;    // (out x 1) per linear layer

  int input_dim() const { return layer_dims.front(); }
  int class_count() const { return layer_dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }

  /// Throws if shapes disagree with layer_dims or any parameter is non-finite.
  void validate() const;
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed);

struct Ensemble {
  std::vector<MlpModel> models;
  std::vector<std::string> names;

  std::size_t size() const { return models.size(); }
  int input_dim() const { return models.front().input_dim(); }
  int class_count() const { return models.front().class_count(); }
  void validate() const;
};

/// Softmax class probabilities; entries in (0,1) summing to 1.
std::vector<double> confidences(const MlpModel& model, std::span<const double> x);

/// Index of the maximal confidence; ties broken toward the lowest index.
int predict_class(const MlpModel& model, std::span<const double> x);

/// Gradient of the confidence of class `label` (the ground-truth class,
/// regardless of what the model predicts) with respect to the input.
std::vector<double> input_gradient(const MlpModel& model, std::span<const double> x, int label);

/// Records the model's forward pass on an existing graph. Parameters are
/// recorded as leaves when `params_trainable`, else as constants.
struct ModelNodes {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
};
NodeId forward_graph(Graph& g, const MlpModel& model, NodeId input, bool params_trainable,
                     ModelNodes* nodes = nullptr);

/// Record the parameters once, then share them across several forward
/// passes (batch training records one forward per example).
ModelNodes record_params(Graph& g, const MlpModel& model, bool trainable);
NodeId forward_with_params(Graph& g, const ModelNodes& params, NodeId input);

/// Reusable input-gradient evaluator: one recorded graph per model, replayed
/// per input. Much cheaper than input_gradient() in a loop.
class InputGradientEvaluator {
 public:
  explicit InputGradientEvaluator(const MlpModel& model);
  std::vector<double> eval(std::span<const double> x, int label);

 private:
  Graph graph_;
  NodeId input_;
  NodeId softmax_;
  int classes_;
};

// Model file format: magic "GDEN", format version u16, layer count u32,
// dims u32[layer_count+1], then per layer the weight matrix (row-major) and
// the bias vector as 64-bit little-endian floats.
std::vector<std::uint8_t> serialize_model(const MlpModel& model);
MlpModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const std::string& path, const MlpModel& model);
MlpModel load_model(const std::string& path);

/// An ensemble on disk is a directory of model files plus manifest.json
/// listing member files (relative to the manifest) in order. Manifests may
/// reference model files from other directories, so ensembles can be
/// recombined without copying weights.
void save_ensemble(const std::string& dir, const Ensemble& ensemble);
Ensemble load_ensemble(const std::string& dir);

}  // namespace gdr
