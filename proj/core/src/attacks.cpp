// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/attacks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gdr/errors.hpp"

using nlohmann::json;

namespace gdr {

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kPgdLinf: return "pgd_linf";
    case AttackKind::kMi: return "mi";
  }
  return "?";
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "pgd_linf" || name == "pgd") return AttackKind::kPgdLinf;
  if (name == "mi") return AttackKind::kMi;
  throw ValueError("unknown attack kind: " + name);
}

AttackConfig AttackConfig::fgsm(double eps) {
  AttackConfig c;
  c.kind = AttackKind::kFgsm;
  c.epsilon = eps;
  c.steps = 1;
  c.step_size = eps;
  c.validate();
  return c;
}

AttackConfig AttackConfig::pgd_linf(double eps, int steps, double step_size) {
  AttackConfig c;
  c.kind = AttackKind::kPgdLinf;
  c.epsilon = eps;
  c.steps = steps;
  c.step_size = step_size < 0.0 ? eps / 10.0 : step_size;
  c.validate();
  return c;
}

AttackConfig AttackConfig::mi(double eps, int steps, double momentum_decay) {
  AttackConfig c;
  c.kind = AttackKind::kMi;
  c.epsilon = eps;
  c.steps = steps;
  c.step_size = steps > 0 ? eps / steps : eps;
  c.momentum_decay = momentum_decay;
  c.validate();
  return c;
}

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw ValueError("attack epsilon must be >= 0");
  if (steps < 1) throw ValueError("attack steps must be >= 1");
  if (step_size < 0.0) throw ValueError("attack step size must be >= 0");
  if (kind == AttackKind::kFgsm && steps != 1) {
    throw ValueError("fgsm is a single-step attack (steps must be 1)");
  }
  if (kind != AttackKind::kFgsm && step_size > epsilon) {
    throw ValueError("iterative attacks need step_size <= epsilon");
  }
  if (momentum_decay < 0.0) throw ValueError("momentum decay must be >= 0");
  if (!(clip_min <= clip_max)) throw ValueError("clip_min must be <= clip_max");
}

NodeId ensemble_loss_node(Graph& g, const Ensemble& ensemble, NodeId input, NodeId target) {
  NodeId sum = kNoNode;
  for (const MlpModel& m : ensemble.models) {
    const NodeId logits = forward_graph(g, m, input, /*params_trainable=*/false);
    const NodeId ce = g.softmax_xent(logits, target);
    sum = sum == kNoNode ? ce : g.add(sum, ce);
  }
  return g.scale(sum, 1.0 / static_cast<double>(ensemble.size()));
}

double ensemble_loss_value(const Ensemble& ensemble, std::span<const double> x, int label) {
  ensemble.validate();
  Graph g;
  Tensor xv(static_cast<int>(x.size()), 1);
  std::copy(x.begin(), x.end(), xv.data.begin());
  const NodeId input = g.constant(std::move(xv));
  Tensor onehot(ensemble.class_count(), 1);
  onehot.data[label] = 1.0;
  const NodeId target = g.constant(std::move(onehot));
  return g.value(ensemble_loss_node(g, ensemble, input, target)).scalar_value();
}

AttackEngine::AttackEngine(const Ensemble& ensemble) : ensemble_(ensemble) {
  ensemble_.validate();
  input_ = graph_.leaf(Tensor(ensemble_.input_dim(), 1));
  Tensor onehot(ensemble_.class_count(), 1);
  onehot.data[0] = 1.0;
  target_ = graph_.leaf(std::move(onehot));
  loss_ = ensemble_loss_node(graph_, ensemble_, input_, target_);
}

std::vector<double> AttackEngine::loss_gradient(std::span<const double> x, int label) {
  Tensor xv(static_cast<int>(x.size()), 1);
  std::copy(x.begin(), x.end(), xv.data.begin());
  graph_.set_value(input_, xv);
  Tensor onehot(ensemble_.class_count(), 1);
  onehot.data[label] = 1.0;
  graph_.set_value(target_, onehot);
  graph_.recompute();
  const NodeId wrt[] = {input_};
  std::vector<Tensor> grads = graph_.gradient(loss_, wrt);
  return std::move(grads[0].data);
}

AttackResult AttackEngine::run(const AttackConfig& config, std::span<const double> x, int label) {
  config.validate();
  if (static_cast<int>(x.size()) != ensemble_.input_dim()) {
    throw ShapeError("attack input dimension mismatch");
  }
  if (label < 0 || label >= ensemble_.class_count()) {
    throw ValueError("attack label out of range");
  }

  const std::size_t n = x.size();
  const double eps = config.epsilon;
  std::vector<double> x0(x.begin(), x.end());
  std::vector<double> xt = x0;
  std::vector<double> momentum(n, 0.0);

  auto project = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = std::clamp(v[i], x0[i] - eps, x0[i] + eps);
      v[i] = std::clamp(v[i], config.clip_min, config.clip_max);
    }
  };

  const int steps = config.kind == AttackKind::kFgsm ? 1 : config.steps;
  const double alpha = config.kind == AttackKind::kFgsm ? eps : config.step_size;
  for (int step = 0; step < steps; ++step) {
    const std::vector<double> grad = loss_gradient(xt, label);
    const double* dir = grad.data();
    if (config.kind == AttackKind::kMi) {
      double l1 = 0.0;
      for (double v : grad) l1 += std::fabs(v);
      for (std::size_t i = 0; i < n; ++i) {
        momentum[i] = config.momentum_decay * momentum[i] + (l1 > 0.0 ? grad[i] / l1 : 0.0);
      }
      dir = momentum.data();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double s = dir[i] > 0.0 ? 1.0 : (dir[i] < 0.0 ? -1.0 : 0.0);
      xt[i] += alpha * s;
    }
    project(xt);
  }

  AttackResult result;
  result.original_label = label;
  result.adversary = std::move(xt);
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    norm = std::max(norm, std::fabs(result.adversary[i] - x0[i]));
  }
  result.perturbation_norm = norm;
  result.per_model_prediction.reserve(ensemble_.size());
  for (const MlpModel& m : ensemble_.models) {
    result.per_model_prediction.push_back(predict_class(m, result.adversary));
  }
  return result;
}

AttackResult attack(const Ensemble& ensemble, const AttackConfig& config,
                    std::span<const double> x, int label) {
  AttackEngine engine(ensemble);
  return engine.run(config, x, label);
}

AttackResult attack(const MlpModel& model, const AttackConfig& config, std::span<const double> x,
                    int label) {
  Ensemble single;
  single.models.push_back(model);
  single.names.push_back("model");
  return attack(single, config, x, label);
}

void write_adversaries(const std::string& raw_path, const std::string& sidecar_path,
                       const std::vector<AttackResult>& results, const AttackConfig& config) {
  std::ofstream raw(raw_path, std::ios::binary | std::ios::trunc);
  if (!raw) throw IoError("cannot open " + raw_path + " for writing");
  for (const AttackResult& r : results) {
    for (double v : r.adversary) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      raw.write(b, 8);
    }
  }
  if (!raw) throw IoError("short write to " + raw_path);

  json side;
  side["schema_version"] = 1;
  side["config"] = {{"kind", attack_kind_name(config.kind)},
                    {"epsilon", config.epsilon},
                    {"steps", config.steps},
                    {"step_size", config.step_size},
                    {"momentum_decay", config.momentum_decay},
                    {"clip_min", config.clip_min},
                    {"clip_max", config.clip_max}};
  side["count"] = results.size();
  side["dim"] = results.empty() ? 0 : results.front().adversary.size();
  json per = json::array();
  for (const AttackResult& r : results) {
    per.push_back({{"original_label", r.original_label},
                   {"perturbation_norm", r.perturbation_norm},
                   {"per_model_prediction", r.per_model_prediction}});
  }
  side["results"] = per;
  std::ofstream f(sidecar_path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + sidecar_path + " for writing");
  f << side.dump(2) << "\n";
}

}  // namespace gdr
