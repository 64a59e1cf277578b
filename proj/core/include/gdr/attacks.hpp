// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gdr/autodiff.hpp"
#include "gdr/network.hpp"

namespace gdr {

enum class AttackKind { kFgsm, kPgdLinf, kMi };

const char* attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::kFgsm;
  double epsilon = 0.0;         // L-inf budget
  int steps = 1;                // 1 for fgsm
  double step_size = 0.0;
  double momentum_decay = 1.0;  // mi only
  double clip_min = 0.0;
  double clip_max = 1.0;

  // Iterative-attack defaults: pgd 40 steps at eps/10, mi 10 steps at
  // eps/steps with decay 1. The one-step methods collapse to fgsm.
  static AttackConfig fgsm(double eps);
  static AttackConfig pgd_linf(double eps, int steps = 40, double step_size = -1.0);
  static AttackConfig mi(double eps, int steps = 10, double momentum_decay = 1.0);

  void validate() const;
};

struct AttackResult {
  std::vector<double> adversary;          // x* = x + v
  double perturbation_norm = 0.0;         // L-inf
  std::vector<int> per_model_prediction;  // on x*, per ensemble member
  int original_label = 0;
};

/// Mean cross-entropy of the ensemble members on one recorded input; the
/// shared objective for ensemble attacks, differentiable w.r.t. the input.
NodeId ensemble_loss_node(Graph& g, const Ensemble& ensemble, NodeId input, NodeId target);

double ensemble_loss_value(const Ensemble& ensemble, std::span<const double> x, int label);

/// White-box attack driver with one recorded graph per ensemble, replayed
/// for every example and iterate. Deterministic: no random start.
class AttackEngine {
 public:
  explicit AttackEngine(const Ensemble& ensemble);

  AttackResult run(const AttackConfig& config, std::span<const double> x, int label);

 private:
  std::vector<double> loss_gradient(std::span<const double> x, int label);

  const Ensemble ensemble_;
  Graph graph_;
  NodeId input_;
  NodeId target_;
  NodeId loss_;
};

/// One-shot helpers; build an engine internally.
AttackResult attack(const Ensemble& ensemble, const AttackConfig& config,
                    std::span<const double> x, int label);
AttackResult attack(const MlpModel& model, const AttackConfig& config, std::span<const double> x,
                    int label);

/// Adversary dump: raw little-endian f64 array (count x dim) plus a JSON
/// sidecar with the config, norms, and per-model predictions.
void write_adversaries(const std::string& raw_path, const std::string& sidecar_path,
                       const std::vector<AttackResult>& results, const AttackConfig& config);

}  // namespace gdr
