// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdr/autodiff.hpp"
#include "gdr/data_io.hpp"
#include "gdr/network.hpp"

namespace gdr {

enum class GradLossKind {
  kNone,
  kCosineMaxPairwise,  // smooth max over pairwise gradient cosines
  kAngleSum,           // negative sum of pairwise angles; |E| = 3 only
  kQuadTriangleArea,   // negative spherical-triangle area sum; |E| = 4 only
};

const char* grad_loss_kind_name(GradLossKind kind);
GradLossKind grad_loss_kind_from_name(const std::string& name);

struct TrainPhase {
  int epochs = 0;
  GradLossKind kind = GradLossKind::kNone;
};

struct TrainConfig {
  double beta = 0.5;  // gradient-loss weight
  std::vector<TrainPhase> phases;
  int epochs_total = 0;  // 0 derives the total from the phases
  double learning_rate = 0.05;
  int batch_size = 64;
  std::uint64_t seed = 0;  // batch shuffling
  double smoothmax_temperature = 50.0;
  std::string checkpoint_dir;   // write per-epoch checkpoints when nonempty
  int gdr_probe_examples = 64;  // per-epoch logged GDR estimate subset

  int total_epochs() const;
  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double consensus_accuracy = 0.0;
  double image_loss = 0.0;
  double grad_loss = 0.0;
  double gdr_estimate = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  bool diverged = false;
  std::size_t zero_gradient_pairs = 0;
};

void write_train_log_csv(const std::string& path, const TrainLog& log);

struct JointLossHandles {
  NodeId image_loss = kNoNode;
  NodeId grad_loss = kNoNode;  // kNoNode when the phase has no gradient term
  NodeId joint_loss = kNoNode;
  std::vector<ModelNodes> params;         // per-member trainable leaves
  std::size_t zero_gradient_pairs = 0;    // pairs skipped because a member gradient was ~0
  std::size_t quad_saturated_terms = 0;   // Girard terms at the degenerate 2pi maximum
};

/// Records the joint loss (mean cross entropy + beta * gradient loss) for
/// one batch on `g`, which is cleared first. The gradient-loss term needs
/// the per-example input gradients as graph nodes, so the backward pass of
/// each member is recorded differentiably (double backprop). With kind none
/// or beta 0 no gradient-loss nodes are recorded at all.
JointLossHandles build_joint_loss(Graph& g, const Ensemble& ensemble,
                                  std::span<const LabeledExample* const> batch,
                                  GradLossKind kind, double beta,
                                  double smoothmax_temperature);

/// Simultaneous SGD over all members under the phase schedule. Deterministic
/// for a fixed seed: fixed shuffling, fixed summation order. On divergence
/// (non-finite loss) training stops and the ensemble from the end of the
/// last completed epoch is returned with log.diverged set.
std::pair<Ensemble, TrainLog> train_ensemble(Ensemble initial, const TrainConfig& config,
                                             const Dataset& train_set);

}  // namespace gdr
