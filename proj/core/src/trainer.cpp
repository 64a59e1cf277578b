// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "gdr/errors.hpp"
#include "gdr/geometry.hpp"
#include "gdr/metrics.hpp"

namespace gdr {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kZeroGradTol = 1e-12;
}  // namespace

const char* grad_loss_kind_name(GradLossKind kind) {
  switch (kind) {
    case GradLossKind::kNone: return "none";
    case GradLossKind::kCosineMaxPairwise: return "cosine_max_pairwise";
    case GradLossKind::kAngleSum: return "angle_sum";
    case GradLossKind::kQuadTriangleArea: return "quad_triangle_area";
  }
  return "?";
}

GradLossKind grad_loss_kind_from_name(const std::string& name) {
  if (name == "none") return GradLossKind::kNone;
  if (name == "cosine_max_pairwise" || name == "cosine") return GradLossKind::kCosineMaxPairwise;
  if (name == "angle_sum") return GradLossKind::kAngleSum;
  if (name == "quad_triangle_area" || name == "quad") return GradLossKind::kQuadTriangleArea;
  throw ValueError("unknown gradient loss kind: " + name);
}

int TrainConfig::total_epochs() const {
  int total = 0;
  for (const TrainPhase& p : phases) total += p.epochs;
  return total;
}

void TrainConfig::validate() const {
  if (beta < 0.0) throw ValueError("beta must be >= 0");
  if (phases.empty()) throw ValueError("training needs at least one phase");
  for (const TrainPhase& p : phases) {
    if (p.epochs < 1) throw ValueError("each phase needs at least one epoch");
  }
  if (epochs_total != 0 && epochs_total != total_epochs()) {
    throw ValueError("epochs_total (" + std::to_string(epochs_total) +
                     ") does not match the phase sum (" + std::to_string(total_epochs()) + ")");
  }
  if (learning_rate <= 0.0) throw ValueError("learning rate must be positive");
  if (batch_size < 1) throw ValueError("batch size must be positive");
  if (smoothmax_temperature <= 0.0) throw ValueError("smooth-max temperature must be positive");
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "# schema: gdr-trainlog v1\n";
  f << "epoch,consensus_accuracy,image_loss,grad_loss,gdr_estimate\n";
  f.precision(17);
  for (const EpochStats& e : log.epochs) {
    f << e.epoch << ',' << e.consensus_accuracy << ',' << e.image_loss << ',' << e.grad_loss
      << ',' << e.gdr_estimate << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

namespace {

struct PerExampleGrads {
  std::vector<NodeId> grads;      // input-gradient node per member (kNoNode when ~0)
  std::vector<NodeId> norms;      // l2 norm node per member (valid when grad valid)
};

/// cos(g_i, g_j) as a node, or a 0 constant when either member gradient is
/// numerically zero (counted in `zero_pairs`).
NodeId pair_cosine(Graph& g, const PerExampleGrads& eg, std::size_t i, std::size_t j,
                   std::size_t* zero_pairs) {
  if (eg.grads[i] == kNoNode || eg.grads[j] == kNoNode) {
    ++*zero_pairs;
    return g.scalar_const(0.0);
  }
  return g.div(g.dot(eg.grads[i], eg.grads[j]), g.mul(eg.norms[i], eg.norms[j]));
}

NodeId chain_add(Graph& g, const std::vector<NodeId>& terms) {
  NodeId sum = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) sum = g.add(sum, terms[i]);
  return sum;
}

}  // namespace

JointLossHandles build_joint_loss(Graph& g, const Ensemble& ensemble,
                                  std::span<const LabeledExample* const> batch,
                                  GradLossKind kind, double beta,
                                  double smoothmax_temperature) {
  ensemble.validate();
  if (batch.empty()) throw ValueError("build_joint_loss: empty batch");
  const std::size_t members = ensemble.size();
  const int classes = ensemble.class_count();
  const bool want_grad_loss = kind != GradLossKind::kNone && beta != 0.0;
  if (want_grad_loss && kind == GradLossKind::kCosineMaxPairwise && members < 2) {
    throw ValueError("cosine gradient loss needs at least two members");
  }
  if (want_grad_loss && kind == GradLossKind::kAngleSum && members != 3) {
    throw ValueError("angle-sum gradient loss is defined for exactly three members");
  }
  if (want_grad_loss && kind == GradLossKind::kQuadTriangleArea && members != 4) {
    throw ValueError("triangle-area gradient loss is defined for exactly four members");
  }

  g.clear();
  JointLossHandles out;
  for (const MlpModel& m : ensemble.models) {
    out.params.push_back(record_params(g, m, /*trainable=*/true));
  }

  std::vector<NodeId> ce_terms;
  std::vector<NodeId> grad_terms;
  ce_terms.reserve(batch.size() * members);

  for (const LabeledExample* ex : batch) {
    if (static_cast<int>(ex->pixels.size()) != ensemble.input_dim()) {
      throw ShapeError("build_joint_loss: example dimension mismatch");
    }
    Tensor xv(ensemble.input_dim(), 1);
    std::copy(ex->pixels.begin(), ex->pixels.end(), xv.data.begin());
    const NodeId x = g.constant(std::move(xv));
    Tensor onehot(classes, 1);
    onehot.data[ex->label] = 1.0;
    const NodeId target = g.constant(std::move(onehot));

    std::vector<NodeId> logits(members);
    for (std::size_t i = 0; i < members; ++i) {
      logits[i] = forward_with_params(g, out.params[i], x);
      ce_terms.push_back(g.softmax_xent(logits[i], target));
    }

    if (!want_grad_loss) continue;

    // True-class confidence gradients w.r.t. the input, recorded
    // differentiably so the outer weight gradient can flow through them.
    PerExampleGrads eg;
    eg.grads.resize(members, kNoNode);
    eg.norms.resize(members, kNoNode);
    const NodeId wrt[] = {x};
    for (std::size_t i = 0; i < members; ++i) {
      const NodeId conf = g.select(g.softmax(logits[i]), ex->label);
      const NodeId gi = g.gradient_nodes(conf, wrt)[0];
      const NodeId ni = g.l2_norm(gi);
      if (g.value(ni).scalar_value() < kZeroGradTol) continue;  // flagged via pair_cosine
      eg.grads[i] = gi;
      eg.norms[i] = ni;
    }

    switch (kind) {
      case GradLossKind::kNone:
        break;
      case GradLossKind::kCosineMaxPairwise: {
        // Smooth max (log-sum-exp at temperature tau) over pairwise cosines;
        // a hard max has no usable gradient at ties.
        const double tau = smoothmax_temperature;
        std::vector<NodeId> exps;
        for (std::size_t i = 0; i < members; ++i) {
          for (std::size_t j = i + 1; j < members; ++j) {
            const NodeId c = pair_cosine(g, eg, i, j, &out.zero_gradient_pairs);
            exps.push_back(g.exp(g.scale(c, tau)));
          }
        }
        grad_terms.push_back(g.scale(g.log(chain_add(g, exps)), 1.0 / tau));
        break;
      }
      case GradLossKind::kAngleSum: {
        std::vector<NodeId> angles;
        for (std::size_t i = 0; i < members; ++i) {
          for (std::size_t j = i + 1; j < members; ++j) {
            const NodeId c = pair_cosine(g, eg, i, j, &out.zero_gradient_pairs);
            angles.push_back(g.arccos(c));
          }
        }
        grad_terms.push_back(g.neg(chain_add(g, angles)));
        break;
      }
      case GradLossKind::kQuadTriangleArea: {
        std::vector<NodeId> subset_terms;
        for (std::size_t skip = 0; skip < 4; ++skip) {
          std::vector<std::size_t> tri;
          for (std::size_t i = 0; i < 4; ++i) {
            if (i != skip) tri.push_back(i);
          }
          bool degenerate = false;
          for (std::size_t i : tri) {
            if (eg.grads[i] == kNoNode) degenerate = true;
          }
          if (degenerate) {
            ++out.zero_gradient_pairs;
            subset_terms.push_back(g.scalar_const(0.0));
            continue;
          }
          std::vector<NodeId> angles;
          for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = a + 1; b < 3; ++b) {
              angles.push_back(
                  g.arccos(pair_cosine(g, eg, tri[a], tri[b], &out.zero_gradient_pairs)));
            }
          }
          const NodeId excess = g.sub(g.scalar_const(kTwoPi), chain_add(g, angles));
          const NodeId term = g.clamp(excess, 0.0, kTwoPi);
          // An excess at 2pi means a 3-subset of identical gradients: the
          // objective saturates at its degenerate maximum. The arccos clamp
          // floors each tied angle near 4.5e-4, hence the loose margin.
          if (g.value(term).scalar_value() >= kTwoPi - 1e-2) ++out.quad_saturated_terms;
          subset_terms.push_back(term);
        }
        grad_terms.push_back(g.neg(chain_add(g, subset_terms)));
        break;
      }
    }
  }

  const double inv = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(members));
  out.image_loss = g.scale(chain_add(g, ce_terms), inv);
  if (want_grad_loss) {
    out.grad_loss = g.scale(chain_add(g, grad_terms), 1.0 / static_cast<double>(batch.size()));
    out.joint_loss = g.add(out.image_loss, g.scale(out.grad_loss, beta));
  } else {
    out.joint_loss = out.image_loss;
  }
  return out;
}

namespace {

Dataset probe_prefix(const Dataset& ds, int count) {
  Dataset probe;
  probe.input_dim = ds.input_dim;
  probe.class_count = ds.class_count;
  probe.source = ds.source + "#probe";
  const std::size_t n = std::min<std::size_t>(ds.size(), static_cast<std::size_t>(count));
  probe.examples.assign(ds.examples.begin(), ds.examples.begin() + static_cast<std::ptrdiff_t>(n));
  return probe;
}

}  // namespace

std::pair<Ensemble, TrainLog> train_ensemble(Ensemble initial, const TrainConfig& config,
                                             const Dataset& train_set) {
  config.validate();
  initial.validate();
  if (train_set.size() == 0) throw ValueError("train_ensemble: empty dataset");
  if (train_set.input_dim != initial.input_dim()) {
    throw ShapeError("train_ensemble: dataset dimension does not match ensemble");
  }

  Ensemble current = std::move(initial);
  Ensemble last_good = current;
  TrainLog log;
  Graph g;
  std::mt19937_64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  // wrt ids are rebuilt per batch in a fixed (member, layer, weight|bias) order.
  int epoch = 0;
  bool stop = false;
  bool quad_warned = false;
  for (const TrainPhase& phase : config.phases) {
    for (int pe = 0; pe < phase.epochs && !stop; ++pe, ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double image_sum = 0.0, grad_sum = 0.0;
      std::size_t batches = 0;
      try {
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
          const std::size_t stop_idx =
              std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
          std::vector<const LabeledExample*> batch;
          batch.reserve(stop_idx - start);
          for (std::size_t i = start; i < stop_idx; ++i) {
            batch.push_back(&train_set.examples[order[i]]);
          }
          JointLossHandles h =
              build_joint_loss(g, current, batch, phase.kind, config.beta,
                               config.smoothmax_temperature);
          log.zero_gradient_pairs += h.zero_gradient_pairs;
          if (h.quad_saturated_terms > 0 && !quad_warned) {
            std::fprintf(stderr, "train_ensemble: triangle-area objective saturated at its "
                                 "degenerate maximum (identical member gradients)\n");
            quad_warned = true;
          }

          std::vector<NodeId> wrt;
          for (const ModelNodes& mn : h.params) {
            for (std::size_t l = 0; l < mn.weights.size(); ++l) {
              wrt.push_back(mn.weights[l]);
              wrt.push_back(mn.biases[l]);
            }
          }
          const std::vector<Tensor> grads = g.gradient(h.joint_loss, wrt);

          std::size_t gi = 0;
          for (std::size_t m = 0; m < current.models.size(); ++m) {
            for (std::size_t l = 0; l < current.models[m].weights.size(); ++l) {
              Tensor& w = current.models[m].weights[l];
              const Tensor& gw = grads[gi++];
              for (std::size_t i = 0; i < w.size(); ++i) {
                w.data[i] -= config.learning_rate * gw.data[i];
              }
              Tensor& b = current.models[m].biases[l];
              const Tensor& gb = grads[gi++];
              for (std::size_t i = 0; i < b.size(); ++i) {
                b.data[i] -= config.learning_rate * gb.data[i];
              }
            }
          }

          image_sum += g.value(h.image_loss).scalar_value();
          if (h.grad_loss != kNoNode) grad_sum += g.value(h.grad_loss).scalar_value();
          ++batches;
        }
      } catch (const NumericError& e) {
        std::fprintf(stderr, "train_ensemble: divergence in epoch %d (%s); "
                             "keeping last completed epoch\n", epoch, e.what());
        log.diverged = true;
        current = last_good;
        stop = true;
        break;
      }

      EpochStats stats;
      stats.epoch = epoch;
      stats.image_loss = image_sum / static_cast<double>(batches);
      stats.grad_loss = grad_sum / static_cast<double>(batches);
      stats.consensus_accuracy = consensus_accuracy(current, train_set);
      GdrOptions probe_opts;
      probe_opts.rating.samples = 2000;
      probe_opts.rating.seed = config.seed;
      stats.gdr_estimate =
          compute_gdr(current, probe_prefix(train_set, config.gdr_probe_examples), probe_opts).gdr;
      log.epochs.push_back(stats);

      if (!config.checkpoint_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d", epoch);
        save_ensemble((std::filesystem::path(config.checkpoint_dir) / name).string(), current);
      }
      last_good = current;
    }
    if (stop) break;
  }
  return {std::move(current), std::move(log)};
}

}  // namespace gdr
