// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gdr/autodiff.hpp"
#include "gdr/data_io.hpp"
#include "gdr/geometry.hpp"
#include "gdr/network.hpp"
#include "gdr/rng.hpp"
#include "gdr/tensor.hpp"

namespace gdr::test {

inline double rel_err(double got, double want) {
  const double denom = std::max(std::fabs(want), 1e-12);
  return std::fabs(got - want) / denom;
}

inline double rel_l2_err(const std::vector<double>& got, const std::vector<double>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Central finite difference of a replayed graph w.r.t. one leaf, one
/// coordinate at a time. The graph's recorded forward (including any
/// recorded backward nodes) is the function being differenced.
inline std::vector<double> fd_gradient(Graph& g, NodeId leaf, NodeId root, double step) {
  const Tensor x0 = g.value(leaf);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    Tensor xp = x0;
    xp.data[i] += step;
    g.set_value(leaf, xp);
    g.recompute();
    const double fp = g.value(root).scalar_value();
    Tensor xm = x0;
    xm.data[i] -= step;
    g.set_value(leaf, xm);
    g.recompute();
    const double fm = g.value(root).scalar_value();
    out[i] = (fp - fm) / (2.0 * step);
  }
  g.set_value(leaf, x0);
  g.recompute();
  return out;
}

/// Second-order central difference d2f/dx2 for a scalar leaf.
inline double fd_second(Graph& g, NodeId leaf, NodeId root, double step) {
  const Tensor x0 = g.value(leaf);
  auto eval_at = [&](double delta) {
    Tensor x = x0;
    x.data[0] += delta;
    g.set_value(leaf, x);
    g.recompute();
    return g.value(root).scalar_value();
  };
  const double fp = eval_at(step);
  const double f0 = eval_at(0.0);
  const double fm = eval_at(-step);
  g.set_value(leaf, x0);
  g.recompute();
  return (fp - 2.0 * f0 + fm) / (step * step);
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo,
                                         double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline std::vector<double> random_gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

/// Independent full-dimension Monte Carlo rating oracle: draws ambient
/// Gaussians and applies the strict negative-projection test directly.
/// Deliberately shares no code with r_monte_carlo's span reduction.
inline double mc_rating_full_dim(const std::vector<std::vector<double>>& grads,
                                 std::size_t samples, std::uint64_t seed) {
  const std::size_t n = grads.front().size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < samples; ++t) {
    for (double& x : v) x = dist(rng);
    bool hit = true;
    for (const auto& g : grads) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += v[j] * g[j];
      if (!(s < 0.0)) {
        hit = false;
        break;
      }
    }
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(samples);
}

/// Linear classifier that predicts the nearest of the given centers
/// (logits 2 c.x - |c|^2), optionally jittered so distinct "members" have
/// distinct gradients while staying accurate on tight blobs. A fast,
/// deterministic stand-in for a trained model.
inline MlpModel nearest_center_model(const std::vector<std::vector<double>>& centers,
                                     double jitter, std::uint64_t jitter_seed) {
  const int classes = static_cast<int>(centers.size());
  const int n = static_cast<int>(centers.front().size());
  MlpModel m;
  m.layer_dims = {n, classes};
  Tensor w(classes, n);
  Tensor b(classes, 1);
  std::mt19937_64 rng(jitter_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int c = 0; c < classes; ++c) {
    double sq = 0.0;
    for (int j = 0; j < n; ++j) {
      const double cj = centers[c][j] + jitter * noise(rng);
      w.at(c, j) = 8.0 * cj;
      sq += cj * cj;
    }
    b.data[c] = -4.0 * sq;
  }
  m.weights.push_back(std::move(w));
  m.biases.push_back(std::move(b));
  m.validate();
  return m;
}

inline std::vector<std::vector<double>> dataset_centers(const Dataset& ds) {
  std::vector<std::vector<double>> centers(ds.class_count,
                                           std::vector<double>(ds.input_dim, 0.0));
  std::vector<std::size_t> counts(ds.class_count, 0);
  for (const LabeledExample& e : ds.examples) {
    for (int j = 0; j < ds.input_dim; ++j) centers[e.label][j] += e.pixels[j];
    ++counts[e.label];
  }
  for (int c = 0; c < ds.class_count; ++c) {
    for (double& v : centers[c]) v /= static_cast<double>(std::max<std::size_t>(counts[c], 1));
  }
  return centers;
}

inline double spearman_rank_correlation(std::vector<double> a, std::vector<double> b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace gdr::test
