// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gdr/errors.hpp"
#include "gdr/rng.hpp"
#include "gdr/tensor.hpp"

namespace gdr {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

double pairwise_angle(const std::vector<double>& a, const std::vector<double>& b) {
  // 2*atan2(|a^ - b^|, |a^ + b^|) instead of acos of the dot product: exact
  // at 0 and pi, where acos loses half the significand. Identical members
  // therefore give an angle of exactly zero (copies rate exactly 0.5).
  const double na = l2_norm(a), nb = l2_norm(b);
  double diff2 = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] / na, y = b[i] / nb;
    diff2 += (x - y) * (x - y);
    sum2 += (x + y) * (x + y);
  }
  return 2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2));
}

void require_nonzero(const GradientSet& g, const char* op) {
  if (g.zero_count > 0) {
    throw ValueError(std::string(op) + ": gradient set contains " +
                     std::to_string(g.zero_count) + " zero gradient(s)");
  }
}

void require_k(const GradientSet& g, std::size_t k, const char* op) {
  if (g.k() != k) {
    throw ValueError(std::string(op) + ": expected " + std::to_string(k) + " gradients, got " +
                     std::to_string(g.k()));
  }
}

/// Girard excess of the negative-projection cone of up to three gradients,
/// before normalization: 2pi minus the sum of pairwise angles.
double girard_excess(const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<double>& c) {
  return kTwoPi - (pairwise_angle(a, b) + pairwise_angle(a, c) + pairwise_angle(b, c));
}

}  // namespace

GradientSet::GradientSet(std::vector<std::vector<double>> g) : grads(std::move(g)) {
  if (grads.empty()) throw ValueError("GradientSet: need at least one gradient");
  dim = grads.front().size();
  if (dim == 0) throw ValueError("GradientSet: zero-dimensional gradients");
  is_zero.resize(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != dim) throw ShapeError("GradientSet: inconsistent gradient lengths");
    is_zero[i] = l2_norm(grads[i]) < kZeroNormTol;
    if (is_zero[i]) ++zero_count;
  }
}

RatingEstimate r_single(const GradientSet& g) {
  require_k(g, 1, "r_single");
  require_nonzero(g, "r_single");
  return {0.5, 0.0, 0};
}

RatingEstimate r_pair(const GradientSet& g) {
  require_k(g, 2, "r_pair");
  require_nonzero(g, "r_pair");
  const double theta = pairwise_angle(g.grads[0], g.grads[1]);
  return {(kPi - theta) / kTwoPi, 0.0, 0};
}

RatingEstimate r_triple(const GradientSet& g) {
  require_k(g, 3, "r_triple");
  require_nonzero(g, "r_triple");
  const double excess = girard_excess(g.grads[0], g.grads[1], g.grads[2]);
  return {std::max(0.0, excess) / (2.0 * kTwoPi), 0.0, 0};
}

double quad_triangle_area_sum(const GradientSet& g) {
  require_k(g, 4, "quad_triangle_area_sum");
  require_nonzero(g, "quad_triangle_area_sum");
  double sum = 0.0;
  for (std::size_t skip = 0; skip < 4; ++skip) {
    std::vector<const std::vector<double>*> tri;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i != skip) tri.push_back(&g.grads[i]);
    }
    const double excess = girard_excess(*tri[0], *tri[1], *tri[2]);
    sum += std::clamp(excess, 0.0, kTwoPi);
  }
  return sum;
}

std::vector<std::vector<double>> sample_unit_sphere(std::size_t n, std::size_t count,
                                                    std::uint64_t seed) {
  if (n < 1 || count < 1) throw ValueError("sample_unit_sphere: need n >= 1 and count >= 1");
  std::vector<std::vector<double>> out(count, std::vector<double>(n));
  for (std::size_t t = 0; t < count; ++t) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = normal_at(seed, t, j);
      out[t][j] = v;
      norm2 += v * v;
    }
    // A draw of n standard normals at the origin has probability 0; the
    // retry keeps the normalization well-defined regardless.
    if (norm2 == 0.0) {
      out[t][0] = 1.0;
      norm2 = 1.0;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : out[t]) v *= inv;
  }
  return out;
}

RatingEstimate r_monte_carlo(const GradientSet& g, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ValueError("r_monte_carlo: samples must be positive");
  if (g.zero_count > 0) {
    // v . 0 < 0 holds for no direction, so the intersection is empty.
    return {0.0, 0.0, samples};
  }

  // Reduce to the span of the gradients: Gram-Schmidt in member order gives
  // an orthonormal basis; each member becomes its coordinate vector. The
  // joint law of the projections (w . r_i) matches (v . g_i) because both
  // are zero-mean Gaussians with the Gram matrix as covariance, so the hit
  // probability is unchanged. Appending a member extends the basis without
  // touching earlier coordinates, which keeps the hit set monotone under
  // set growth for a fixed seed.
  const std::size_t k = g.k();
  const std::size_t n = g.dim;
  std::vector<std::vector<double>> basis;
  std::vector<std::vector<double>> reduced(k);
  constexpr double kDependentTol = 1e-10;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> residual = g.grads[i];
    std::vector<double> coords(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) {
      coords[j] = dot(basis[j], g.grads[i]);
      for (std::size_t d = 0; d < n; ++d) residual[d] -= coords[j] * basis[j][d];
    }
    const double res_norm = l2_norm(residual);
    if (res_norm > kDependentTol * l2_norm(g.grads[i])) {
      for (double& v : residual) v /= res_norm;
      coords.push_back(dot(residual, g.grads[i]));
      basis.push_back(std::move(residual));
    }
    reduced[i] = std::move(coords);
  }
  const std::size_t m = basis.size();
  // Flatten member coordinates to m entries each (later basis coords are 0).
  std::vector<double> coords_flat(k * m, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    std::copy(reduced[i].begin(), reduced[i].end(), coords_flat.begin() + i * m);
  }

  std::size_t hits = 0;
  std::vector<double> w(m);
  for (std::size_t t = 0; t < samples; ++t) {
    for (std::size_t j = 0; j < m; ++j) w[j] = normal_at(seed, t, j);
    bool hit = true;
    for (std::size_t i = 0; i < k; ++i) {
      const double* r = &coords_flat[i * m];
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += w[j] * r[j];
      if (!(s < 0.0)) {
        hit = false;
        break;
      }
    }
    hits += hit;
  }

  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  // The true rating never exceeds 0.5; clip binomial noise at the boundary.
  return {std::min(p, 0.5), se, samples};
}

RatingEstimate rating(const GradientSet& g, const RatingOptions& opts) {
  if (opts.policy == RatingPolicy::kExactIfAvailable && g.zero_count == 0) {
    switch (g.k()) {
      case 1: return r_single(g);
      case 2: return r_pair(g);
      case 3: return r_triple(g);
      default: break;
    }
  }
  return r_monte_carlo(g, opts.samples, opts.seed);
}

GdrResult compute_gdr(const Ensemble& ensemble, const Dataset& test_set, const GdrOptions& opts) {
  ensemble.validate();
  if (test_set.size() == 0) throw ValueError("compute_gdr: empty test set");
  if (test_set.input_dim != ensemble.input_dim()) {
    throw ShapeError("compute_gdr: dataset dimension does not match ensemble input");
  }

  std::vector<InputGradientEvaluator> evals;
  evals.reserve(ensemble.size());
  for (const MlpModel& m : ensemble.models) evals.emplace_back(m);

  GdrResult result;
  double total = 0.0;
  for (std::size_t idx = 0; idx < test_set.size(); ++idx) {
    const LabeledExample& ex = test_set.examples[idx];
    if (opts.only_correct) {
      bool all_correct = true;
      for (const MlpModel& m : ensemble.models) {
        if (predict_class(m, ex.pixels) != ex.label) {
          all_correct = false;
          break;
        }
      }
      if (!all_correct) continue;
    }
    std::vector<std::vector<double>> grads;
    grads.reserve(ensemble.size());
    for (auto& ev : evals) grads.push_back(ev.eval(ex.pixels, ex.label));
    GradientSet set(std::move(grads));
    result.zero_gradient_count += set.zero_count;
    RatingOptions per_example = opts.rating;
    per_example.seed = opts.rating.seed ^ static_cast<std::uint64_t>(idx);
    const RatingEstimate r = rating(set, per_example);
    total += r.value;
    result.per_example.push_back(r);
    result.example_indices.push_back(idx);
  }
  if (result.per_example.empty()) {
    throw ValueError("compute_gdr: no examples left after filtering; use a larger test set");
  }
  result.gdr = total / static_cast<double>(result.per_example.size());
  return result;
}

void write_ratings_csv(const std::string& path, const GdrResult& result) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "# schema: gdr-ratings v1\n";
  f << "example_index,rating,std_error,sample_count\n";
  f.precision(17);
  for (std::size_t i = 0; i < result.per_example.size(); ++i) {
    const RatingEstimate& r = result.per_example[i];
    f << result.example_indices[i] << ',' << r.value << ',' << r.std_error << ','
      << r.sample_count << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

}  // namespace gdr
