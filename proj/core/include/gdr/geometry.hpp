// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdr/data_io.hpp"
#include "gdr/network.hpp"

namespace gdr {

/// The per-input gradients {grad f_i(x)} of the ensemble members with
/// respect to the true-class confidence, all in the same ambient dimension.
struct GradientSet {
  static constexpr double kZeroNormTol = 1e-12;

  std::vector<std::vector<double>> grads;
  std::size_t dim = 0;
  std::vector<bool> is_zero;     // members with L2 norm below kZeroNormTol
  std::size_t zero_count = 0;

  explicit GradientSet(std::vector<std::vector<double>> g);

  std::size_t k() const { return grads.size(); }
};

/// A rating value in [0, 0.5]. Closed forms carry std_error 0; Monte Carlo
/// estimates carry the binomial standard error of the hit fraction.
struct RatingEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t sample_count = 0;
};

/// k = 1: exactly half of all directions project negatively.
RatingEstimate r_single(const GradientSet& g);

/// k = 2 closed form: (pi - angle between the gradients) / 2pi. Gradients
/// are unit-normalized before the dot product so arccos stays in domain.
RatingEstimate r_pair(const GradientSet& g);

/// k = 3 closed form via the spherical triangle cut out on the span:
/// max(0, 2pi - sum of pairwise angles) / 4pi. Exact for degenerate
/// (linearly dependent) triples as well; see the unit tests.
RatingEstimate r_triple(const GradientSet& g);

/// k = 4 training objective: sum over the four 3-subsets of the Girard
/// excess 2pi - sum of pairwise angles, each term clamped to [0, 2pi].
/// Range [0, 8pi]. This is a quantity to maximize during training, not a
/// calibrated rating; use r_monte_carlo for the rating itself.
double quad_triangle_area_sum(const GradientSet& g);

/// Uniform points on S^(n-1): i.i.d. standard normals, normalized. The
/// draw at (seed, index) is a pure function of its arguments.
std::vector<std::vector<double>> sample_unit_sphere(std::size_t n, std::size_t count,
                                                    std::uint64_t seed);

/// Monte Carlo estimate of the fraction of directions v with
/// v . grad_i < 0 for every member. Directions are sampled in the span of
/// the gradients (the hit probability only depends on projections onto the
/// span), which keeps the cost independent of the ambient dimension.
/// Members that are numerically zero make the rating exactly 0: no v
/// satisfies v . 0 < 0.
RatingEstimate r_monte_carlo(const GradientSet& g, std::size_t samples, std::uint64_t seed);

enum class RatingPolicy {
  kExactIfAvailable,  // closed forms for k <= 3 with nonzero members
  kMonteCarlo,
};

struct RatingOptions {
  RatingPolicy policy = RatingPolicy::kExactIfAvailable;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
};

RatingEstimate rating(const GradientSet& g, const RatingOptions& opts);

struct GdrResult {
  double gdr = 0.0;
  std::vector<RatingEstimate> per_example;
  std::vector<std::size_t> example_indices;  // indices into the input dataset
  std::size_t zero_gradient_count = 0;       // diagnostic: zero member gradients seen
};

struct GdrOptions {
  RatingOptions rating;
  bool only_correct = false;  // restrict to examples all members classify correctly
};

/// Mean of the per-example ratings over the test set; gradients are taken
/// with respect to the ground-truth class. Per-example MC streams use
/// seed ^ example-index so results do not depend on evaluation order.
GdrResult compute_gdr(const Ensemble& ensemble, const Dataset& test_set, const GdrOptions& opts);

/// CSV export: example_index, rating, std_error, sample_count.
void write_ratings_csv(const std::string& path, const GdrResult& result);

}  // namespace gdr
