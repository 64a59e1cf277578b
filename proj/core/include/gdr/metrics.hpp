// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gdr/attacks.hpp"
#include "gdr/data_io.hpp"
#include "gdr/network.hpp"

namespace gdr {

struct EvalReport {
  double ensemble_gdr = 0.0;
  std::map<std::string, double> per_model_success;
  double ensemble_success = 0.0;
  std::optional<double> collaboration_rating;
  std::string cr_undefined_reason;  // set when collaboration_rating is empty
  double consensus_accuracy = 0.0;
  AttackConfig attack_config;
  std::size_t filtered_count = 0;  // |T|

  /// A consensus fooling is at least as hard as fooling each member alone.
  void validate() const;
  std::string to_json(int indent = 2) const;
};

/// Indices of examples every member classifies correctly. Errors when the
/// result is empty: the caller needs a larger test set.
std::vector<std::size_t> filter_correct(const Ensemble& ensemble, const Dataset& test_set);

/// The success predicate for one adversary: every member outputs the same
/// incorrect class. Disagreement among fooled members does not count.
bool consensus_fooled(const AttackResult& result);

/// A(E): fraction of filtered examples whose adversary drives every member
/// to the same wrong class. With a singleton ensemble this reduces to the
/// plain misclassification rate.
double adversarial_success(const Ensemble& ensemble, const Dataset& test_set,
                           const std::vector<std::size_t>& filtered, const AttackConfig& config);

/// Diagnostic only (not the consensus definition above): fraction where
/// every member is wrong, regardless of agreement.
double all_fooled_rate(const Ensemble& ensemble, const Dataset& test_set,
                       const std::vector<std::size_t>& filtered, const AttackConfig& config);

/// CR = A(E) / prod A(f). Throws ValueError naming the member when some
/// A(f) is zero (the ratio is undefined).
double collaboration_rating(double ensemble_success, const std::vector<double>& per_model_success,
                            const std::vector<std::string>& names);

/// Fraction of examples all members classify correctly.
double consensus_accuracy(const Ensemble& ensemble, const Dataset& test_set);

/// Full pipeline for one (ensemble, attack) cell: filter, attack the
/// ensemble, attack each member alone with the same config for the CR
/// denominator. `ensemble_gdr` is copied into the report for output rows.
EvalReport evaluate_attack(const Ensemble& ensemble, const Dataset& test_set,
                           const AttackConfig& config, double ensemble_gdr);

/// Least-squares fit of y = a * exp(b * x) on log-transformed y.
/// Requires >= 2 points, all y > 0, and at least two distinct x.
std::pair<double, double> fit_exponential(const std::vector<std::pair<double, double>>& points);

}  // namespace gdr
