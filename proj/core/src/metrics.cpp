// Copyright 2026 the gdr authors
// SPDX-License-Identifier: Apache-2.0
#include "gdr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gdr/errors.hpp"

using nlohmann::json;

namespace gdr {

void EvalReport::validate() const {
  double min_single = 1.0;
  for (const auto& [name, s] : per_model_success) min_single = std::min(min_single, s);
  if (ensemble_success > min_single + 1e-12) {
    throw ValueError("EvalReport: ensemble success " + std::to_string(ensemble_success) +
                     " exceeds weakest per-model success " + std::to_string(min_single));
  }
}

std::string EvalReport::to_json(int indent) const {
  json j;
  j["schema_version"] = 1;
  j["ensemble_gdr"] = ensemble_gdr;
  j["per_model_success"] = per_model_success;
  j["ensemble_success"] = ensemble_success;
  if (collaboration_rating.has_value()) {
    j["collaboration_rating"] = *collaboration_rating;
  } else {
    j["collaboration_rating"] = nullptr;
    j["cr_undefined_reason"] = cr_undefined_reason;
  }
  j["consensus_accuracy"] = consensus_accuracy;
  j["filtered_count"] = filtered_count;
  j["attack"] = {{"kind", attack_kind_name(attack_config.kind)},
                 {"epsilon", attack_config.epsilon},
                 {"steps", attack_config.steps},
                 {"step_size", attack_config.step_size},
                 {"momentum_decay", attack_config.momentum_decay}};
  return j.dump(indent);
}

std::vector<std::size_t> filter_correct(const Ensemble& ensemble, const Dataset& test_set) {
  ensemble.validate();
  if (test_set.size() == 0) throw ValueError("filter_correct: empty test set");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const LabeledExample& ex = test_set.examples[i];
    bool all = true;
    for (const MlpModel& m : ensemble.models) {
      if (predict_class(m, ex.pixels) != ex.label) {
        all = false;
        break;
      }
    }
    if (all) keep.push_back(i);
  }
  if (keep.empty()) {
    throw ValueError("filter_correct: no example is classified correctly by every member; "
                     "use a larger test set or better-trained models");
  }
  return keep;
}

bool consensus_fooled(const AttackResult& r) {
  const int first = r.per_model_prediction.front();
  if (first == r.original_label) return false;
  for (int p : r.per_model_prediction) {
    if (p != first) return false;
  }
  return true;
}

double adversarial_success(const Ensemble& ensemble, const Dataset& test_set,
                           const std::vector<std::size_t>& filtered, const AttackConfig& config) {
  if (filtered.empty()) throw ValueError("adversarial_success: |T| = 0");
  AttackEngine engine(ensemble);
  std::size_t fooled = 0;
  for (std::size_t i : filtered) {
    const LabeledExample& ex = test_set.examples[i];
    const AttackResult r = engine.run(config, ex.pixels, ex.label);
    fooled += consensus_fooled(r);
  }
  return static_cast<double>(fooled) / static_cast<double>(filtered.size());
}

double all_fooled_rate(const Ensemble& ensemble, const Dataset& test_set,
                       const std::vector<std::size_t>& filtered, const AttackConfig& config) {
  if (filtered.empty()) throw ValueError("all_fooled_rate: |T| = 0");
  AttackEngine engine(ensemble);
  std::size_t fooled = 0;
  for (std::size_t i : filtered) {
    const LabeledExample& ex = test_set.examples[i];
    const AttackResult r = engine.run(config, ex.pixels, ex.label);
    bool all_wrong = true;
    for (int p : r.per_model_prediction) {
      if (p == r.original_label) {
        all_wrong = false;
        break;
      }
    }
    fooled += all_wrong;
  }
  return static_cast<double>(fooled) / static_cast<double>(filtered.size());
}

double collaboration_rating(double ensemble_success, const std::vector<double>& per_model_success,
                            const std::vector<std::string>& names) {
  double denom = 1.0;
  for (std::size_t i = 0; i < per_model_success.size(); ++i) {
    if (per_model_success[i] == 0.0) {
      const std::string who = i < names.size() ? names[i] : "member " + std::to_string(i);
      throw ValueError("collaboration rating undefined: per-model success of " + who +
                       " is zero");
    }
    denom *= per_model_success[i];
  }
  return ensemble_success / denom;
}

double consensus_accuracy(const Ensemble& ensemble, const Dataset& test_set) {
  ensemble.validate();
  if (test_set.size() == 0) throw ValueError("consensus_accuracy: empty test set");
  std::size_t correct = 0;
  for (const LabeledExample& ex : test_set.examples) {
    bool all = true;
    for (const MlpModel& m : ensemble.models) {
      if (predict_class(m, ex.pixels) != ex.label) {
        all = false;
        break;
      }
    }
    correct += all;
  }
  return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

EvalReport evaluate_attack(const Ensemble& ensemble, const Dataset& test_set,
                           const AttackConfig& config, double ensemble_gdr) {
  const std::vector<std::size_t> filtered = filter_correct(ensemble, test_set);

  EvalReport report;
  report.ensemble_gdr = ensemble_gdr;
  report.attack_config = config;
  report.filtered_count = filtered.size();
  report.consensus_accuracy = static_cast<double>(filtered.size()) /
                              static_cast<double>(test_set.size());
  report.ensemble_success = adversarial_success(ensemble, test_set, filtered, config);

  // The Eq-for-one-model denominator: attack each member alone with the
  // same configuration.
  std::vector<double> singles;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const std::string name =
        ensemble.names.empty() ? "model_" + std::to_string(i) : ensemble.names[i];
    Ensemble solo;
    solo.models.push_back(ensemble.models[i]);
    solo.names.push_back(name);
    const double s = adversarial_success(solo, test_set, filtered, config);
    report.per_model_success[name] = s;
    singles.push_back(s);
    names.push_back(name);
  }
  try {
    report.collaboration_rating = collaboration_rating(report.ensemble_success, singles, names);
  } catch (const ValueError& e) {
    report.collaboration_rating.reset();
    report.cr_undefined_reason = e.what();
  }
  report.validate();
  return report;
}

std::pair<double, double> fit_exponential(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ValueError("fit_exponential: need at least 2 points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : points) {
    if (!(y > 0.0)) {
      throw ValueError("fit_exponential: success values must be positive for the log fit");
    }
    sx += x;
    sy += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (std::log(y) - my);
  }
  if (sxx == 0.0) throw ValueError("fit_exponential: all x values identical");
  const double b = sxy / sxx;
  const double a = std::exp(my - b * mx);
  return {a, b};
}

}  // namespace gdr
