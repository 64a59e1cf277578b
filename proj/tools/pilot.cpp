// Scratch experiment driver used while calibrating the desk-scale presets.
#include <chrono>
#include <cstdio>
#include <vector>

#include "gdr/attacks.hpp"
#include "gdr/data_io.hpp"
#include "gdr/geometry.hpp"
#include "gdr/metrics.hpp"
#include "gdr/network.hpp"
#include "gdr/trainer.hpp"

using namespace gdr;
using Clock = std::chrono::steady_clock;

static double secs(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 256;
  const double spread = argc > 2 ? std::atof(argv[2]) : 0.25;
  const int hidden1 = argc > 3 ? std::atoi(argv[3]) : 256;
  const int hidden2 = argc > 4 ? std::atoi(argv[4]) : 128;
  const int epochs = argc > 5 ? std::atoi(argv[5]) : 3;
  const double beta = argc > 6 ? std::atof(argv[6]) : 0.5;

  std::printf("n=%d spread=%.3f arch=%d-%d epochs=%d+%d beta=%.2f\n", n, spread, hidden1, hidden2,
              epochs, epochs, beta);
  Dataset train = synthetic_blobs(n, 10, 400, spread, 1);
  Dataset eval = synthetic_blobs(n, 10, 100, spread, 2);
  std::printf("train=%zu eval=%zu\n", train.size(), eval.size());

  auto make_init = [&](std::uint64_t s) {
    Ensemble e;
    for (int i = 0; i < 3; ++i) {
      e.models.push_back(init_mlp({n, hidden1, hidden2, 10}, s + i));
      e.names.push_back("m" + std::to_string(i));
    }
    return e;
  };

  // Baseline: no gradient loss.
  TrainConfig base_cfg;
  base_cfg.phases = {{2 * epochs, GradLossKind::kNone}};
  base_cfg.seed = 11;
  base_cfg.gdr_probe_examples = 32;
  auto t0 = Clock::now();
  auto [base, base_log] = train_ensemble(make_init(1000), base_cfg, train);
  auto t1 = Clock::now();
  GdrOptions gopt;
  const GdrResult base_gdr = compute_gdr(base, eval, gopt);
  std::printf("baseline: %.1fs acc=%.3f gdr=%.4f\n", secs(t0, t1),
              consensus_accuracy(base, eval), base_gdr.gdr);

  // Regularized: cosine then angle-sum, same seeds.
  TrainConfig reg_cfg = base_cfg;
  reg_cfg.beta = beta;
  reg_cfg.phases = {{epochs, GradLossKind::kCosineMaxPairwise},
                    {epochs, GradLossKind::kAngleSum}};
  t0 = Clock::now();
  auto [reg, reg_log] = train_ensemble(make_init(1000), reg_cfg, train);
  t1 = Clock::now();
  const GdrResult reg_gdr = compute_gdr(reg, eval, gopt);
  std::printf("regularized: %.1fs acc=%.3f gdr=%.4f\n", secs(t0, t1),
              consensus_accuracy(reg, eval), reg_gdr.gdr);
  for (const EpochStats& e : reg_log.epochs) {
    std::printf("  epoch %d: acc=%.3f img=%.4f grad=%.4f gdr=%.4f\n", e.epoch,
                e.consensus_accuracy, e.image_loss, e.grad_loss, e.gdr_estimate);
  }

  double lo = 0, hi = 0;
  for (const RatingEstimate& r : base_gdr.per_example) hi += r.value < 0.05;
  for (const RatingEstimate& r : reg_gdr.per_example) lo += r.value < 0.05;
  std::printf("mass below 0.05: reg=%.3f base=%.3f\n",
              lo / reg_gdr.per_example.size(), hi / base_gdr.per_example.size());

  // FGSM sweep on both ensembles.
  Dataset attack_set = subset(eval, 200, 3, false);
  for (double eps : {0.1, 0.2, 0.3}) {
    const EvalReport rb = evaluate_attack(base, attack_set, AttackConfig::fgsm(eps), base_gdr.gdr);
    const EvalReport rr = evaluate_attack(reg, attack_set, AttackConfig::fgsm(eps), reg_gdr.gdr);
    std::printf("fgsm eps=%.2f: base succ=%.3f (T=%zu) reg succ=%.3f (T=%zu)\n", eps,
                rb.ensemble_success, rb.filtered_count, rr.ensemble_success, rr.filtered_count);
  }
  auto t2 = Clock::now();
  std::printf("attack total %.1fs\n", secs(t1, t2));
  return 0;
}
