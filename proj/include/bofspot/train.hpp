#pragma once
// Full-batch training loop: weighted cross-entropy, Adam, early stopping on
// validation F1, deterministic for a fixed seed regardless of thread count.
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bofspot/metrics.hpp"
#include "bofspot/model.hpp"

namespace bofspot {

struct OptimConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint32_t epochs = 200;
  uint32_t patience = 20;  // epochs without a new best validation F1
};

struct LossConfig {
  double w_benign = 1.0;
  double w_vuln = 3.0;
};

struct EpochStat {
  uint32_t epoch = 0;  // 1-based
  double loss = 0;
  double val_f1 = 0;
};

struct TrainResult {
  Model model;  // weights from the best validation epoch
  std::vector<EpochStat> history;
  uint32_t best_epoch = 0;
  double best_val_f1 = 0;
};

// Trains on `train`; after each epoch scores `val` (threshold 0.5) and keeps
// the weights of the best epoch. With an empty validation set it runs all
// epochs and keeps the final weights. Throws if the loss turns NaN.
TrainResult train_model(const ModelConfig& mcfg, const OptimConfig& ocfg,
                        const LossConfig& lcfg, const std::vector<SubgraphSample>& train,
                        const std::vector<SubgraphSample>& val, uint64_t seed);

// Vulnerable-class probability for every target node: (parent id, p).
std::vector<std::pair<uint32_t, double>> predict_probs(const Model& m,
                                                       const SubgraphSample& s);

// Decision rule shared everywhere: strictly above one half is vulnerable.
inline bool predict_vulnerable(double p_vuln) { return p_vuln > 0.5; }

// Confusion counts of thresholded predictions against labels over target
// nodes; unlabeled targets are skipped.
Metrics score_batches(const Model& m, const std::vector<SubgraphSample>& batches);

std::string history_csv(const std::vector<EpochStat>& history);  // "epoch,loss,val_f1"

}  // namespace bofspot
