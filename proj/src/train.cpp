#include "bofspot/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bofspot/rng.hpp"

namespace bofspot {

namespace {

Metrics score_prepared(const Model& m, const std::vector<GraphBatch>& batches,
                       Workspace& ws) {
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& b : batches) {
    const Matrix& probs = model_forward(m, b, false, 0, ws);
    for (uint32_t i = 0; i < b.n; i++) {
      if (!b.is_sample[i] || b.labels[i] == Label::Unlabeled) continue;
      bool truth = b.labels[i] == Label::Vulnerable;
      bool called = predict_vulnerable(probs.at(i, 1));
      if (truth && called) tp++;
      else if (!truth && called) fp++;
      else if (truth) fn++;
      else tn++;
    }
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

}  // namespace

TrainResult train_model(const ModelConfig& mcfg, const OptimConfig& ocfg,
                        const LossConfig& lcfg, const std::vector<SubgraphSample>& train,
                        const std::vector<SubgraphSample>& val, uint64_t seed) {
  mcfg.validate();
  if (lcfg.w_benign < 0 || lcfg.w_vuln < 0)
    throw std::runtime_error("train: class weights must be non-negative");
  if (ocfg.epochs == 0) throw std::runtime_error("train: need at least one epoch");
  if (train.empty()) throw std::runtime_error("train: empty training set");

  std::vector<GraphBatch> tb, vb;
  for (const auto& s : train) tb.push_back(prepare_batch(s, mcfg.features));
  for (const auto& s : val) vb.push_back(prepare_batch(s, mcfg.features));
  const std::array<double, 2> wclass{lcfg.w_benign, lcfg.w_vuln};

  Model m = model_init(mcfg, seed);
  Grads grad = zero_grads(m), adam_m = zero_grads(m), adam_v = zero_grads(m);

  TrainResult out;
  Model best = m;
  uint32_t best_epoch = 0;
  double best_f1 = -1.0;
  uint32_t since_best = 0;
  Workspace ws;

  for (uint32_t epoch = 1; epoch <= ocfg.epochs; epoch++) {
    for (auto& layer : grad)
      for (auto& g : layer) g.zero();
    double loss = 0;
    uint64_t edoor = splitmix64(seed + 0x9e3779b97f4a7c15ULL * epoch);
    for (size_t i = 0; i < tb.size(); i++) {
      uint64_t dropout_seed = splitmix64(edoor + i);
      model_forward(m, tb[i], true, dropout_seed, ws);
      loss += model_backward(m, tb[i], wclass, ws, grad);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("train: loss became non-finite at epoch " +
                               std::to_string(epoch));

    double bc1 = 1.0 - std::pow(ocfg.beta1, epoch);
    double bc2 = 1.0 - std::pow(ocfg.beta2, epoch);
    for (size_t l = 0; l < m.w.size(); l++)
      for (size_t s = 0; s < m.w[l].size(); s++) {
        auto& w = m.w[l][s].a;
        auto& g = grad[l][s].a;
        auto& am = adam_m[l][s].a;
        auto& av = adam_v[l][s].a;
        for (size_t k = 0; k < w.size(); k++) {
          am[k] = ocfg.beta1 * am[k] + (1.0 - ocfg.beta1) * g[k];
          av[k] = ocfg.beta2 * av[k] + (1.0 - ocfg.beta2) * g[k] * g[k];
          w[k] -= ocfg.lr * (am[k] / bc1) / (std::sqrt(av[k] / bc2) + ocfg.eps);
        }
      }

    double val_f1 = 0;
    if (!vb.empty()) val_f1 = score_prepared(m, vb, ws).f1;
    out.history.push_back({epoch, loss, val_f1});

    if (vb.empty()) {
      best = m;
      best_epoch = epoch;
      best_f1 = val_f1;
    } else if (val_f1 > best_f1) {
      best = m;
      best_epoch = epoch;
      best_f1 = val_f1;
      since_best = 0;
    } else if (++since_best >= ocfg.patience) {
      break;
    }
  }

  out.model = std::move(best);
  out.best_epoch = best_epoch;
  out.best_val_f1 = best_f1 < 0 ? 0 : best_f1;
  return out;
}

std::vector<std::pair<uint32_t, double>> predict_probs(const Model& m,
                                                       const SubgraphSample& s) {
  GraphBatch b = prepare_batch(s, m.cfg.features);
  Workspace ws;
  const Matrix& probs = model_forward(m, b, false, 0, ws);
  std::vector<std::pair<uint32_t, double>> out;
  for (uint32_t i = 0; i < b.n; i++)
    if (b.is_sample[i]) out.emplace_back(b.parent_ids[i], probs.at(i, 1));
  return out;
}

Metrics score_batches(const Model& m, const std::vector<SubgraphSample>& batches) {
  std::vector<GraphBatch> prepared;
  for (const auto& s : batches) prepared.push_back(prepare_batch(s, m.cfg.features));
  Workspace ws;
  return score_prepared(m, prepared, ws);
}

std::string history_csv(const std::vector<EpochStat>& history) {
  std::ostringstream o;
  o << "epoch,loss,val_f1\n";
  o.precision(17);
  for (const auto& h : history) o << h.epoch << "," << h.loss << "," << h.val_f1 << "\n";
  return o.str();
}

}  // namespace bofspot
