#pragma once
// End-to-end evaluation: k-fold cross-validation over a corpus of labeled
// flow graphs, overflow-point localization from node predictions, detection
// scoring against replay ground truth, and the model-family ablation grid.
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bofspot/corpus.hpp"
#include "bofspot/graph.hpp"
#include "bofspot/metrics.hpp"
#include "bofspot/train.hpp"

namespace bofspot {

struct PipelineConfig {
  uint64_t seed = 1;
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  double neg_ratio = 3.0;   // benign targets sampled per vulnerable node
  uint32_t subgraphs = 1;   // cut batches per graph
  uint32_t hops = 3;        // closure radius; must equal model.steps()
  double val_fraction = 0.15;  // holdout share used by the ablation split
  void validate() const;
};

std::string serialize_pipeline_config(const PipelineConfig& cfg);
// Lenient: missing keys keep their defaults; unknown values throw.
PipelineConfig load_pipeline_config(const std::string& json);

// A graph ready for evaluation, with replay ground truth in the same
// (instrumented) address space the graph's spans use.
struct GraphBundle {
  std::string name;
  FlowGraph graph;
  std::vector<OverflowPoint> truth;
  std::vector<VarSpan> var_spans;
};

// Replays the program instrumented, strips the trace, builds the graph.
GraphBundle bundle_from_entry(const CorpusEntry& e);

// One reported overflow: the writing instruction plus the corrupted variable.
struct Finding {
  uint64_t iaddr = 0;
  uint64_t corrupted_addr = 0;
  std::vector<uint32_t> node_ids;
  double confidence = 0;
};

// Groups predicted-vulnerable memory nodes by (instruction, address).
std::vector<Finding> localize(const FlowGraph& g,
                              const std::vector<std::pair<uint32_t, double>>& probs);
std::string findings_json(const std::vector<Finding>& findings);

struct DetectionStats {
  uint64_t truths = 0;
  uint64_t detected = 0;       // some finding names the right instruction
  uint64_t addr_correct = 0;   // ... and a corrupted address in the right variable
  uint64_t false_findings = 0; // findings pointing at instructions with no overflow
};

DetectionStats score_detection(const std::vector<Finding>& findings,
                               const std::vector<OverflowPoint>& truth,
                               const std::vector<VarSpan>& spans);

struct FoldResult {
  Metrics metrics;
  DetectionStats detection;
};

struct CvResult {
  std::vector<FoldResult> folds;
  Metrics mean;              // rates averaged over folds, counts summed
  DetectionStats detection;  // summed over folds
};

// Shuffles graphs by seed into `folds` near-equal folds; fold f tests on f,
// validates on (f+1) mod folds, trains on the rest. Needs folds >= 3.
// `workers` caps the number of folds trained concurrently.
CvResult cross_validate(const std::vector<GraphBundle>& bundles, const PipelineConfig& cfg,
                        uint32_t folds, uint32_t workers = 1);

std::string serialize_cv(const CvResult& r);

struct AblationRow {
  std::string name;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Six configurations scored on one shared holdout split per seed (a quarter
// of the graphs test, val_fraction validation), averaged across seeds:
// full model, incoming-only, relation-blind, data-flow-edges-only input,
// node-identity features, and training on a single vulnerable program.
// `workers` caps the number of (seed, row) cells trained concurrently.
std::vector<AblationRow> run_ablations(const std::vector<GraphBundle>& bundles,
                                       const PipelineConfig& cfg,
                                       const std::vector<uint64_t>& seeds,
                                       uint32_t workers = 1);

std::string ablation_csv(const std::vector<AblationRow>& rows);

// Copy of the graph keeping only data-flow edges (ablation input).
FlowGraph dataflow_only(const FlowGraph& g);

}  // namespace bofspot
