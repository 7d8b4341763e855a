#pragma once
// Relational message-passing classifier over flow graphs, with reverse-mode
// gradients written out by hand. Three variants share one engine:
//   - brgcn: per-relation weights for incoming AND outgoing messages
//   - rgcn: per-relation weights, incoming messages only
//   - convgnn: relation-blind (one weight per direction)
// Per layer: z_v = h_v W0 + sum over active (relation, direction) buckets of
// (1/c) * sum of neighbor states * W_bucket, where c is the node's FULL-graph
// degree in that bucket (carried by the subgraph cutter), followed by ReLU and
// inverted dropout on hidden layers and a row softmax at the output.
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bofspot/cut.hpp"

namespace bofspot {

enum class Variant : uint8_t { Brgcn = 0, Rgcn = 1, ConvGnn = 2 };
enum class FeatureMode : uint8_t { KindOneHot = 0, NodeIdHash = 1 };

const char* variant_code(Variant v);        // "brgcn" / "rgcn" / "convgnn"
Variant variant_from_code(const std::string& s);
const char* feature_code(FeatureMode f);    // "kind" / "nodeid"
FeatureMode feature_from_code(const std::string& s);
uint32_t feature_dim(FeatureMode f);        // 4 / 64

struct ModelConfig {
  Variant variant = Variant::Brgcn;
  std::vector<uint32_t> dims = {4, 16, 16, 2};  // feature, hidden..., 2 classes
  double dropout = 0.1;
  FeatureMode features = FeatureMode::KindOneHot;
  uint32_t steps() const { return static_cast<uint32_t>(dims.size()) - 1; }
  void validate() const;  // throws on inconsistent dims/dropout
};

struct Matrix {
  uint32_t rows = 0, cols = 0;
  std::vector<double> a;  // row-major
  Matrix() = default;
  Matrix(uint32_t r, uint32_t c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(uint32_t r, uint32_t c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(uint32_t r, uint32_t c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(uint32_t r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(uint32_t r) const { return a.data() + static_cast<size_t>(r) * cols; }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
  bool operator==(const Matrix&) const = default;
};

// Weight layout: w[layer][0] is the self weight; message buckets follow.
//   brgcn:   w[layer][1 + rel*2 + dir]     (dir 0 = incoming, 1 = outgoing)
//   rgcn:    w[layer][1 + rel]             (incoming only)
//   convgnn: w[layer][1 + dir]
// Bucket index -1 means the variant carries no such messages.
int msg_slot(Variant v, int rel, int dir);
uint32_t slots_per_layer(Variant v);

struct Model {
  ModelConfig cfg;
  std::vector<std::vector<Matrix>> w;
};

Model model_init(const ModelConfig& cfg, uint64_t seed);  // Glorot-uniform

using Grads = std::vector<std::vector<Matrix>>;
Grads zero_grads(const Model& m);

// A subgraph preprocessed for the kernels: features plus per-(node, relation)
// neighbor lists in both directions, in stable order.
struct GraphBatch {
  uint32_t n = 0;
  Matrix feats;
  std::vector<uint32_t> parent_ids;
  std::vector<uint8_t> is_sample;
  std::vector<Label> labels;
  uint32_t loss_norm = 0;
  std::vector<std::array<uint32_t, 10>> norms;  // full-graph degrees, rel*2+dir
  // group g = node*5 + relation; in_src[in_off[g]..in_off[g+1]) are sources
  std::vector<uint32_t> in_off, in_src;
  std::vector<uint32_t> out_off, out_dst;
};

GraphBatch prepare_batch(const SubgraphSample& s, FeatureMode features);

// Per-call caches so backward can reuse forward intermediates.
struct Workspace {
  std::vector<Matrix> h;       // h[l] = layer input states, h[0] = features
  std::vector<Matrix> z;       // pre-activation per layer
  std::vector<std::vector<Matrix>> msg;  // aggregated neighbor sums per bucket
  std::vector<Matrix> mask;    // dropout masks (training only)
  Matrix probs;                // n x 2 row softmax of the last layer
};

// Runs the network; returns row-wise class probabilities in ws.probs.
// Dropout is applied only when training=true, with its own deterministic
// stream derived from dropout_seed.
const Matrix& model_forward(const Model& m, const GraphBatch& b, bool training,
                            uint64_t dropout_seed, Workspace& ws);

// Weighted cross-entropy over labeled target nodes, scaled by 1/loss_norm;
// accumulates parameter gradients into g and returns the loss contribution.
// Must be called right after model_forward on the same workspace.
double model_backward(const Model& m, const GraphBatch& b,
                      const std::array<double, 2>& class_weights, Workspace& ws, Grads& g);

// Loss only (no gradients), same scaling; probs from a prior forward.
double model_loss(const GraphBatch& b, const std::array<double, 2>& class_weights,
                  const Matrix& probs);

std::string serialize_model(const Model& m);
Model load_model(const std::string& json);

// Slow single-threaded evaluator using explicit dense normalized adjacency
// matrices; exists to cross-check the sparse kernels.
Matrix dense_reference_forward(const Model& m, const SubgraphSample& s);

}  // namespace bofspot
