#pragma once
// Training-sample selection and graph cutting. Large flow graphs are split
// into batches of classification targets; each batch is closed under a fixed
// number of undirected hops so a message-passing network of that depth
// computes, at the targets, exactly what it would compute on the full graph.
// Per-node full-graph degree counts ride along so aggregation normalization
// also matches the full graph.
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bofspot/graph.hpp"

namespace bofspot {

struct SubgraphSample {
  std::string origin;              // provenance tag (e.g. source graph name)
  uint32_t loss_norm = 0;          // labeled target count of the parent graph
  std::vector<uint32_t> nodes;     // parent node ids; local index = position
  std::vector<NodeKind> kinds;     // copied from parent
  std::vector<Label> labels;       // copied from parent
  std::vector<uint8_t> is_sample;  // 1 = classification target, 0 = support
  std::vector<Edge> edges;         // endpoints are local indices
  // full-graph degree per (relation, direction); index = rel*2 + dir,
  // dir 0 = incoming, 1 = outgoing
  std::vector<std::array<uint32_t, 10>> norms;
};

// All vulnerable nodes plus round(neg_ratio * positives) seeded-random benign
// nodes, drawn from nodes that are plausible write targets (memory or
// external kind, at least one incoming data-flow edge). Sorted ascending.
// Empty when the graph has no vulnerable nodes; throws on unlabeled graphs.
std::vector<uint32_t> select_samples(const FlowGraph& g, double neg_ratio, uint64_t seed);

// Splits `samples` into at most `n` contiguous chunks (sizes differ by at
// most one) and closes each chunk under `hops` undirected hops.
std::vector<SubgraphSample> cut(const FlowGraph& g, const std::vector<uint32_t>& samples,
                                uint32_t n, uint32_t hops, const std::string& origin);

// The whole graph as one sample batch with every node a target (inference).
SubgraphSample wrap_full_graph(const FlowGraph& g, const std::string& origin);

std::string serialize_subgraph(const SubgraphSample& s);
SubgraphSample load_subgraph(const std::string& json);

}  // namespace bofspot
