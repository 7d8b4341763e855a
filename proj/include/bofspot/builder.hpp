#pragma once
// Turns a stripped execution trace into a labeled data-flow graph. Every
// destination operand defines a new node; reads resolve to the live node(s)
// owning the read bytes/register. With a non-empty shadow map, redzone bytes
// are remapped onto the addressable bytes an overflow would have hit without
// instrumentation, so graphs from instrumented and plain runs of the same
// program are isomorphic node-for-node.
#include <cstdint>
#include <vector>

#include "bofspot/graph.hpp"
#include "bofspot/shadow.hpp"
#include "bofspot/trace.hpp"

namespace bofspot {

// Whether the trace comes with ground truth. Auto infers it from the other
// arguments: marks or shadow present means ground truth. Observed asserts
// that the run was watched end to end, so empty marks mean genuinely benign
// rather than unknown — use it to carry an instrumented run's verdict onto
// the plain trace of the same execution.
enum class Truth : uint8_t { Auto, Observed };

// `marks` are seqs of overflow-flagged records in `stripped` (from
// strip_instrumentation). Labeling: ground truth present -> every node is
// labeled (benign except the marked records' memory destinations); absent ->
// all nodes unlabeled.
FlowGraph build_graph(const Trace& stripped, const std::vector<uint64_t>& marks,
                      const ShadowMap& shadow, Truth truth = Truth::Auto);

}  // namespace bofspot
