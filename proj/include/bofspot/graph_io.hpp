#pragma once
// Graph wire format (single JSON document). Node records carry only id,
// kind and label; addresses, instruction indices and trace seqs travel in
// the side maps so the graph body stays free of run-specific values.
#include <string>

#include "bofspot/graph.hpp"

namespace bofspot {

std::string serialize_graph(const FlowGraph& g);
FlowGraph load_graph(const std::string& json_text);  // validates before returning

}  // namespace bofspot
