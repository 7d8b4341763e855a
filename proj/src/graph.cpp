#include "bofspot/graph.hpp"

#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

namespace bofspot {

char kind_code(NodeKind k) {
  switch (k) {
    case NodeKind::Mem: return 'm';
    case NodeKind::Reg: return 'r';
    case NodeKind::Imm: return 'i';
    case NodeKind::Ext: return 'e';
  }
  return '?';
}

NodeKind kind_from_code(char c) {
  switch (c) {
    case 'm': return NodeKind::Mem;
    case 'r': return NodeKind::Reg;
    case 'i': return NodeKind::Imm;
    case 'e': return NodeKind::Ext;
  }
  throw std::runtime_error(std::string("unknown node kind code '") + c + "'");
}

char relation_code(Relation r) {
  switch (r) {
    case Relation::DataFlow: return 'd';
    case Relation::Adjacency: return 'a';
    case Relation::Index: return 'i';
    case Relation::Redefine: return 'r';
    case Relation::Compare: return 'c';
  }
  return '?';
}

Relation relation_from_code(char c) {
  switch (c) {
    case 'd': return Relation::DataFlow;
    case 'a': return Relation::Adjacency;
    case 'i': return Relation::Index;
    case 'r': return Relation::Redefine;
    case 'c': return Relation::Compare;
  }
  throw std::runtime_error(std::string("unknown relation code '") + c + "'");
}

const char* label_code(Label l) {
  switch (l) {
    case Label::Benign: return "benign";
    case Label::Vulnerable: return "vuln";
    case Label::Unlabeled: break;
  }
  throw std::runtime_error("label_code: unlabeled node has no label code");
}

Label label_from_code(const std::string& s) {
  if (s == "benign") return Label::Benign;
  if (s == "vuln") return Label::Vulnerable;
  throw std::runtime_error("unknown label code '" + s + "'");
}

bool FlowGraph::labeled() const {
  for (const auto& n : nodes)
    if (n.label != Label::Unlabeled) return true;
  return false;
}

void FlowGraph::validate() const {
  auto die = [](const std::string& msg) { throw std::runtime_error("graph: " + msg); };
  const size_t n = nodes.size();
  for (size_t i = 0; i < n; i++)
    if (nodes[i].id != i) die("node ids must be dense and match their position");
  if (maps.insn.size() != n || maps.addr.size() != n || maps.seq.size() != n)
    die("support map sizes must match the node count");

  bool any_labeled = false, any_unlabeled = false;
  for (const auto& node : nodes)
    (node.label == Label::Unlabeled ? any_unlabeled : any_labeled) = true;
  if (any_labeled && any_unlabeled) die("labels must cover all nodes or none");

  std::vector<bool> has_dflow_in(n, false);
  std::set<std::tuple<uint32_t, uint32_t, uint8_t>> seen;
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) die("edge endpoint out of range");
    if (e.src == e.dst) die("self loops are not allowed");
    if (!seen.insert({e.src, e.dst, static_cast<uint8_t>(e.rel)}).second)
      die("duplicate edge (same endpoints and relation)");
    if (e.rel == Relation::DataFlow) has_dflow_in[e.dst] = true;
    if (e.rel == Relation::Adjacency) {
      if (nodes[e.src].kind != NodeKind::Mem || nodes[e.dst].kind != NodeKind::Mem)
        die("adjacency edge endpoints must be memory nodes");
      const auto &a = maps.addr[e.src], &b = maps.addr[e.dst];
      if (!a || !b) die("adjacency edge endpoints must carry address spans");
      if (a->hi() > b->addr) die("adjacency edges must point from lower to higher memory");
    }
  }
  for (const auto& node : nodes) {
    if (node.label != Label::Vulnerable) continue;
    if (node.kind != NodeKind::Mem) die("vulnerable nodes must be memory nodes");
    if (!has_dflow_in[node.id]) die("vulnerable nodes must have incoming data flow");
  }
}

}  // namespace bofspot
