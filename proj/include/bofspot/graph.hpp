#pragma once
// Labeled multi-relational data-flow graph. Nodes are value instances
// (a memory write, a register write, an immediate use, an external input);
// edges carry one of five relations: data flow, memory adjacency, index
// (address computation), redefinition, and comparison.
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bofspot {

enum class NodeKind : uint8_t { Mem, Reg, Imm, Ext };
enum class Relation : uint8_t { DataFlow = 0, Adjacency = 1, Index = 2, Redefine = 3, Compare = 4 };
enum class Label : uint8_t { Unlabeled, Benign, Vulnerable };

inline constexpr int kNumRelations = 5;

struct Node {
  uint32_t id = 0;
  NodeKind kind = NodeKind::Mem;
  Label label = Label::Unlabeled;
};

struct Edge {
  uint32_t src = 0;
  uint32_t dst = 0;
  Relation rel = Relation::DataFlow;
  bool operator==(const Edge&) const = default;
};

struct AddrSpan {
  uint64_t addr = 0;
  uint32_t size = 0;
  uint64_t hi() const { return addr + size; }
  bool contains(uint64_t a) const { return a >= addr && a < hi(); }
  bool operator==(const AddrSpan&) const = default;
};

// Side tables keyed by node id. Graph serialization keeps nodes free of
// addresses and opcodes; these maps carry what localization needs.
struct SupportMaps {
  std::vector<std::optional<uint64_t>> insn;  // defining instruction index
  std::vector<std::optional<AddrSpan>> addr;  // memory bytes the node occupies
  std::vector<std::optional<uint64_t>> seq;   // defining trace record seq
};

struct FlowGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  SupportMaps maps;

  bool labeled() const;  // true iff nodes carry benign/vulnerable labels
  // Structural invariants: dense ids, no self loops, deduplicated edges,
  // consistent labeling, vulnerable nodes are memory nodes with incoming
  // data flow, adjacency edges connect ordered non-overlapping memory nodes.
  void validate() const;  // throws std::runtime_error naming the violation
};

char kind_code(NodeKind k);
NodeKind kind_from_code(char c);
char relation_code(Relation r);
Relation relation_from_code(char c);
const char* label_code(Label l);  // "benign" / "vuln"; Unlabeled has no code
Label label_from_code(const std::string& s);

}  // namespace bofspot
