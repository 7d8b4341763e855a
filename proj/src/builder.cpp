#include "bofspot/builder.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>

#include "bofspot/isa.hpp"  // kNumRegs

namespace bofspot {

namespace {

struct Builder {
  const ShadowMap& shadow;
  bool labeled;

  FlowGraph g;
  std::map<uint64_t, uint32_t> live_mem;  // byte (remapped) -> owning node
  std::vector<std::vector<uint64_t>> node_bytes;
  std::array<std::optional<uint32_t>, kNumRegs> live_reg;
  std::optional<uint32_t> live_flags;
  std::set<std::tuple<uint32_t, uint32_t, uint8_t>> edge_seen;
  std::map<uint64_t, std::vector<uint32_t>> mem_dst_by_seq;  // record seq -> defined mem nodes

  Builder(const ShadowMap& s, bool lbl) : shadow(s), labeled(lbl) {}

  uint32_t new_node(NodeKind kind, std::optional<uint64_t> insn, std::optional<uint64_t> seq,
                    std::optional<AddrSpan> addr) {
    uint32_t id = static_cast<uint32_t>(g.nodes.size());
    g.nodes.push_back({id, kind, labeled ? Label::Benign : Label::Unlabeled});
    g.maps.insn.push_back(insn);
    g.maps.seq.push_back(seq);
    g.maps.addr.push_back(addr);
    node_bytes.emplace_back();
    return id;
  }

  void add_edge(uint32_t s, uint32_t d, Relation r) {
    if (s == d) throw std::runtime_error("build_graph: internal error: self loop");
    if (edge_seen.insert({s, d, static_cast<uint8_t>(r)}).second) g.edges.push_back({s, d, r});
  }

  // Effective byte list of a memory operand: redzone bytes are replaced by
  // the addressable bytes the access would have hit in an uninstrumented
  // layout (skipping over the zones).
  std::vector<uint64_t> effective_bytes(uint64_t a, uint8_t sz) const {
    std::vector<uint64_t> out;
    out.reserve(sz);
    for (uint64_t i = 0; i < sz; i++) {
      uint64_t x = a + i;
      if (!shadow.empty() && shadow.is_redzone(x)) {
        uint64_t b = x - 1;
        while (shadow.is_redzone(b)) b--;
        x = map_overflow_byte(x, b, shadow);
      }
      out.push_back(x);
    }
    return out;
  }

  // Adjacency links a freshly live memory node to the live memory nodes
  // owning the bytes just beyond its span (zones skipped); edges point from
  // the lower node to the higher one, and only memory nodes participate.
  void link_adjacency(uint32_t id) {
    if (g.nodes[id].kind != NodeKind::Mem) return;
    const AddrSpan& span = *g.maps.addr[id];
    uint64_t below = span.addr - 1;
    if (!shadow.empty() && shadow.is_redzone(below))
      below = restore_adjacent(span.addr, Direction::Lower, shadow);
    auto it = live_mem.find(below);
    if (it != live_mem.end() && g.nodes[it->second].kind == NodeKind::Mem)
      add_edge(it->second, id, Relation::Adjacency);
    uint64_t above = span.hi();
    if (!shadow.empty() && shadow.is_redzone(above))
      above = restore_adjacent(span.hi() - 1, Direction::Higher, shadow);
    it = live_mem.find(above);
    if (it != live_mem.end() && g.nodes[it->second].kind == NodeKind::Mem)
      add_edge(id, it->second, Relation::Adjacency);
  }

  // Resolve a memory read to its owning node(s), creating an initial node
  // for each maximal address-contiguous run of unowned bytes.
  std::vector<uint32_t> resolve_mem_read(const std::vector<uint64_t>& bytes) {
    std::vector<uint32_t> owners;
    auto note_owner = [&](uint32_t id) {
      if (std::find(owners.begin(), owners.end(), id) == owners.end()) owners.push_back(id);
    };
    size_t i = 0;
    while (i < bytes.size()) {
      auto it = live_mem.find(bytes[i]);
      if (it != live_mem.end()) {
        note_owner(it->second);
        i++;
        continue;
      }
      size_t j = i;  // maximal unowned, address-contiguous run
      while (j + 1 < bytes.size() && bytes[j + 1] == bytes[j] + 1 && !live_mem.count(bytes[j + 1]))
        j++;
      AddrSpan span{bytes[i], static_cast<uint32_t>(j - i + 1)};
      uint32_t id = new_node(NodeKind::Mem, std::nullopt, std::nullopt, span);
      for (size_t k = i; k <= j; k++) {
        live_mem[bytes[k]] = id;
        node_bytes[id].push_back(bytes[k]);
      }
      link_adjacency(id);
      note_owner(id);
      i = j + 1;
    }
    return owners;
  }

  uint32_t resolve_reg_read(uint16_t r) {
    if (!live_reg[r]) live_reg[r] = new_node(NodeKind::Reg, std::nullopt, std::nullopt, std::nullopt);
    return *live_reg[r];
  }

  uint32_t resolve_flags_read() {
    if (!live_flags) live_flags = new_node(NodeKind::Reg, std::nullopt, std::nullopt, std::nullopt);
    return *live_flags;
  }

  // Define a new node over memory bytes: redefinition edges from (and burial
  // of) every node owning any of the bytes, then ownership and adjacency.
  uint32_t define_mem(NodeKind kind, const std::vector<uint64_t>& bytes, uint64_t insn,
                      uint64_t seq) {
    AddrSpan span{bytes.front(), static_cast<uint32_t>(bytes.back() - bytes.front() + 1)};
    uint32_t id = new_node(kind, insn, seq, span);
    std::vector<uint32_t> victims;
    for (uint64_t b : bytes) {
      auto it = live_mem.find(b);
      if (it != live_mem.end() &&
          std::find(victims.begin(), victims.end(), it->second) == victims.end())
        victims.push_back(it->second);
    }
    for (uint32_t v : victims) {
      add_edge(v, id, Relation::Redefine);
      for (uint64_t b : node_bytes[v]) {
        auto it = live_mem.find(b);
        if (it != live_mem.end() && it->second == v) live_mem.erase(it);
      }
    }
    for (uint64_t b : bytes) {
      live_mem[b] = id;
      node_bytes[id].push_back(b);
    }
    link_adjacency(id);
    return id;
  }

  uint32_t define_reg(uint16_t r, uint64_t insn, uint64_t seq) {
    uint32_t id = new_node(NodeKind::Reg, insn, seq, std::nullopt);
    if (live_reg[r]) add_edge(*live_reg[r], id, Relation::Redefine);
    live_reg[r] = id;
    return id;
  }

  uint32_t define_flags(uint64_t insn, uint64_t seq) {
    uint32_t id = new_node(NodeKind::Reg, insn, seq, std::nullopt);
    if (live_flags) add_edge(*live_flags, id, Relation::Redefine);
    live_flags = id;
    return id;
  }

  void process(const TraceRecord& rec) {
    if (rec.kind == RecordKind::Marker)
      throw std::runtime_error("build_graph: marker record in stripped trace");
    if (rec.kind == RecordKind::Fault) return;  // the access never completed

    const size_t nops = rec.ops.size();
    // per-operand resolution: reads -> live nodes, writes -> the new node
    std::vector<std::vector<uint32_t>> op_nodes(nops);

    // reads first, in operand order
    for (size_t i = 0; i < nops; i++) {
      const TraceOp& op = rec.ops[i];
      if (op.role == OpRole::Dst) continue;
      switch (op.loc.t) {
        case LocKind::Mem:
          op_nodes[i] = resolve_mem_read(effective_bytes(op.loc.a, op.loc.sz));
          break;
        case LocKind::Reg: op_nodes[i] = {resolve_reg_read(op.loc.r)}; break;
        case LocKind::Flags: op_nodes[i] = {resolve_flags_read()}; break;
        case LocKind::Imm:
          op_nodes[i] = {new_node(NodeKind::Imm, rec.iaddr, rec.seq, std::nullopt)};
          break;
      }
    }

    // destinations: syscall writes become external-input nodes, and
    // address-contiguous destination chunks merge into one node
    NodeKind mem_kind = rec.kind == RecordKind::Syscall ? NodeKind::Ext : NodeKind::Mem;
    for (size_t i = 0; i < nops; i++) {
      const TraceOp& op = rec.ops[i];
      if (op.role != OpRole::Dst) continue;
      switch (op.loc.t) {
        case LocKind::Mem: {
          std::vector<uint64_t> bytes = effective_bytes(op.loc.a, op.loc.sz);
          size_t run_end = i;
          while (run_end + 1 < nops && rec.ops[run_end + 1].role == OpRole::Dst &&
                 rec.ops[run_end + 1].loc.t == LocKind::Mem) {
            auto next = effective_bytes(rec.ops[run_end + 1].loc.a, rec.ops[run_end + 1].loc.sz);
            if (next.front() != bytes.back() + 1) break;
            bytes.insert(bytes.end(), next.begin(), next.end());
            run_end++;
          }
          uint32_t id = define_mem(mem_kind, bytes, rec.iaddr, rec.seq);
          for (size_t k = i; k <= run_end; k++) op_nodes[k] = {id};
          mem_dst_by_seq[rec.seq].push_back(id);
          i = run_end;
          break;
        }
        case LocKind::Reg: op_nodes[i] = {define_reg(op.loc.r, rec.iaddr, rec.seq)}; break;
        case LocKind::Flags: op_nodes[i] = {define_flags(rec.iaddr, rec.seq)}; break;
        case LocKind::Imm:
          throw std::runtime_error("build_graph: immediate destination operand");
      }
    }

    for (const auto& [s, d] : rec.flow.direct)
      for (uint32_t sn : op_nodes.at(s))
        for (uint32_t dn : op_nodes.at(d)) add_edge(sn, dn, Relation::DataFlow);
    for (const auto& [a, m] : rec.flow.addr)
      for (uint32_t an : op_nodes.at(a))
        for (uint32_t mn : op_nodes.at(m)) add_edge(an, mn, Relation::Index);
    for (const auto& [c, f] : rec.flow.cmp)
      for (uint32_t cn : op_nodes.at(c))
        for (uint32_t fn : op_nodes.at(f)) add_edge(cn, fn, Relation::Compare);
  }
};

}  // namespace

FlowGraph build_graph(const Trace& stripped, const std::vector<uint64_t>& marks,
                      const ShadowMap& shadow, Truth truth) {
  Builder b(shadow, truth == Truth::Observed || !(marks.empty() && shadow.empty()));
  for (const auto& rec : stripped) b.process(rec);
  for (uint64_t mark : marks) {
    auto it = b.mem_dst_by_seq.find(mark);
    if (it == b.mem_dst_by_seq.end())
      throw std::runtime_error("build_graph: mark " + std::to_string(mark) +
                               " does not name a record with a memory destination");
    for (uint32_t id : it->second) b.g.nodes[id].label = Label::Vulnerable;
  }
  b.g.validate();
  return b.g;
}

}  // namespace bofspot
