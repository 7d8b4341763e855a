#include <algorithm>
#include <stdexcept>

#include "bofspot/builder.hpp"
#include "bofspot/isa.hpp"
#include "bofspot/machine.hpp"
#include "bofspot/strip.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bofspot;

namespace {

bool has_edge(const FlowGraph& g, uint32_t s, uint32_t d, Relation r) {
  return std::find(g.edges.begin(), g.edges.end(), Edge{s, d, r}) != g.edges.end();
}

// nodes defined by the record with this seq
std::vector<uint32_t> nodes_at_seq(const FlowGraph& g, uint64_t seq) {
  std::vector<uint32_t> out;
  for (const auto& n : g.nodes)
    if (g.maps.seq[n.id] && *g.maps.seq[n.id] == seq) out.push_back(n.id);
  return out;
}

struct Built {
  FlowGraph plain;       // plain trace + marks carried over (labeled, no shadow)
  FlowGraph inst;        // stripped instrumented trace + marks + shadow
  RunResult plain_run;
  RunResult inst_run;
  StripResult stripped;
};

Built build_fixture() {
  Program p = assemble(testfix::kAgesProgram);
  auto input = testfix::encode_ints(testfix::ages_inputs());
  Built b;
  b.plain_run = run(p, input, {.mode = Mode::Plain});
  b.inst_run = run(p, input, {.mode = Mode::Instrumented});
  b.stripped = strip_instrumentation(b.inst_run.trace);
  b.plain = build_graph(b.plain_run.trace, b.stripped.marks, ShadowMap{});
  b.inst = build_graph(b.stripped.trace, b.stripped.marks, b.inst_run.shadow);
  return b;
}

}  // namespace

TEST_CASE("fixture graph encodes the expected local structure") {
  Built b = build_fixture();
  const FlowGraph& g = b.plain;
  CHECK(g.labeled());

  // record 0: sub r7, 148 -> imm node, initial r7, redefined r7
  REQUIRE(g.nodes.size() > 3);
  CHECK(g.nodes[0].kind == NodeKind::Imm);
  CHECK(g.nodes[1].kind == NodeKind::Reg);
  CHECK(g.nodes[2].kind == NodeKind::Reg);
  CHECK_FALSE(g.maps.seq[1].has_value());  // initial register state
  CHECK(has_edge(g, 0, 2, Relation::DataFlow));
  CHECK(has_edge(g, 1, 2, Relation::DataFlow));  // old value feeds the subtract
  CHECK(has_edge(g, 1, 2, Relation::Redefine));  // and is buried by it

  // records 1 and 2 store zeros into i and total: the adjacency edge points
  // from total (lower address) to i (higher address)
  auto i_nodes = nodes_at_seq(g, 1);
  auto total_nodes = nodes_at_seq(g, 2);
  REQUIRE(i_nodes.size() == 2);      // imm 0 + memory node
  REQUIRE(total_nodes.size() == 2);  // imm 0 + memory node
  uint32_t i0 = i_nodes[1], t0 = total_nodes[1];
  CHECK(g.nodes[i0].kind == NodeKind::Mem);
  CHECK(g.nodes[t0].kind == NodeKind::Mem);
  CHECK(has_edge(g, t0, i0, Relation::Adjacency));

  // external input: the syscall destination is an Ext node with no incoming
  // data flow, read by the terminator compare
  bool saw_ext = false;
  for (const auto& n : g.nodes) {
    if (n.kind != NodeKind::Ext) continue;
    saw_ext = true;
    for (const auto& e : g.edges) {
      CHECK((e.dst != n.id || e.rel != Relation::DataFlow));
      if (e.src == n.id && e.rel == Relation::Compare) saw_ext = true;
    }
  }
  CHECK(saw_ext);
}

TEST_CASE("fixture graph marks exactly the overflowing store") {
  Built b = build_fixture();
  for (const FlowGraph* gp : {&b.plain, &b.inst}) {
    const FlowGraph& g = *gp;
    std::vector<uint32_t> vuln;
    for (const auto& n : g.nodes)
      if (n.label == Label::Vulnerable) vuln.push_back(n.id);
    REQUIRE(vuln.size() == 1);
    uint32_t v = vuln[0];
    CHECK(g.nodes[v].kind == NodeKind::Mem);
    CHECK(*g.maps.insn[v] == testfix::kAgesOverflowInsn);

    // incoming: data flow from the r0 register node, redefinition of the old
    // total, adjacency from the last in-bounds buffer slot
    bool dflow_in = false, redef_in = false, adj_in = false;
    // outgoing: the accumulator add right after redefines it again (the
    // only signal visible from the outgoing direction)
    bool redef_out = false, adj_out = false;
    for (const auto& e : g.edges) {
      if (e.dst == v && e.rel == Relation::DataFlow) {
        dflow_in = true;
        CHECK(g.nodes[e.src].kind == NodeKind::Reg);
      }
      if (e.dst == v && e.rel == Relation::Redefine) redef_in = true;
      if (e.dst == v && e.rel == Relation::Adjacency) adj_in = true;
      if (e.src == v && e.rel == Relation::Redefine) {
        redef_out = true;
        CHECK(*g.maps.insn[e.dst] == 10);  // the accumulator add
      }
      if (e.src == v && e.rel == Relation::Adjacency) adj_out = true;
    }
    CHECK(dflow_in);
    CHECK(redef_in);
    CHECK(adj_in);
    CHECK(redef_out);
    CHECK(adj_out);
  }

  // in the instrumented graph the vulnerable node's span is the restored
  // victim (the variable right above the buffer), not the redzone
  std::vector<uint32_t> vuln;
  for (const auto& n : b.inst.nodes)
    if (n.label == Label::Vulnerable) vuln.push_back(n.id);
  CHECK(b.inst.maps.addr[vuln[0]]->addr == b.inst_run.layout.vars[1].lo);
}

TEST_CASE("index and compare relations appear where expected") {
  Built b = build_fixture();
  const FlowGraph& g = b.plain;
  // store [ages+r1*4], r0: index edge from the r1 node into the slot node
  bool idx_into_slot = false;
  for (const auto& e : g.edges) {
    if (e.rel != Relation::Index) continue;
    if (g.nodes[e.src].kind == NodeKind::Reg && g.nodes[e.dst].kind == NodeKind::Mem &&
        g.maps.insn[e.dst] && *g.maps.insn[e.dst] == testfix::kAgesOverflowInsn)
      idx_into_slot = true;
  }
  CHECK(idx_into_slot);

  // cmp [i], 32: compare edges from the i node and the imm node into a
  // flags node; successive compares chain through redefinition
  bool cmp_from_mem = false, cmp_from_imm = false, flags_chain = false;
  for (const auto& e : g.edges) {
    if (e.rel == Relation::Compare) {
      if (g.nodes[e.src].kind == NodeKind::Mem) cmp_from_mem = true;
      if (g.nodes[e.src].kind == NodeKind::Imm) cmp_from_imm = true;
      CHECK(g.nodes[e.dst].kind == NodeKind::Reg);
    }
    if (e.rel == Relation::Redefine && g.nodes[e.src].kind == NodeKind::Reg &&
        g.maps.insn[e.src] && g.maps.insn[e.dst] &&
        (*g.maps.insn[e.src] == 5 || *g.maps.insn[e.src] == 12) &&
        (*g.maps.insn[e.dst] == 5 || *g.maps.insn[e.dst] == 12))
      flags_chain = true;
  }
  CHECK(cmp_from_mem);
  CHECK(cmp_from_imm);
  CHECK(flags_chain);
}

TEST_CASE("instrumented and plain graphs are isomorphic under the identity map") {
  Built b = build_fixture();
  const FlowGraph &p = b.plain, &q = b.inst;
  REQUIRE(p.nodes.size() == q.nodes.size());
  for (size_t i = 0; i < p.nodes.size(); i++) {
    CAPTURE(i);
    CHECK(p.nodes[i].kind == q.nodes[i].kind);
    CHECK(p.nodes[i].label == q.nodes[i].label);
    CHECK(p.maps.insn[i] == q.maps.insn[i]);
    CHECK(p.maps.seq[i] == q.maps.seq[i]);
    CHECK(p.maps.addr[i].has_value() == q.maps.addr[i].has_value());
    if (p.maps.addr[i]) CHECK(p.maps.addr[i]->size == q.maps.addr[i]->size);
  }
  REQUIRE(p.edges.size() == q.edges.size());
  CHECK(p.edges == q.edges);  // same construction order, same triples
}

TEST_CASE("labeling modes") {
  Program p = assemble(testfix::kAgesProgram);
  auto input = testfix::encode_ints(testfix::ages_inputs());
  RunResult plain = run(p, input, {.mode = Mode::Plain});

  // no marks, no shadow: nothing is labeled
  FlowGraph u = build_graph(plain.trace, {}, ShadowMap{});
  CHECK_FALSE(u.labeled());
  for (const auto& n : u.nodes) CHECK(n.label == Label::Unlabeled);

  // a benign instrumented run labels everything benign
  Program ok = assemble(
      ".var buf stack 16\n"
      ".var n stack 4\n"
      "  store [n], 2\n"
      "  store [buf], 1\n"
      "  store [buf+4], 2\n"
      "  load r1, [buf]\n"
      "  halt\n");
  RunResult r = run(ok, {}, {.mode = Mode::Instrumented});
  CHECK(r.points.empty());
  StripResult s = strip_instrumentation(r.trace);
  CHECK(s.marks.empty());
  FlowGraph g = build_graph(s.trace, s.marks, r.shadow);
  CHECK(g.labeled());
  for (const auto& n : g.nodes) CHECK(n.label == Label::Benign);

  // an observed run with empty marks is certified benign, not unknown — this
  // carries a clean instrumented verdict onto the plain trace of the same
  // execution
  RunResult ok_plain = run(ok, {}, {.mode = Mode::Plain});
  FlowGraph c = build_graph(ok_plain.trace, {}, ShadowMap{}, Truth::Observed);
  CHECK(c.labeled());
  for (const auto& n : c.nodes) CHECK(n.label == Label::Benign);
  CHECK(c.nodes.size() == g.nodes.size());
  CHECK(c.edges == g.edges);
}

TEST_CASE("syscall destination chunks merge into one node per contiguous run") {
  Program p = assemble(
      ".var x global 7\n"
      ".var y global 4\n"
      "  input [x], 7\n"
      "  load r1, [x]\n"
      "  halt\n");
  std::vector<uint8_t> in(7, 9);
  RunResult r = run(p, in, {.mode = Mode::Plain});
  // the 7-byte input is traced as 4+2+1 chunks
  REQUIRE(r.trace[0].ops.size() == 3);
  FlowGraph g = build_graph(r.trace, {}, ShadowMap{});
  int ext_count = 0;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Ext) {
      ext_count++;
      CHECK(g.maps.addr[n.id]->size == 7);
    }
  CHECK(ext_count == 1);
}

TEST_CASE("reading uninitialized memory creates per-run initial nodes") {
  Program p = assemble(
      ".var a global 8\n"
      "  load r1, [a]\n"
      "  load r2, [a+4]\n"
      "  halt\n");
  RunResult r = run(p, {}, {.mode = Mode::Plain});
  FlowGraph g = build_graph(r.trace, {}, ShadowMap{});
  // two separate uninitialized reads -> two initial memory nodes, and the
  // second is adjacent to the first
  std::vector<uint32_t> initials;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Mem && !g.maps.seq[n.id]) initials.push_back(n.id);
  REQUIRE(initials.size() == 2);
  CHECK(g.maps.addr[initials[0]]->addr + 4 == g.maps.addr[initials[1]]->addr);
  CHECK(has_edge(g, initials[0], initials[1], Relation::Adjacency));
}

TEST_CASE("graph validation rejects broken structures") {
  FlowGraph g;
  g.nodes = {{0, NodeKind::Mem, Label::Unlabeled}, {1, NodeKind::Mem, Label::Unlabeled}};
  g.maps.insn = {std::nullopt, std::nullopt};
  g.maps.seq = {std::nullopt, std::nullopt};
  g.maps.addr = {AddrSpan{0x1000, 4}, AddrSpan{0x1004, 4}};
  g.edges = {{0, 1, Relation::DataFlow}};
  CHECK_NOTHROW(g.validate());

  FlowGraph s = g;
  s.edges.push_back({0, 0, Relation::Redefine});
  CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("self loops"), std::runtime_error);

  FlowGraph d = g;
  d.edges.push_back({0, 1, Relation::DataFlow});
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("duplicate"), std::runtime_error);

  FlowGraph mixed = g;
  mixed.nodes[0].label = Label::Benign;
  CHECK_THROWS_WITH_AS(mixed.validate(), doctest::Contains("all nodes or none"),
                       std::runtime_error);

  FlowGraph vuln_reg = g;
  vuln_reg.nodes[0].label = Label::Benign;
  vuln_reg.nodes[1].label = Label::Vulnerable;
  vuln_reg.nodes[1].kind = NodeKind::Reg;
  CHECK_THROWS_WITH_AS(vuln_reg.validate(), doctest::Contains("memory nodes"),
                       std::runtime_error);

  FlowGraph vuln_noflow = g;
  vuln_noflow.nodes[0].label = Label::Vulnerable;  // node 0 has no incoming dflow
  vuln_noflow.nodes[1].label = Label::Benign;
  CHECK_THROWS_WITH_AS(vuln_noflow.validate(), doctest::Contains("incoming data flow"),
                       std::runtime_error);

  FlowGraph adj = g;
  adj.edges.push_back({1, 0, Relation::Adjacency});  // points from higher to lower
  CHECK_THROWS_WITH_AS(adj.validate(), doctest::Contains("lower to higher"), std::runtime_error);

  FlowGraph ids = g;
  ids.nodes[1].id = 5;
  CHECK_THROWS_WITH_AS(ids.validate(), doctest::Contains("dense"), std::runtime_error);
}
