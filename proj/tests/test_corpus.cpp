#include <filesystem>
#include <set>

#include "bofspot/builder.hpp"
#include "bofspot/corpus.hpp"
#include "bofspot/strip.hpp"
#include "doctest.h"

using namespace bofspot;

namespace {

CorpusConfig small_cfg() {
  CorpusConfig cfg;
  cfg.seed = 42;
  cfg.count = 30;
  cfg.vulnerable_fraction = 0.5;
  cfg.float_fraction = 0.3;
  cfg.double_overflow_fraction = 0.4;
  return cfg;
}

bool same_entry(const CorpusEntry& a, const CorpusEntry& b) {
  if (a.name != b.name || a.region != b.region || a.input != b.input ||
      a.float_first != b.float_first || a.is_vulnerable != b.is_vulnerable)
    return false;
  if (disassemble(a.program) != disassemble(b.program)) return false;
  if (a.ground_truth.size() != b.ground_truth.size()) return false;
  for (size_t i = 0; i < a.ground_truth.size(); i++)
    if (!(a.ground_truth[i] == b.ground_truth[i])) return false;
  if (a.var_spans.size() != b.var_spans.size()) return false;
  for (size_t i = 0; i < a.var_spans.size(); i++)
    if (a.var_spans[i].lo != b.var_spans[i].lo || a.var_spans[i].size != b.var_spans[i].size)
      return false;
  return true;
}

}  // namespace

TEST_CASE("corpus generation is deterministic for a fixed seed") {
  auto a = generate_corpus(small_cfg());
  auto b = generate_corpus(small_cfg());
  REQUIRE(a.size() == 30);
  REQUIRE(b.size() == 30);
  for (size_t i = 0; i < a.size(); i++) CHECK(same_entry(a[i], b[i]));

  auto cfg2 = small_cfg();
  cfg2.seed = 43;
  auto c = generate_corpus(cfg2);
  size_t differing = 0;
  for (size_t i = 0; i < a.size(); i++)
    if (!same_entry(a[i], c[i])) differing++;
  CHECK(differing > 0);
}

TEST_CASE("corpus hits the requested label balance and covers every region") {
  auto entries = generate_corpus(small_cfg());
  size_t vuln = 0;
  std::set<Region> regions;
  for (const auto& e : entries) {
    if (e.is_vulnerable) vuln++;
    regions.insert(e.region);
  }
  CHECK(vuln == 15);
  CHECK(regions.size() == 3);
}

TEST_CASE("ground truth points at in-program store instructions on scalar vars") {
  auto entries = generate_corpus(small_cfg());
  bool saw_multi_point = false;
  bool saw_two_iaddrs = false;
  for (const auto& e : entries) {
    CHECK(e.is_vulnerable == !e.ground_truth.empty());
    CHECK(e.var_spans.size() == e.program.vars.size());
    std::set<uint64_t> iaddrs;
    for (const auto& p : e.ground_truth) {
      REQUIRE(p.iaddr < e.program.insns.size());
      CHECK(e.program.insns[p.iaddr].op == Opcode::Store);
      CHECK(p.len == 4);
      iaddrs.insert(p.iaddr);
      // the corrupted byte must fall inside a declared 4-byte scalar
      bool in_scalar = false;
      for (const auto& v : e.var_spans)
        if (v.size == 4 && v.contains(p.corrupted_addr)) in_scalar = true;
      CHECK(in_scalar);
    }
    if (e.ground_truth.size() > 1) saw_multi_point = true;
    if (iaddrs.size() > 1) saw_two_iaddrs = true;
  }
  CHECK(saw_multi_point);
  CHECK(saw_two_iaddrs);  // some program overflows two distinct buffers
}

TEST_CASE("plain and instrumented replays agree on machine state") {
  auto entries = generate_corpus(small_cfg());
  size_t checked = 0;
  for (size_t i = 0; i < entries.size(); i += 7) {
    const auto& e = entries[i];
    RunOptions plain{.mode = Mode::Plain};
    RunOptions inst{.mode = Mode::Instrumented, .float_first_insn = e.float_first};
    Machine mp(e.program, e.input, plain);
    Machine mi(e.program, e.input, inst);
    while (!mp.done()) mp.step();
    while (!mi.done()) mi.step();
    REQUIRE_FALSE(mp.faulted());
    REQUIRE_FALSE(mi.faulted());
    for (int r = 0; r < kNumRegs; r++) CHECK(mp.reg(r) == mi.reg(r));
    CHECK(mp.flags() == mi.flags());
    checked++;
  }
  CHECK(checked >= 4);
}

TEST_CASE("stripping an instrumented corpus trace recovers the plain graph") {
  auto cfg = small_cfg();
  cfg.count = 12;
  auto entries = generate_corpus(cfg);
  bool checked_float = false;
  for (size_t i = 0; i < entries.size(); i += 3) {
    const auto& e = entries[i];
    RunResult plain = run(e.program, e.input, {.mode = Mode::Plain});
    RunOptions iopt{.mode = Mode::Instrumented, .float_first_insn = e.float_first};
    RunResult inst = run(e.program, e.input, iopt);
    StripResult sr = strip_instrumentation(inst.trace);
    REQUIRE(sr.trace.size() == plain.trace.size());
    CHECK(sr.marks.size() == e.ground_truth.size());

    FlowGraph gp = build_graph(plain.trace, {}, {});
    FlowGraph gi = build_graph(sr.trace, sr.marks, inst.shadow);
    REQUIRE(gp.nodes.size() == gi.nodes.size());
    REQUIRE(gp.edges.size() == gi.edges.size());
    for (size_t n = 0; n < gp.nodes.size(); n++) CHECK(gp.nodes[n].kind == gi.nodes[n].kind);
    CHECK(gp.edges == gi.edges);
    if (e.is_vulnerable) {
      size_t vuln_nodes = 0;
      for (const auto& nd : gi.nodes)
        if (nd.label == Label::Vulnerable) vuln_nodes++;
      CHECK(vuln_nodes == e.ground_truth.size());
    }
    if (e.float_first) checked_float = true;
  }
  CHECK(checked_float);
}

TEST_CASE("corpus survives a save/load round trip") {
  auto cfg = small_cfg();
  cfg.count = 6;
  auto entries = generate_corpus(cfg);
  std::string dir = (std::filesystem::temp_directory_path() / "bofspot_corpus_rt").string();
  std::filesystem::remove_all(dir);
  save_corpus(dir, entries);
  auto loaded = load_corpus(dir);
  REQUIRE(loaded.size() == entries.size());
  for (size_t i = 0; i < entries.size(); i++) CHECK(same_entry(entries[i], loaded[i]));
  std::filesystem::remove_all(dir);
}
