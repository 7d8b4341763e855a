#include <stdexcept>

#include "bofspot/builder.hpp"
#include "bofspot/graph_io.hpp"
#include "bofspot/isa.hpp"
#include "bofspot/machine.hpp"
#include "bofspot/strip.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bofspot;

TEST_CASE("graph serialization round-trips byte-identically") {
  Program p = assemble(testfix::kAgesProgram);
  auto input = testfix::encode_ints(testfix::ages_inputs());
  RunResult r = run(p, input, {.mode = Mode::Instrumented});
  StripResult s = strip_instrumentation(r.trace);
  FlowGraph g = build_graph(s.trace, s.marks, r.shadow);

  std::string j1 = serialize_graph(g);
  FlowGraph h = load_graph(j1);
  CHECK(serialize_graph(h) == j1);
  REQUIRE(h.nodes.size() == g.nodes.size());
  REQUIRE(h.edges.size() == g.edges.size());
  CHECK(h.edges == g.edges);
  for (size_t i = 0; i < g.nodes.size(); i++) {
    CHECK(h.nodes[i].kind == g.nodes[i].kind);
    CHECK(h.nodes[i].label == g.nodes[i].label);
    CHECK(h.maps.insn[i] == g.maps.insn[i]);
    CHECK(h.maps.addr[i] == g.maps.addr[i]);
    CHECK(h.maps.seq[i] == g.maps.seq[i]);
  }
}

TEST_CASE("tiny graph serializes to the pinned shape") {
  FlowGraph g;
  g.nodes = {{0, NodeKind::Imm, Label::Benign}, {1, NodeKind::Mem, Label::Vulnerable}};
  g.maps.insn = {std::nullopt, 9};
  g.maps.addr = {std::nullopt, AddrSpan{4096, 4}};
  g.maps.seq = {std::nullopt, 12};
  g.edges = {{0, 1, Relation::DataFlow}};
  CHECK(serialize_graph(g) ==
        "{\"nodes\":[{\"id\":0,\"kind\":\"i\",\"label\":\"benign\"},"
        "{\"id\":1,\"kind\":\"m\",\"label\":\"vuln\"}],"
        "\"edges\":[{\"s\":0,\"d\":1,\"rel\":\"d\"}],"
        "\"maps\":{\"insn\":[null,9],\"addr\":[null,[4096,4]],\"seq\":[null,12]}}");
}

TEST_CASE("loading runs validation") {
  // vulnerable node with no incoming data flow
  const char* bad =
      "{\"nodes\":[{\"id\":0,\"kind\":\"m\",\"label\":\"vuln\"}],"
      "\"edges\":[],\"maps\":{\"insn\":[null],\"addr\":[[4096,4]],\"seq\":[null]}}";
  CHECK_THROWS_WITH_AS(load_graph(bad), doctest::Contains("incoming data flow"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(load_graph("{"), doctest::Contains("malformed"), std::runtime_error);
  CHECK_THROWS_WITH_AS(load_graph("{\"nodes\":[]}"), doctest::Contains("schema"),
                       std::runtime_error);
}
