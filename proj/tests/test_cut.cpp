#include <algorithm>
#include <map>
#include <set>

#include "bofspot/builder.hpp"
#include "bofspot/cut.hpp"
#include "bofspot/machine.hpp"
#include "bofspot/strip.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace bofspot;

namespace {

FlowGraph labeled_fixture_graph() {
  Program p = assemble(testfix::kAgesProgram);
  auto input = testfix::encode_ints(testfix::ages_inputs());
  RunResult r = run(p, input, {.mode = Mode::Instrumented});
  StripResult sr = strip_instrumentation(r.trace);
  return build_graph(sr.trace, sr.marks, r.shadow);
}

std::set<uint32_t> undirected_ball(const FlowGraph& g, uint32_t start, uint32_t hops) {
  std::set<uint32_t> seen{start};
  std::vector<uint32_t> frontier{start};
  for (uint32_t h = 0; h < hops; h++) {
    std::vector<uint32_t> next;
    for (uint32_t v : frontier)
      for (const auto& e : g.edges) {
        if (e.src == v && seen.insert(e.dst).second) next.push_back(e.dst);
        if (e.dst == v && seen.insert(e.src).second) next.push_back(e.src);
      }
    frontier = std::move(next);
  }
  return seen;
}

}  // namespace

TEST_CASE("sample selection keeps every vulnerable node and adds seeded negatives") {
  FlowGraph g = labeled_fixture_graph();
  std::vector<uint32_t> vuln;
  for (uint32_t id = 0; id < g.nodes.size(); id++)
    if (g.nodes[id].label == Label::Vulnerable) vuln.push_back(id);
  REQUIRE(!vuln.empty());

  auto s = select_samples(g, 3.0, 7);
  CHECK(s.size() == vuln.size() + static_cast<size_t>(3.0 * vuln.size() + 0.5));
  CHECK(std::is_sorted(s.begin(), s.end()));
  for (uint32_t id : vuln) CHECK(std::count(s.begin(), s.end(), id) == 1);

  std::map<Relation, std::set<uint32_t>> has_in;
  for (const auto& e : g.edges) has_in[e.rel].insert(e.dst);
  for (uint32_t id : s) {
    NodeKind k = g.nodes[id].kind;
    CHECK((k == NodeKind::Mem || k == NodeKind::Ext));
    CHECK(has_in[Relation::DataFlow].count(id) == 1);
  }

  CHECK(select_samples(g, 3.0, 7) == s);           // deterministic
  CHECK(select_samples(g, 3.0, 8) != s);           // seed-sensitive
  CHECK(select_samples(g, 0.0, 7).size() == vuln.size());

  FlowGraph unlabeled = g;
  for (auto& n : unlabeled.nodes) n.label = Label::Unlabeled;
  CHECK_THROWS_WITH_AS(select_samples(unlabeled, 3.0, 7),
                       "select_samples: graph is unlabeled", std::runtime_error);

  FlowGraph benign = g;
  for (auto& n : benign.nodes)
    if (n.label == Label::Vulnerable) n.label = Label::Benign;
  CHECK(select_samples(benign, 3.0, 7).empty());
}

TEST_CASE("cutting partitions samples into near-equal closed batches") {
  FlowGraph g = labeled_fixture_graph();
  auto samples = select_samples(g, 3.0, 7);
  REQUIRE(samples.size() >= 4);

  for (uint32_t n : {1u, 2u, 3u}) {
    for (uint32_t hops : {1u, 2u, 3u}) {
      auto subs = cut(g, samples, n, hops, "fixture");
      REQUIRE(subs.size() == std::min<size_t>(n, samples.size()));

      // every sample is a target in exactly one subgraph; sizes differ by <= 1
      std::vector<uint32_t> covered;
      size_t lo = samples.size(), hi = 0;
      for (const auto& sg : subs) {
        size_t mine = 0;
        for (size_t i = 0; i < sg.nodes.size(); i++)
          if (sg.is_sample[i]) {
            covered.push_back(sg.nodes[i]);
            mine++;
          }
        lo = std::min(lo, mine);
        hi = std::max(hi, mine);
        CHECK(sg.loss_norm == samples.size());
        CHECK(sg.origin == "fixture");
      }
      std::sort(covered.begin(), covered.end());
      CHECK(covered == samples);
      CHECK(hi - lo <= 1);

      for (const auto& sg : subs) {
        std::set<uint32_t> present(sg.nodes.begin(), sg.nodes.end());
        // closure: the full undirected ball around each target is present
        for (size_t i = 0; i < sg.nodes.size(); i++)
          if (sg.is_sample[i])
            for (uint32_t v : undirected_ball(g, sg.nodes[i], hops))
              CHECK(present.count(v) == 1);
        // induced edges: exactly the parent edges with both ends present
        size_t expect = 0;
        for (const auto& e : g.edges)
          if (present.count(e.src) && present.count(e.dst)) expect++;
        CHECK(sg.edges.size() == expect);
        for (const auto& e : sg.edges) {
          Edge parent{sg.nodes[e.src], sg.nodes[e.dst], e.rel};
          CHECK(std::count(g.edges.begin(), g.edges.end(), parent) == 1);
        }
        // carried norms equal full-graph degrees
        for (size_t i = 0; i < sg.nodes.size(); i++) {
          std::array<uint32_t, 10> want{};
          for (const auto& e : g.edges) {
            if (e.dst == sg.nodes[i]) want[static_cast<int>(e.rel) * 2]++;
            if (e.src == sg.nodes[i]) want[static_cast<int>(e.rel) * 2 + 1]++;
          }
          CHECK(sg.norms[i] == want);
        }
      }
    }
  }

  // more batches than samples: one singleton chunk per sample
  auto subs = cut(g, samples, static_cast<uint32_t>(samples.size() + 5), 1, "x");
  CHECK(subs.size() == samples.size());
  CHECK(cut(g, {}, 3, 2, "x").empty());
  CHECK_THROWS(cut(g, samples, 0, 1, "x"));
  CHECK_THROWS(cut(g, samples, 2, 0, "x"));
  CHECK_THROWS(cut(g, {static_cast<uint32_t>(g.nodes.size())}, 1, 1, "x"));
}

TEST_CASE("wrapping a full graph keeps every node and edge") {
  FlowGraph g = labeled_fixture_graph();
  auto sg = wrap_full_graph(g, "whole");
  REQUIRE(sg.nodes.size() == g.nodes.size());
  for (uint32_t i = 0; i < sg.nodes.size(); i++) {
    CHECK(sg.nodes[i] == i);
    CHECK(sg.kinds[i] == g.nodes[i].kind);
    CHECK(sg.labels[i] == g.nodes[i].label);
    CHECK(sg.is_sample[i] == 1);
  }
  CHECK(sg.edges == g.edges);
  CHECK(sg.loss_norm == g.nodes.size());  // fixture graph is fully labeled
}

TEST_CASE("subgraph serialization round-trips and is pinned") {
  SubgraphSample s;
  s.origin = "tiny";
  s.loss_norm = 2;
  s.nodes = {4, 9};
  s.kinds = {NodeKind::Mem, NodeKind::Reg};
  s.labels = {Label::Vulnerable, Label::Unlabeled};
  s.is_sample = {1, 0};
  s.edges = {{1, 0, Relation::DataFlow}};
  s.norms = {{1, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0, 0, 0, 0, 0}};
  std::string json = serialize_subgraph(s);
  CHECK(json ==
        "{\"origin\":\"tiny\",\"loss_norm\":2,\"nodes\":["
        "{\"id\":4,\"kind\":\"m\",\"label\":\"vuln\",\"sample\":true},"
        "{\"id\":9,\"kind\":\"r\",\"label\":null,\"sample\":false}],"
        "\"edges\":[{\"s\":1,\"d\":0,\"rel\":\"d\"}],"
        "\"norms\":[[1,0,0,0,0,0,0,0,0,0],[0,1,0,0,0,0,0,0,0,0]]}");
  SubgraphSample t = load_subgraph(json);
  CHECK(serialize_subgraph(t) == json);

  FlowGraph g = labeled_fixture_graph();
  auto subs = cut(g, select_samples(g, 3.0, 7), 2, 2, "fixture");
  for (const auto& sg : subs) {
    SubgraphSample rt = load_subgraph(serialize_subgraph(sg));
    CHECK(serialize_subgraph(rt) == serialize_subgraph(sg));
  }

  CHECK_THROWS_AS(load_subgraph("{"), std::runtime_error);
  CHECK_THROWS_AS(load_subgraph("{\"origin\":\"x\"}"), std::runtime_error);
  CHECK_THROWS_AS(
      load_subgraph("{\"origin\":\"x\",\"loss_norm\":1,\"nodes\":[],"
                    "\"edges\":[{\"s\":0,\"d\":1,\"rel\":\"d\"}],\"norms\":[]}"),
      std::runtime_error);
}
