#include "bofspot/cut.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bofspot/rng.hpp"
#include "json.hpp"

namespace bofspot {

namespace {

std::vector<std::array<uint32_t, 10>> full_degrees(const FlowGraph& g) {
  std::vector<std::array<uint32_t, 10>> deg(g.nodes.size(), std::array<uint32_t, 10>{});
  for (const auto& e : g.edges) {
    int r = static_cast<int>(e.rel);
    deg[e.dst][r * 2 + 0]++;  // incoming at dst
    deg[e.src][r * 2 + 1]++;  // outgoing at src
  }
  return deg;
}

bool eligible_target(const FlowGraph& g, const std::vector<std::array<uint32_t, 10>>& deg,
                     uint32_t id) {
  NodeKind k = g.nodes[id].kind;
  if (k == NodeKind::Reg || k == NodeKind::Imm) return false;
  return deg[id][static_cast<int>(Relation::DataFlow) * 2] > 0;  // has data-flow in
}

}  // namespace

std::vector<uint32_t> select_samples(const FlowGraph& g, double neg_ratio, uint64_t seed) {
  if (!g.labeled()) throw std::runtime_error("select_samples: graph is unlabeled");
  if (neg_ratio < 0) throw std::runtime_error("select_samples: negative ratio");
  auto deg = full_degrees(g);
  std::vector<uint32_t> positives, candidates;
  for (uint32_t id = 0; id < g.nodes.size(); id++) {
    if (g.nodes[id].label == Label::Vulnerable) {
      if (!eligible_target(g, deg, id))
        throw std::runtime_error("select_samples: vulnerable node is not a write target");
      positives.push_back(id);
    } else if (eligible_target(g, deg, id)) {
      candidates.push_back(id);
    }
  }
  if (positives.empty()) return {};
  size_t want = static_cast<size_t>(neg_ratio * positives.size() + 0.5);
  std::mt19937_64 rng(splitmix64(seed));
  rng_shuffle(candidates, rng);
  if (candidates.size() > want) candidates.resize(want);
  std::vector<uint32_t> out = positives;
  out.insert(out.end(), candidates.begin(), candidates.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SubgraphSample> cut(const FlowGraph& g, const std::vector<uint32_t>& samples,
                                uint32_t n, uint32_t hops, const std::string& origin) {
  if (n == 0) throw std::runtime_error("cut: batch count must be positive");
  if (hops == 0) throw std::runtime_error("cut: hop count must be positive");
  std::vector<uint32_t> s(samples);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  for (uint32_t id : s)
    if (id >= g.nodes.size()) throw std::runtime_error("cut: sample id out of range");
  if (s.empty()) return {};

  auto deg = full_degrees(g);
  std::vector<std::vector<uint32_t>> undirected(g.nodes.size());
  for (const auto& e : g.edges) {
    undirected[e.src].push_back(e.dst);
    undirected[e.dst].push_back(e.src);
  }

  size_t chunks = std::min<size_t>(n, s.size());
  size_t q = s.size() / chunks, r = s.size() % chunks;
  std::vector<SubgraphSample> out;
  size_t at = 0;
  for (size_t c = 0; c < chunks; c++) {
    size_t len = q + (c < r ? 1 : 0);
    std::vector<uint32_t> chunk(s.begin() + at, s.begin() + at + len);
    at += len;

    std::set<uint32_t> closure(chunk.begin(), chunk.end());
    std::vector<uint32_t> frontier(chunk);
    for (uint32_t h = 0; h < hops; h++) {
      std::vector<uint32_t> next;
      for (uint32_t v : frontier)
        for (uint32_t w : undirected[v])
          if (closure.insert(w).second) next.push_back(w);
      frontier = std::move(next);
    }

    SubgraphSample sg;
    sg.origin = origin;
    sg.loss_norm = static_cast<uint32_t>(s.size());
    sg.nodes.assign(closure.begin(), closure.end());  // ascending parent ids
    std::vector<int64_t> local(g.nodes.size(), -1);
    for (size_t i = 0; i < sg.nodes.size(); i++) local[sg.nodes[i]] = static_cast<int64_t>(i);
    std::set<uint32_t> in_chunk(chunk.begin(), chunk.end());
    for (uint32_t id : sg.nodes) {
      sg.kinds.push_back(g.nodes[id].kind);
      sg.labels.push_back(g.nodes[id].label);
      sg.is_sample.push_back(in_chunk.count(id) ? 1 : 0);
      sg.norms.push_back(deg[id]);
    }
    for (const auto& e : g.edges)
      if (local[e.src] >= 0 && local[e.dst] >= 0)
        sg.edges.push_back({static_cast<uint32_t>(local[e.src]),
                            static_cast<uint32_t>(local[e.dst]), e.rel});
    out.push_back(std::move(sg));
  }
  return out;
}

SubgraphSample wrap_full_graph(const FlowGraph& g, const std::string& origin) {
  SubgraphSample sg;
  sg.origin = origin;
  auto deg = full_degrees(g);
  uint32_t labeled = 0;
  for (uint32_t id = 0; id < g.nodes.size(); id++) {
    sg.nodes.push_back(id);
    sg.kinds.push_back(g.nodes[id].kind);
    sg.labels.push_back(g.nodes[id].label);
    sg.is_sample.push_back(1);
    sg.norms.push_back(deg[id]);
    if (g.nodes[id].label != Label::Unlabeled) labeled++;
  }
  sg.edges = g.edges;
  sg.loss_norm = labeled;
  return sg;
}

std::string serialize_subgraph(const SubgraphSample& s) {
  std::ostringstream o;
  o << "{\"origin\":" << nlohmann::json(s.origin).dump() << ",\"loss_norm\":" << s.loss_norm
    << ",\"nodes\":[";
  for (size_t i = 0; i < s.nodes.size(); i++) {
    if (i) o << ",";
    o << "{\"id\":" << s.nodes[i] << ",\"kind\":\"" << kind_code(s.kinds[i]) << "\",\"label\":";
    switch (s.labels[i]) {
      case Label::Unlabeled: o << "null"; break;
      case Label::Benign: o << "\"benign\""; break;
      case Label::Vulnerable: o << "\"vuln\""; break;
    }
    o << ",\"sample\":" << (s.is_sample[i] ? "true" : "false") << "}";
  }
  o << "],\"edges\":[";
  for (size_t i = 0; i < s.edges.size(); i++) {
    if (i) o << ",";
    o << "{\"s\":" << s.edges[i].src << ",\"d\":" << s.edges[i].dst << ",\"rel\":\""
      << relation_code(s.edges[i].rel) << "\"}";
  }
  o << "],\"norms\":[";
  for (size_t i = 0; i < s.norms.size(); i++) {
    if (i) o << ",";
    o << "[";
    for (int k = 0; k < 10; k++) o << (k ? "," : "") << s.norms[i][k];
    o << "]";
  }
  o << "]}";
  return o.str();
}

SubgraphSample load_subgraph(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_subgraph: malformed JSON: ") + e.what());
  }
  auto fail = [](const std::string& m) -> std::runtime_error {
    return std::runtime_error("load_subgraph: schema violation: " + m);
  };
  SubgraphSample s;
  try {
    s.origin = j.at("origin").get<std::string>();
    s.loss_norm = j.at("loss_norm").get<uint32_t>();
    for (const auto& nj : j.at("nodes")) {
      s.nodes.push_back(nj.at("id").get<uint32_t>());
      std::string k = nj.at("kind").get<std::string>();
      if (k.size() != 1) throw fail("bad kind");
      s.kinds.push_back(kind_from_code(k[0]));
      const auto& lj = nj.at("label");
      if (lj.is_null()) s.labels.push_back(Label::Unlabeled);
      else if (lj == "benign") s.labels.push_back(Label::Benign);
      else if (lj == "vuln") s.labels.push_back(Label::Vulnerable);
      else throw fail("bad label");
      s.is_sample.push_back(nj.at("sample").get<bool>() ? 1 : 0);
    }
    for (const auto& ej : j.at("edges")) {
      std::string r = ej.at("rel").get<std::string>();
      if (r.size() != 1) throw fail("bad relation");
      s.edges.push_back({ej.at("s").get<uint32_t>(), ej.at("d").get<uint32_t>(),
                         relation_from_code(r[0])});
    }
    for (const auto& aj : j.at("norms")) {
      if (!aj.is_array() || aj.size() != 10) throw fail("bad norm row");
      std::array<uint32_t, 10> row{};
      for (int k = 0; k < 10; k++) row[k] = aj[k].get<uint32_t>();
      s.norms.push_back(row);
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  if (s.kinds.size() != s.nodes.size() || s.norms.size() != s.nodes.size())
    throw fail("array sizes disagree");
  for (const auto& e : s.edges)
    if (e.src >= s.nodes.size() || e.dst >= s.nodes.size())
      throw fail("edge endpoint out of range");
  return s;
}

}  // namespace bofspot
