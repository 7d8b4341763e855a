#include "bofspot/graph_io.hpp"

#include <stdexcept>

#include "json.hpp"

namespace bofspot {

std::string serialize_graph(const FlowGraph& g) {
  std::string s = "{\"nodes\":[";
  for (size_t i = 0; i < g.nodes.size(); i++) {
    const Node& n = g.nodes[i];
    if (i) s += ',';
    s += "{\"id\":" + std::to_string(n.id) + ",\"kind\":\"";
    s += kind_code(n.kind);
    s += "\",\"label\":";
    s += n.label == Label::Unlabeled ? "null" : "\"" + std::string(label_code(n.label)) + "\"";
    s += '}';
  }
  s += "],\"edges\":[";
  for (size_t i = 0; i < g.edges.size(); i++) {
    const Edge& e = g.edges[i];
    if (i) s += ',';
    s += "{\"s\":" + std::to_string(e.src) + ",\"d\":" + std::to_string(e.dst) + ",\"rel\":\"";
    s += relation_code(e.rel);
    s += "\"}";
  }
  s += "],\"maps\":{\"insn\":[";
  for (size_t i = 0; i < g.maps.insn.size(); i++) {
    if (i) s += ',';
    s += g.maps.insn[i] ? std::to_string(*g.maps.insn[i]) : "null";
  }
  s += "],\"addr\":[";
  for (size_t i = 0; i < g.maps.addr.size(); i++) {
    if (i) s += ',';
    if (g.maps.addr[i])
      s += "[" + std::to_string(g.maps.addr[i]->addr) + "," + std::to_string(g.maps.addr[i]->size) +
           "]";
    else s += "null";
  }
  s += "],\"seq\":[";
  for (size_t i = 0; i < g.maps.seq.size(); i++) {
    if (i) s += ',';
    s += g.maps.seq[i] ? std::to_string(*g.maps.seq[i]) : "null";
  }
  s += "]}}";
  return s;
}

FlowGraph load_graph(const std::string& json_text) {
  FlowGraph g;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_graph: malformed JSON: ") + e.what());
  }
  try {
    for (const auto& nj : j.at("nodes")) {
      Node n;
      n.id = nj.at("id").get<uint32_t>();
      std::string k = nj.at("kind").get<std::string>();
      if (k.size() != 1) throw std::runtime_error("node kind must be a single letter");
      n.kind = kind_from_code(k[0]);
      const auto& lj = nj.at("label");
      n.label = lj.is_null() ? Label::Unlabeled : label_from_code(lj.get<std::string>());
      g.nodes.push_back(n);
    }
    for (const auto& ej : j.at("edges")) {
      Edge e;
      e.src = ej.at("s").get<uint32_t>();
      e.dst = ej.at("d").get<uint32_t>();
      std::string r = ej.at("rel").get<std::string>();
      if (r.size() != 1) throw std::runtime_error("relation must be a single letter");
      e.rel = relation_from_code(r[0]);
      g.edges.push_back(e);
    }
    const auto& mj = j.at("maps");
    for (const auto& v : mj.at("insn"))
      g.maps.insn.push_back(v.is_null() ? std::nullopt
                                        : std::optional<uint64_t>(v.get<uint64_t>()));
    for (const auto& v : mj.at("addr")) {
      if (v.is_null()) g.maps.addr.push_back(std::nullopt);
      else {
        if (!v.is_array() || v.size() != 2)
          throw std::runtime_error("addr map entry must be [addr,size]");
        g.maps.addr.push_back(AddrSpan{v[0].get<uint64_t>(), v[1].get<uint32_t>()});
      }
    }
    for (const auto& v : mj.at("seq"))
      g.maps.seq.push_back(v.is_null() ? std::nullopt
                                       : std::optional<uint64_t>(v.get<uint64_t>()));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_graph: schema violation: ") + e.what());
  }
  g.validate();
  return g;
}

}  // namespace bofspot
