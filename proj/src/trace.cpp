#include "bofspot/trace.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bofspot {

namespace {

const char* kind_str(RecordKind k) {
  switch (k) {
    case RecordKind::Insn: return "insn";
    case RecordKind::Syscall: return "syscall";
    case RecordKind::Marker: return "marker";
    case RecordKind::Fault: return "fault";
  }
  return "?";
}

const char* marker_str(MarkerKind m) {
  switch (m) {
    case MarkerKind::Begin: return "begin";
    case MarkerKind::End: return "end";
    case MarkerKind::VulnNext: return "vuln_next";
    case MarkerKind::None: return "";
  }
  return "";
}

const char* role_str(OpRole r) {
  switch (r) {
    case OpRole::Src: return "src";
    case OpRole::Dst: return "dst";
    case OpRole::Addr: return "addr";
    case OpRole::Cmp: return "cmp";
  }
  return "?";
}

void append_pairs(std::string& s, const std::vector<FlowPair>& v) {
  s += '[';
  for (size_t i = 0; i < v.size(); i++) {
    if (i) s += ',';
    s += '[';
    s += std::to_string(v[i].first);
    s += ',';
    s += std::to_string(v[i].second);
    s += ']';
  }
  s += ']';
}

[[noreturn]] void bad(size_t line, const std::string& msg) {
  throw std::runtime_error("parse_trace: line " + std::to_string(line) + ": " + msg);
}

}  // namespace

std::string serialize_record(const TraceRecord& r) {
  std::string s = "{\"seq\":" + std::to_string(r.seq) + ",\"iaddr\":" + std::to_string(r.iaddr) +
                  ",\"kind\":\"" + kind_str(r.kind) + "\",\"marker\":";
  if (r.marker == MarkerKind::None) s += "null";
  else s += std::string("\"") + marker_str(r.marker) + "\"";
  s += ",\"ops\":[";
  for (size_t i = 0; i < r.ops.size(); i++) {
    if (i) s += ',';
    const TraceOp& op = r.ops[i];
    s += std::string("{\"role\":\"") + role_str(op.role) + "\",\"loc\":";
    switch (op.loc.t) {
      case LocKind::Mem:
        s += "{\"t\":\"mem\",\"a\":" + std::to_string(op.loc.a) +
             ",\"sz\":" + std::to_string(op.loc.sz) + "}";
        break;
      case LocKind::Reg:
        s += "{\"t\":\"reg\",\"r\":" + std::to_string(op.loc.r) +
             ",\"sz\":" + std::to_string(op.loc.sz) + "}";
        break;
      case LocKind::Imm:
        s += "{\"t\":\"imm\",\"v\":" + std::to_string(op.loc.v) + "}";
        break;
      case LocKind::Flags:
        s += "{\"t\":\"flags\"}";
        break;
    }
    s += '}';
  }
  s += "],\"flow\":{\"direct\":";
  append_pairs(s, r.flow.direct);
  s += ",\"addr\":";
  append_pairs(s, r.flow.addr);
  s += ",\"cmp\":";
  append_pairs(s, r.flow.cmp);
  s += "}}";
  return s;
}

std::string serialize_trace(const Trace& t) {
  std::string s;
  for (const auto& r : t) {
    s += serialize_record(r);
    s += '\n';
  }
  return s;
}

void serialize_trace(const Trace& t, std::ostream& out) {
  for (const auto& r : t) out << serialize_record(r) << '\n';
}

Trace parse_trace(std::istream& in) {
  Trace out;
  std::string line;
  size_t lineno = 0;
  bool have_prev = false;
  uint64_t prev_seq = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      bad(lineno, std::string("malformed JSON: ") + e.what());
    }
    TraceRecord r;
    try {
      r.seq = j.at("seq").get<uint64_t>();
      r.iaddr = j.at("iaddr").get<uint64_t>();
      std::string k = j.at("kind").get<std::string>();
      if (k == "insn") r.kind = RecordKind::Insn;
      else if (k == "syscall") r.kind = RecordKind::Syscall;
      else if (k == "marker") r.kind = RecordKind::Marker;
      else if (k == "fault") r.kind = RecordKind::Fault;
      else bad(lineno, "unknown record kind '" + k + "'");
      const auto& mj = j.at("marker");
      if (mj.is_null()) r.marker = MarkerKind::None;
      else {
        std::string m = mj.get<std::string>();
        if (m == "begin") r.marker = MarkerKind::Begin;
        else if (m == "end") r.marker = MarkerKind::End;
        else if (m == "vuln_next") r.marker = MarkerKind::VulnNext;
        else bad(lineno, "unknown marker '" + m + "'");
      }
      for (const auto& oj : j.at("ops")) {
        TraceOp op;
        std::string role = oj.at("role").get<std::string>();
        if (role == "src") op.role = OpRole::Src;
        else if (role == "dst") op.role = OpRole::Dst;
        else if (role == "addr") op.role = OpRole::Addr;
        else if (role == "cmp") op.role = OpRole::Cmp;
        else bad(lineno, "unknown operand role '" + role + "'");
        const auto& lj = oj.at("loc");
        std::string t = lj.at("t").get<std::string>();
        if (t == "mem") {
          uint64_t sz = lj.at("sz").get<uint64_t>();
          if (sz != 1 && sz != 2 && sz != 4) bad(lineno, "mem operand size must be 1, 2 or 4");
          op.loc = Loc::mem(lj.at("a").get<uint64_t>(), static_cast<uint8_t>(sz));
        } else if (t == "reg") {
          op.loc = Loc::reg(lj.at("r").get<uint16_t>(),
                            static_cast<uint8_t>(lj.value("sz", 4)));
        } else if (t == "imm") {
          op.loc = Loc::imm(lj.at("v").get<int64_t>());
        } else if (t == "flags") {
          op.loc = Loc::flags();
        } else {
          bad(lineno, "unknown loc type '" + t + "'");
        }
        r.ops.push_back(op);
      }
      auto read_pairs = [&](const nlohmann::json& pj, std::vector<FlowPair>& out_pairs) {
        for (const auto& e : pj) {
          if (!e.is_array() || e.size() != 2) bad(lineno, "flow pair must be [from,to]");
          uint64_t a = e[0].get<uint64_t>(), b = e[1].get<uint64_t>();
          if (a >= r.ops.size() || b >= r.ops.size())
            bad(lineno, "flow pair operand index out of bounds");
          out_pairs.emplace_back(static_cast<uint16_t>(a), static_cast<uint16_t>(b));
        }
      };
      const auto& fj = j.at("flow");
      read_pairs(fj.at("direct"), r.flow.direct);
      read_pairs(fj.at("addr"), r.flow.addr);
      read_pairs(fj.at("cmp"), r.flow.cmp);
    } catch (const nlohmann::json::exception& e) {
      bad(lineno, std::string("schema violation: ") + e.what());
    }
    if (r.kind == RecordKind::Marker && !r.ops.empty()) bad(lineno, "marker record with operands");
    if (r.kind != RecordKind::Marker && r.marker != MarkerKind::None)
      bad(lineno, "non-marker record with marker field set");
    if (have_prev && r.seq <= prev_seq) bad(lineno, "seq must be strictly increasing");
    prev_seq = r.seq;
    have_prev = true;
    out.push_back(std::move(r));
  }
  return out;
}

Trace parse_trace_string(const std::string& s) {
  std::istringstream in(s);
  return parse_trace(in);
}

}  // namespace bofspot
