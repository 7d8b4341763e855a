#pragma once
// Execution-trace record model and its JSON Lines wire format.
// One record per executed instruction/syscall/marker/fault; operands carry
// resolved locations (absolute memory addresses, register ids, immediates)
// and the flow block says which operand feeds which.
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bofspot {

enum class RecordKind : uint8_t { Insn, Syscall, Marker, Fault };
enum class MarkerKind : uint8_t { None, Begin, End, VulnNext };
enum class OpRole : uint8_t { Src, Dst, Addr, Cmp };
enum class LocKind : uint8_t { Mem, Reg, Imm, Flags };

struct Loc {
  LocKind t = LocKind::Imm;
  uint64_t a = 0;  // Mem: first byte address
  uint8_t sz = 0;  // Mem/Reg: width in bytes (mem: 1, 2 or 4)
  uint16_t r = 0;  // Reg: register id
  int64_t v = 0;   // Imm: value
  static Loc mem(uint64_t a, uint8_t sz) { return {LocKind::Mem, a, sz, 0, 0}; }
  static Loc reg(uint16_t r, uint8_t sz = 4) { return {LocKind::Reg, 0, sz, r, 0}; }
  static Loc imm(int64_t v) { return {LocKind::Imm, 0, 0, 0, v}; }
  static Loc flags() { return {LocKind::Flags, 0, 0, 0, 0}; }
  bool operator==(const Loc&) const = default;
};

struct TraceOp {
  OpRole role = OpRole::Src;
  Loc loc;
  bool operator==(const TraceOp&) const = default;
};

using FlowPair = std::pair<uint16_t, uint16_t>;

struct FlowSpec {
  std::vector<FlowPair> direct;  // src operand index -> dst operand index
  std::vector<FlowPair> addr;    // addr operand index -> mem operand index
  std::vector<FlowPair> cmp;     // cmp operand index -> flags operand index
  bool operator==(const FlowSpec&) const = default;
};

struct TraceRecord {
  uint64_t seq = 0;
  uint64_t iaddr = 0;  // instruction index in the program (pseudo-index for bookkeeping)
  RecordKind kind = RecordKind::Insn;
  MarkerKind marker = MarkerKind::None;
  std::vector<TraceOp> ops;
  FlowSpec flow;
  bool operator==(const TraceRecord&) const = default;
};

using Trace = std::vector<TraceRecord>;

// Canonical one-line JSON; serialize(parse(serialize(t))) is byte-identical.
std::string serialize_record(const TraceRecord& r);
std::string serialize_trace(const Trace& t);
void serialize_trace(const Trace& t, std::ostream& out);

// Streaming parse; errors carry the 1-based line number.
Trace parse_trace(std::istream& in);
Trace parse_trace_string(const std::string& s);

}  // namespace bofspot
