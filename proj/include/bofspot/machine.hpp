#pragma once
// Interpreter for micro-ISA programs. Plain mode lays variables out packed
// per region; instrumented mode inserts redzones around every variable,
// emits poison-bookkeeping segments bracketed by begin/end markers, flags
// overflowing writes with a vuln-next marker plus an overflow point, and
// lets execution continue (writes land in the redzone bytes — silent).
#include <array>
#include <cstdint>
#include <vector>

#include "bofspot/isa.hpp"
#include "bofspot/shadow.hpp"
#include "bofspot/trace.hpp"

namespace bofspot {

enum class Mode : uint8_t { Plain, Instrumented };

struct VarSpan {
  uint64_t lo = 0;
  uint32_t size = 0;
  uint64_t hi() const { return lo + size; }
  bool contains(uint64_t a) const { return a >= lo && a < hi(); }
};

struct Layout {
  std::vector<VarSpan> vars;  // index-aligned with Program.vars
  ShadowMap shadow;           // empty in plain mode
  // region address windows actually materialized (lo, hi), one per region in
  // ascending address order; empty regions omitted
  std::vector<std::pair<uint64_t, uint64_t>> spans;
  int var_containing(uint64_t addr) const;  // -1 if none
};

inline constexpr uint64_t kGlobalBase = 0x1000'0000;
inline constexpr uint64_t kHeapBase = 0x2000'0000;
inline constexpr uint64_t kStackTop = 0x7000'0000;  // stack occupies [top-total, top)

Layout compute_layout(const Program& p, Mode mode, uint32_t redzone_bytes = 16);

struct OverflowPoint {
  uint64_t iaddr = 0;           // instruction index of the store/input
  uint64_t byte_lo = 0;         // first byte the access targeted
  uint32_t len = 0;             // access width in bytes
  uint64_t corrupted_addr = 0;  // first corrupted byte, mapped to addressable space
  bool operator==(const OverflowPoint&) const = default;
};

struct RunOptions {
  Mode mode = Mode::Plain;
  uint64_t step_limit = 1'000'000;
  uint32_t redzone_bytes = 16;
  // Instrumented-mode fixture: execute instruction 0 inside the last poison
  // segment (models a compiler floating an instruction across the
  // instrumentation boundary). Callers must ensure instruction 0 is not a
  // jump target and its result is read later.
  bool float_first_insn = false;
};

struct RunResult {
  Trace trace;
  ShadowMap shadow;  // empty in plain mode
  std::vector<OverflowPoint> points;
  Layout layout;
  bool faulted = false;
};

class Machine {
 public:
  Machine(const Program& p, std::vector<uint8_t> input, const RunOptions& opt);

  bool done() const { return halted_ || faulted_ || pc_ >= prog_.insns.size(); }
  void step();  // executes one program instruction; throws on step-limit

  const Trace& trace() const { return trace_; }
  const Layout& layout() const { return layout_; }
  const std::vector<OverflowPoint>& points() const { return points_; }
  bool faulted() const { return faulted_; }
  uint64_t pc() const { return pc_; }
  int64_t reg(int i) const { return regs_.at(i); }
  int flags() const { return flags_; }
  uint8_t mem_byte(uint64_t addr) const;  // throws if unmapped
  uint64_t resolve(const MemRef& m) const;

 private:
  struct RegionMem {
    uint64_t lo, hi;
    std::vector<uint8_t> bytes;
  };

  const Program& prog_;
  RunOptions opt_;
  Layout layout_;
  std::vector<RegionMem> mem_;
  std::vector<uint8_t> input_;
  size_t input_pos_ = 0;
  std::array<int64_t, kNumRegs> regs_{};
  int flags_ = 0;
  uint64_t pc_ = 0;
  uint64_t steps_ = 0;
  uint64_t seq_ = 0;
  bool halted_ = false;
  bool faulted_ = false;
  Trace trace_;
  std::vector<OverflowPoint> points_;

  RegionMem* region_for(uint64_t addr, uint32_t sz);
  const RegionMem* region_for(uint64_t addr, uint32_t sz) const;
  void write_raw(uint64_t addr, const uint8_t* data, uint32_t sz);
  bool read_mem(uint64_t addr, uint32_t sz, int64_t& out, OpRole role_for_fault);
  bool write_mem_checked(uint64_t addr, uint32_t sz, int64_t value);
  bool write_bytes_checked(uint64_t addr, const uint8_t* data, uint32_t sz);
  void fault(uint64_t addr, uint32_t sz, OpRole role);
  void emit_startup_instrumentation();
  void exec_insn_at(uint64_t index);  // shared by step() and the float fixture
  int64_t src_value(const SrcOp& s, bool& ok);
};

RunResult run(const Program& p, const std::vector<uint8_t>& input, const RunOptions& opt);

}  // namespace bofspot
