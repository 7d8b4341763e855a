#include "bofspot/machine.hpp"

#include <algorithm>
#include <stdexcept>

namespace bofspot {

namespace {
constexpr uint64_t kPoisonWord = 0xA5A5A5A5;

int64_t sign_extend(uint64_t raw, uint32_t sz) {
  switch (sz) {
    case 1: return static_cast<int8_t>(raw);
    case 2: return static_cast<int16_t>(static_cast<uint16_t>(raw));
    case 4: return static_cast<int32_t>(static_cast<uint32_t>(raw));
    default: return static_cast<int64_t>(raw);
  }
}
}  // namespace

int Layout::var_containing(uint64_t addr) const {
  for (size_t i = 0; i < vars.size(); i++)
    if (vars[i].contains(addr)) return static_cast<int>(i);
  return -1;
}

Layout compute_layout(const Program& p, Mode mode, uint32_t redzone_bytes) {
  Layout lay;
  lay.vars.resize(p.vars.size());
  struct RegionPlan {
    Region region;
    uint64_t base;
    bool grows_down;
  };
  // Ascending base order so shadow zones can be appended in order.
  const RegionPlan plans[3] = {{Region::Global, kGlobalBase, false},
                               {Region::Heap, kHeapBase, false},
                               {Region::Stack, kStackTop, true}};
  const bool inst = mode == Mode::Instrumented;
  for (const auto& plan : plans) {
    std::vector<size_t> vs;
    for (size_t i = 0; i < p.vars.size(); i++)
      if (p.vars[i].region == plan.region) vs.push_back(i);
    if (vs.empty()) continue;
    uint64_t total = 0;
    for (size_t i : vs) total += p.vars[i].size;
    if (inst) total += static_cast<uint64_t>(redzone_bytes) * (vs.size() + 1);
    uint64_t base = plan.grows_down ? plan.base - total : plan.base;
    uint64_t off = 0;
    for (size_t k = 0; k < vs.size(); k++) {
      if (inst) {
        lay.shadow.add_zone(base + off, base + off + redzone_bytes);
        off += redzone_bytes;
      }
      lay.vars[vs[k]] = {base + off, p.vars[vs[k]].size};
      off += p.vars[vs[k]].size;
    }
    if (inst) {
      lay.shadow.add_zone(base + off, base + off + redzone_bytes);
      off += redzone_bytes;
    }
    lay.spans.emplace_back(base, base + off);
  }
  return lay;
}

Machine::Machine(const Program& p, std::vector<uint8_t> input, const RunOptions& opt)
    : prog_(p), opt_(opt), layout_(compute_layout(p, opt.mode, opt.redzone_bytes)),
      input_(std::move(input)) {
  for (const auto& [lo, hi] : layout_.spans)
    mem_.push_back({lo, hi, std::vector<uint8_t>(hi - lo, 0)});
  if (opt_.mode == Mode::Instrumented) emit_startup_instrumentation();
}

Machine::RegionMem* Machine::region_for(uint64_t addr, uint32_t sz) {
  for (auto& r : mem_)
    if (addr >= r.lo && addr + sz <= r.hi) return &r;
  return nullptr;
}

const Machine::RegionMem* Machine::region_for(uint64_t addr, uint32_t sz) const {
  for (const auto& r : mem_)
    if (addr >= r.lo && addr + sz <= r.hi) return &r;
  return nullptr;
}

uint8_t Machine::mem_byte(uint64_t addr) const {
  const RegionMem* r = region_for(addr, 1);
  if (!r) throw std::runtime_error("mem_byte: unmapped address");
  return r->bytes[addr - r->lo];
}

uint64_t Machine::resolve(const MemRef& m) const {
  const VarSpan& v = layout_.vars.at(m.var);
  int64_t a = static_cast<int64_t>(v.lo) + m.disp;
  if (m.index_reg >= 0) a += regs_[m.index_reg] * static_cast<int64_t>(m.scale);
  return static_cast<uint64_t>(a);
}

void Machine::write_raw(uint64_t addr, const uint8_t* data, uint32_t sz) {
  RegionMem* r = region_for(addr, sz);
  if (!r) throw std::runtime_error("write_raw: unmapped address");
  std::copy(data, data + sz, r->bytes.begin() + static_cast<size_t>(addr - r->lo));
}

void Machine::fault(uint64_t addr, uint32_t sz, OpRole role) {
  TraceRecord rec;
  rec.seq = seq_++;
  rec.iaddr = pc_;
  rec.kind = RecordKind::Fault;
  rec.ops.push_back({role, Loc::mem(addr, static_cast<uint8_t>(std::min(sz, 4u)))});
  trace_.push_back(std::move(rec));
  faulted_ = true;
}

bool Machine::read_mem(uint64_t addr, uint32_t sz, int64_t& out, OpRole role_for_fault) {
  const RegionMem* r = region_for(addr, sz);
  if (!r) {
    fault(addr, sz, role_for_fault);
    return false;
  }
  uint64_t raw = 0;
  for (uint32_t i = 0; i < sz; i++)
    raw |= static_cast<uint64_t>(r->bytes[addr - r->lo + i]) << (8 * i);
  out = sign_extend(raw, sz);
  return true;
}

// Checks bounds, detects redzone-landing writes (marker + overflow point),
// then performs the write. Returns false on hard fault.
bool Machine::write_bytes_checked(uint64_t addr, const uint8_t* data, uint32_t sz) {
  RegionMem* r = region_for(addr, sz);
  if (!r) {
    fault(addr, sz, OpRole::Dst);
    return false;
  }
  if (!layout_.shadow.empty()) {
    uint64_t first_bad = 0;
    bool bad_byte = false;
    for (uint32_t i = 0; i < sz && !bad_byte; i++)
      if (layout_.shadow.is_redzone(addr + i)) {
        bad_byte = true;
        first_bad = addr + i;
      }
    if (bad_byte) {
      TraceRecord mk;
      mk.seq = seq_++;
      mk.iaddr = pc_;
      mk.kind = RecordKind::Marker;
      mk.marker = MarkerKind::VulnNext;
      trace_.push_back(std::move(mk));
      uint64_t b = first_bad - 1;
      while (layout_.shadow.is_redzone(b)) b--;
      OverflowPoint pt;
      pt.iaddr = pc_;
      pt.byte_lo = addr;
      pt.len = sz;
      pt.corrupted_addr = map_overflow_byte(first_bad, b, layout_.shadow);
      points_.push_back(pt);
    }
  }
  std::copy(data, data + sz, r->bytes.begin() + static_cast<size_t>(addr - r->lo));
  return true;
}

bool Machine::write_mem_checked(uint64_t addr, uint32_t sz, int64_t value) {
  uint8_t buf[8];
  for (uint32_t i = 0; i < sz; i++) buf[i] = static_cast<uint8_t>(value >> (8 * i));
  return write_bytes_checked(addr, buf, sz);
}

void Machine::emit_startup_instrumentation() {
  const auto& zones = layout_.shadow.zones;
  bool can_float = opt_.float_first_insn && !zones.empty() && !prog_.insns.empty();
  if (can_float) {
    Opcode op0 = prog_.insns[0].op;
    if (op0 == Opcode::Jmp || op0 == Opcode::Jcc || op0 == Opcode::Halt) can_float = false;
    for (const auto& ins : prog_.insns)
      if ((ins.op == Opcode::Jmp || ins.op == Opcode::Jcc) && ins.target == 0) can_float = false;
  }
  for (size_t z = 0; z < zones.size(); z++) {
    uint64_t pseudo_iaddr = prog_.insns.size() + z;
    TraceRecord begin;
    begin.seq = seq_++;
    begin.iaddr = pseudo_iaddr;
    begin.kind = RecordKind::Marker;
    begin.marker = MarkerKind::Begin;
    trace_.push_back(std::move(begin));
    for (uint64_t a = zones[z].first; a < zones[z].second; a += 4) {
      uint32_t sz = static_cast<uint32_t>(std::min<uint64_t>(4, zones[z].second - a));
      uint8_t buf[4];
      for (uint32_t i = 0; i < sz; i++) buf[i] = static_cast<uint8_t>(kPoisonWord >> (8 * i));
      write_raw(a, buf, sz);
      TraceRecord st;
      st.seq = seq_++;
      st.iaddr = pseudo_iaddr;
      st.kind = RecordKind::Insn;
      st.ops.push_back({OpRole::Src, Loc::imm(static_cast<int64_t>(kPoisonWord))});
      st.ops.push_back({OpRole::Dst, Loc::mem(a, static_cast<uint8_t>(sz))});
      st.flow.direct.emplace_back(0, 1);
      trace_.push_back(std::move(st));
    }
    if (can_float && z + 1 == zones.size()) {
      exec_insn_at(0);  // floated program instruction, inside the segment
    }
    TraceRecord end;
    end.seq = seq_++;
    end.iaddr = pseudo_iaddr;
    end.kind = RecordKind::Marker;
    end.marker = MarkerKind::End;
    trace_.push_back(std::move(end));
  }
}

int64_t Machine::src_value(const SrcOp& s, bool& ok) {
  ok = true;
  switch (s.kind) {
    case SrcOp::Kind::Reg: return regs_[s.reg];
    case SrcOp::Kind::Imm: return s.imm;
    case SrcOp::Kind::Mem: {
      int64_t v = 0;
      ok = read_mem(resolve(s.mem), 4, v, OpRole::Src);
      return v;
    }
  }
  ok = false;
  return 0;
}

void Machine::step() {
  if (done()) return;
  if (++steps_ > opt_.step_limit)
    throw std::runtime_error("run: step limit exceeded (" + std::to_string(opt_.step_limit) +
                             " instructions)");
  exec_insn_at(pc_);
}

void Machine::exec_insn_at(uint64_t index) {
  const Insn& ins = prog_.insns.at(index);
  pc_ = index;
  TraceRecord rec;
  rec.iaddr = index;
  rec.kind = ins.op == Opcode::Input ? RecordKind::Syscall : RecordKind::Insn;

  switch (ins.op) {
    case Opcode::Mov: {
      bool ok;
      int64_t v = src_value(ins.srcs[0], ok);
      // reg/imm only: cannot fault
      rec.ops.push_back({OpRole::Src, ins.srcs[0].kind == SrcOp::Kind::Reg
                                          ? Loc::reg(ins.srcs[0].reg)
                                          : Loc::imm(ins.srcs[0].imm)});
      rec.ops.push_back({OpRole::Dst, Loc::reg(static_cast<uint16_t>(ins.dst_reg))});
      rec.flow.direct.emplace_back(0, 1);
      regs_[ins.dst_reg] = v;
      pc_ = index + 1;
      break;
    }
    case Opcode::Add:
    case Opcode::Sub: {
      const bool is_add = ins.op == Opcode::Add;
      if (!ins.dst_is_mem) {
        bool ok;
        int64_t v = src_value(ins.srcs[0], ok);
        rec.ops.push_back({OpRole::Src, ins.srcs[0].kind == SrcOp::Kind::Reg
                                            ? Loc::reg(ins.srcs[0].reg)
                                            : Loc::imm(ins.srcs[0].imm)});
        rec.ops.push_back({OpRole::Src, Loc::reg(static_cast<uint16_t>(ins.dst_reg))});
        rec.ops.push_back({OpRole::Dst, Loc::reg(static_cast<uint16_t>(ins.dst_reg))});
        rec.flow.direct.emplace_back(0, 2);
        rec.flow.direct.emplace_back(1, 2);
        regs_[ins.dst_reg] = is_add ? regs_[ins.dst_reg] + v : regs_[ins.dst_reg] - v;
        pc_ = index + 1;
        break;
      }
      // read-modify-write memory form
      uint64_t addr = resolve(ins.dst_mem);
      int64_t cur;
      if (!read_mem(addr, 4, cur, OpRole::Src)) return;
      bool ok;
      int64_t v = src_value(ins.srcs[0], ok);
      int64_t nv = is_add ? cur + v : cur - v;
      uint16_t base = 0;
      if (ins.dst_mem.index_reg >= 0) {
        rec.ops.push_back({OpRole::Addr, Loc::reg(static_cast<uint16_t>(ins.dst_mem.index_reg))});
        base = 1;
      }
      rec.ops.push_back({OpRole::Src, ins.srcs[0].kind == SrcOp::Kind::Reg
                                          ? Loc::reg(ins.srcs[0].reg)
                                          : Loc::imm(ins.srcs[0].imm)});
      rec.ops.push_back({OpRole::Src, Loc::mem(addr, 4)});
      rec.ops.push_back({OpRole::Dst, Loc::mem(addr, 4)});
      rec.flow.direct.emplace_back(base + 0, base + 2);
      rec.flow.direct.emplace_back(base + 1, base + 2);
      if (base) {
        rec.flow.addr.emplace_back(0, base + 1);
        rec.flow.addr.emplace_back(0, base + 2);
      }
      if (!write_mem_checked(addr, 4, nv)) return;
      pc_ = index + 1;
      break;
    }
    case Opcode::Load: {
      uint64_t addr = resolve(ins.srcs[0].mem);
      int64_t v;
      if (!read_mem(addr, 4, v, OpRole::Src)) return;
      uint16_t base = 0;
      if (ins.srcs[0].mem.index_reg >= 0) {
        rec.ops.push_back(
            {OpRole::Addr, Loc::reg(static_cast<uint16_t>(ins.srcs[0].mem.index_reg))});
        base = 1;
      }
      rec.ops.push_back({OpRole::Src, Loc::mem(addr, 4)});
      rec.ops.push_back({OpRole::Dst, Loc::reg(static_cast<uint16_t>(ins.dst_reg))});
      rec.flow.direct.emplace_back(base + 0, base + 1);
      if (base) rec.flow.addr.emplace_back(0, base + 0);
      regs_[ins.dst_reg] = v;
      pc_ = index + 1;
      break;
    }
    case Opcode::Store: {
      uint64_t addr = resolve(ins.dst_mem);
      bool ok;
      int64_t v = src_value(ins.srcs[0], ok);
      uint16_t base = 0;
      if (ins.dst_mem.index_reg >= 0) {
        rec.ops.push_back({OpRole::Addr, Loc::reg(static_cast<uint16_t>(ins.dst_mem.index_reg))});
        base = 1;
      }
      rec.ops.push_back({OpRole::Src, ins.srcs[0].kind == SrcOp::Kind::Reg
                                          ? Loc::reg(ins.srcs[0].reg)
                                          : Loc::imm(ins.srcs[0].imm)});
      rec.ops.push_back({OpRole::Dst, Loc::mem(addr, 4)});
      rec.flow.direct.emplace_back(base + 0, base + 1);
      if (base) rec.flow.addr.emplace_back(0, base + 1);
      if (!write_mem_checked(addr, 4, v)) return;
      pc_ = index + 1;
      break;
    }
    case Opcode::Cmp: {
      int64_t vals[2];
      Loc locs[2];
      uint16_t addr_ops = 0;
      // addr operands first (for each indexed memory compare operand)
      for (int i = 0; i < 2; i++)
        if (ins.srcs[i].kind == SrcOp::Kind::Mem && ins.srcs[i].mem.index_reg >= 0) addr_ops++;
      uint16_t next_addr = 0;
      std::vector<FlowPair> addr_pairs;
      for (int i = 0; i < 2; i++) {
        const SrcOp& s = ins.srcs[i];
        if (s.kind == SrcOp::Kind::Mem) {
          uint64_t a = resolve(s.mem);
          if (!read_mem(a, 4, vals[i], OpRole::Cmp)) return;
          locs[i] = Loc::mem(a, 4);
          if (s.mem.index_reg >= 0) {
            rec.ops.push_back({OpRole::Addr, Loc::reg(static_cast<uint16_t>(s.mem.index_reg))});
            addr_pairs.emplace_back(next_addr++, static_cast<uint16_t>(addr_ops + i));
          }
        } else if (s.kind == SrcOp::Kind::Reg) {
          vals[i] = regs_[s.reg];
          locs[i] = Loc::reg(s.reg);
        } else {
          vals[i] = s.imm;
          locs[i] = Loc::imm(s.imm);
        }
      }
      rec.ops.push_back({OpRole::Cmp, locs[0]});
      rec.ops.push_back({OpRole::Cmp, locs[1]});
      rec.ops.push_back({OpRole::Dst, Loc::flags()});
      uint16_t flags_idx = static_cast<uint16_t>(addr_ops + 2);
      rec.flow.cmp.emplace_back(static_cast<uint16_t>(addr_ops + 0), flags_idx);
      rec.flow.cmp.emplace_back(static_cast<uint16_t>(addr_ops + 1), flags_idx);
      rec.flow.addr = std::move(addr_pairs);
      flags_ = vals[0] < vals[1] ? -1 : (vals[0] > vals[1] ? 1 : 0);
      pc_ = index + 1;
      break;
    }
    case Opcode::Jmp:
      pc_ = static_cast<uint64_t>(ins.target);
      break;
    case Opcode::Jcc: {
      bool taken = false;
      switch (ins.cond) {
        case Cond::Eq: taken = flags_ == 0; break;
        case Cond::Ne: taken = flags_ != 0; break;
        case Cond::Lt: taken = flags_ < 0; break;
        case Cond::Le: taken = flags_ <= 0; break;
        case Cond::Gt: taken = flags_ > 0; break;
        case Cond::Ge: taken = flags_ >= 0; break;
      }
      rec.ops.push_back({OpRole::Src, Loc::flags()});
      pc_ = taken ? static_cast<uint64_t>(ins.target) : index + 1;
      break;
    }
    case Opcode::Input: {
      uint64_t addr = resolve(ins.dst_mem);
      std::vector<uint8_t> data(ins.input_len, 0xFF);
      size_t avail = input_pos_ < input_.size() ? input_.size() - input_pos_ : 0;
      size_t take = std::min<size_t>(avail, ins.input_len);
      std::copy(input_.begin() + input_pos_, input_.begin() + input_pos_ + take, data.begin());
      input_pos_ += take;
      uint16_t base = 0;
      if (ins.dst_mem.index_reg >= 0) {
        rec.ops.push_back({OpRole::Addr, Loc::reg(static_cast<uint16_t>(ins.dst_mem.index_reg))});
        base = 1;
      }
      uint32_t off = 0;
      while (off < ins.input_len) {
        uint32_t chunk = ins.input_len - off >= 4 ? 4 : (ins.input_len - off >= 2 ? 2 : 1);
        rec.ops.push_back({OpRole::Dst, Loc::mem(addr + off, static_cast<uint8_t>(chunk))});
        if (base) rec.flow.addr.emplace_back(0, static_cast<uint16_t>(rec.ops.size() - 1));
        off += chunk;
      }
      if (!write_bytes_checked(addr, data.data(), ins.input_len)) return;
      pc_ = index + 1;
      break;
    }
    case Opcode::Halt:
      halted_ = true;
      pc_ = index + 1;
      break;
  }
  rec.seq = seq_++;
  trace_.push_back(std::move(rec));
}

RunResult run(const Program& p, const std::vector<uint8_t>& input, const RunOptions& opt) {
  Machine m(p, input, opt);
  while (!m.done()) m.step();
  RunResult r;
  r.trace = m.trace();
  r.shadow = m.layout().shadow;
  r.points = m.points();
  r.layout = m.layout();
  r.faulted = m.faulted();
  return r;
}

}  // namespace bofspot
