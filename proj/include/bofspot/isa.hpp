#pragma once
// Micro-ISA program model: variables in three memory regions, a small
// register file, and a loop-capable instruction set that is enough to
// express buffer-fill programs (and their off-by-k overflowing variants).
#include <cstdint>
#include <string>
#include <vector>

namespace bofspot {

inline constexpr int kNumRegs = 16;

enum class Region : uint8_t { Global = 0, Stack = 1, Heap = 2 };

struct VarDecl {
  std::string name;
  Region region = Region::Global;
  uint32_t size = 0;  // bytes
};

enum class Opcode : uint8_t { Mov, Add, Sub, Cmp, Jmp, Jcc, Load, Store, Input, Halt };

enum class Cond : uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

// [var + reg*scale + disp]
struct MemRef {
  int32_t var = -1;       // index into Program.vars
  int16_t index_reg = -1; // -1 = no index register
  uint32_t scale = 1;
  int64_t disp = 0;
};

struct SrcOp {
  enum class Kind : uint8_t { Reg, Imm, Mem } kind = Kind::Imm;
  int16_t reg = 0;
  int64_t imm = 0;
  MemRef mem;
};

struct Insn {
  Opcode op = Opcode::Halt;
  int16_t dst_reg = -1;      // mov/add/sub(reg form)/load
  bool dst_is_mem = false;   // store/input/add/sub(mem form)
  MemRef dst_mem;
  std::vector<SrcOp> srcs;   // mov/add/sub/store: 1; cmp: 2; others: 0
  Cond cond = Cond::Eq;      // jcc
  int32_t target = -1;       // jmp/jcc: instruction index; == insns.size() means exit
  uint32_t input_len = 0;    // input: bytes consumed/written
};

struct Program {
  std::vector<VarDecl> vars;
  std::vector<Insn> insns;
  bool operator==(const Program&) const;
};

// Text grammar (one item per line, ';' starts a comment):
//   .var <name> <global|stack|heap> <size>
//   <label>:
//   mov r4, 7 | mov r4, r5
//   add r4, <reg|imm> | sub r4, <reg|imm>
//   add [mem], <reg|imm> | sub [mem], <reg|imm>     (read-modify-write)
//   load r4, [mem]
//   store [mem], <reg|imm>
//   cmp <reg|imm|[mem]>, <reg|imm|[mem]>
//   jmp <label> | jcc <eq|ne|lt|le|gt|ge>, <label>
//   input [mem], <len>
//   halt
// mem := [name] | [name+r3] | [name+r3*4] | [name+12] | combinations
// A label on the line after the last instruction is a valid jump target
// (jumping there ends the run).
Program assemble(const std::string& source);
std::string disassemble(const Program& p);

const char* region_name(Region r);
const char* cond_name(Cond c);

}  // namespace bofspot
