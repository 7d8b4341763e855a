#include "bofspot/isa.hpp"

#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>

namespace bofspot {

bool operator==(const MemRef& a, const MemRef& b) {
  return a.var == b.var && a.index_reg == b.index_reg && a.scale == b.scale && a.disp == b.disp;
}
bool operator==(const SrcOp& a, const SrcOp& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case SrcOp::Kind::Reg: return a.reg == b.reg;
    case SrcOp::Kind::Imm: return a.imm == b.imm;
    case SrcOp::Kind::Mem: return a.mem == b.mem;
  }
  return false;
}
bool operator==(const Insn& a, const Insn& b) {
  return a.op == b.op && a.dst_reg == b.dst_reg && a.dst_is_mem == b.dst_is_mem &&
         (!a.dst_is_mem || a.dst_mem == b.dst_mem) && a.srcs == b.srcs && a.cond == b.cond &&
         a.target == b.target && a.input_len == b.input_len;
}
bool Program::operator==(const Program& o) const {
  if (insns.size() != o.insns.size() || vars.size() != o.vars.size()) return false;
  for (size_t i = 0; i < vars.size(); i++)
    if (vars[i].name != o.vars[i].name || vars[i].region != o.vars[i].region ||
        vars[i].size != o.vars[i].size)
      return false;
  for (size_t i = 0; i < insns.size(); i++)
    if (!(insns[i] == o.insns[i])) return false;
  return true;
}

const char* region_name(Region r) {
  switch (r) {
    case Region::Global: return "global";
    case Region::Stack: return "stack";
    case Region::Heap: return "heap";
  }
  return "?";
}

const char* cond_name(Cond c) {
  switch (c) {
    case Cond::Eq: return "eq";
    case Cond::Ne: return "ne";
    case Cond::Lt: return "lt";
    case Cond::Le: return "le";
    case Cond::Gt: return "gt";
    case Cond::Ge: return "ge";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw std::runtime_error("assemble: line " + std::to_string(line) + ": " + msg);
}

struct Tok {
  std::vector<std::string> toks;
};

// Split a line into tokens; '[...]' groups become single tokens, commas separate.
std::vector<std::string> tokenize(const std::string& line, int lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool in_mem = false;
  for (char ch : line) {
    if (ch == ';') break;
    if (ch == '[') {
      if (in_mem) fail(lineno, "nested '['");
      in_mem = true;
      cur.push_back(ch);
      continue;
    }
    if (ch == ']') {
      if (!in_mem) fail(lineno, "unmatched ']'");
      in_mem = false;
      cur.push_back(ch);
      out.push_back(cur);
      cur.clear();
      continue;
    }
    if (in_mem) {
      if (!std::isspace(static_cast<unsigned char>(ch))) cur.push_back(ch);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      continue;
    }
    cur.push_back(ch);
  }
  if (in_mem) fail(lineno, "unterminated '['");
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool parse_int(const std::string& s, int64_t& out) {
  if (s.empty()) return false;
  size_t i = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return false;
  int base = 10;
  if (s.size() > i + 2 && s[i] == '0' && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
    base = 16;
    i += 2;
  }
  int64_t v = 0;
  for (; i < s.size(); i++) {
    char c = std::tolower(static_cast<unsigned char>(s[i]));
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (base == 16 && c >= 'a' && c <= 'f') d = 10 + (c - 'a');
    else return false;
    v = v * base + d;
  }
  out = neg ? -v : v;
  return true;
}

bool parse_reg(const std::string& s, int16_t& out) {
  if (s.size() < 2 || (s[0] != 'r' && s[0] != 'R')) return false;
  int64_t n;
  if (!parse_int(s.substr(1), n)) return false;
  if (n < 0 || n >= kNumRegs) return false;
  out = static_cast<int16_t>(n);
  return true;
}

struct Asm {
  Program prog;
  std::map<std::string, int> var_index;
  std::map<std::string, int> labels;                       // name -> insn index
  std::vector<std::pair<std::string, int>> pending_jumps;  // label name, line
  std::vector<int> jump_sites;                             // insn index per pending jump

  MemRef parse_mem(const std::string& tok, int lineno) {
    // tok == "[...]" with no spaces inside
    MemRef m;
    std::string body = tok.substr(1, tok.size() - 2);
    if (body.empty()) fail(lineno, "empty memory reference");
    // split on +/- keeping sign for numeric terms
    std::vector<std::string> terms;
    std::string cur;
    for (size_t i = 0; i < body.size(); i++) {
      char c = body[i];
      if ((c == '+' || c == '-') && !cur.empty()) {
        terms.push_back(cur);
        cur.clear();
        if (c == '-') cur.push_back('-');
        continue;
      }
      cur.push_back(c);
    }
    if (!cur.empty()) terms.push_back(cur);
    bool have_var = false;
    for (auto& t : terms) {
      int64_t num;
      int16_t reg;
      auto star = t.find('*');
      if (star != std::string::npos) {
        std::string rp = t.substr(0, star), sp = t.substr(star + 1);
        if (!parse_reg(rp, reg)) fail(lineno, "bad index register in '" + t + "'");
        int64_t sc;
        if (!parse_int(sp, sc) || sc <= 0) fail(lineno, "bad scale in '" + t + "'");
        if (m.index_reg >= 0) fail(lineno, "two index registers in memory reference");
        m.index_reg = reg;
        m.scale = static_cast<uint32_t>(sc);
      } else if (parse_reg(t, reg)) {
        if (m.index_reg >= 0) fail(lineno, "two index registers in memory reference");
        m.index_reg = reg;
        m.scale = 1;
      } else if (parse_int(t, num)) {
        m.disp += num;
      } else {
        auto it = var_index.find(t);
        if (it == var_index.end()) fail(lineno, "unknown variable '" + t + "'");
        if (have_var) fail(lineno, "two variables in memory reference");
        have_var = true;
        m.var = it->second;
      }
    }
    if (!have_var) fail(lineno, "memory reference needs a variable base");
    return m;
  }

  SrcOp parse_src(const std::string& tok, int lineno, bool allow_mem) {
    SrcOp s;
    int16_t reg;
    int64_t imm;
    if (!tok.empty() && tok.front() == '[') {
      if (!allow_mem) fail(lineno, "memory operand not allowed here");
      s.kind = SrcOp::Kind::Mem;
      s.mem = parse_mem(tok, lineno);
    } else if (parse_reg(tok, reg)) {
      s.kind = SrcOp::Kind::Reg;
      s.reg = reg;
    } else if (parse_int(tok, imm)) {
      s.kind = SrcOp::Kind::Imm;
      s.imm = imm;
    } else {
      fail(lineno, "bad operand '" + tok + "'");
    }
    return s;
  }
};

}  // namespace

Program assemble(const std::string& source) {
  Asm a;
  std::istringstream in(source);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    auto toks = tokenize(line, lineno);
    if (toks.empty()) continue;
    std::string head = toks[0];
    if (head == ".var") {
      if (toks.size() != 4) fail(lineno, ".var needs: name region size");
      if (a.var_index.count(toks[1])) fail(lineno, "duplicate variable '" + toks[1] + "'");
      VarDecl v;
      v.name = toks[1];
      if (toks[2] == "global") v.region = Region::Global;
      else if (toks[2] == "stack") v.region = Region::Stack;
      else if (toks[2] == "heap") v.region = Region::Heap;
      else fail(lineno, "unknown region '" + toks[2] + "'");
      int64_t sz;
      if (!parse_int(toks[3], sz) || sz <= 0) fail(lineno, "bad size '" + toks[3] + "'");
      v.size = static_cast<uint32_t>(sz);
      a.var_index[v.name] = static_cast<int>(a.prog.vars.size());
      a.prog.vars.push_back(std::move(v));
      continue;
    }
    if (head.size() > 1 && head.back() == ':') {
      std::string name = head.substr(0, head.size() - 1);
      if (a.labels.count(name)) fail(lineno, "duplicate label '" + name + "'");
      a.labels[name] = static_cast<int>(a.prog.insns.size());
      if (toks.size() != 1) fail(lineno, "label must be alone on its line");
      continue;
    }

    Insn ins;
    auto need = [&](size_t n) {
      if (toks.size() != n + 1) fail(lineno, head + " needs " + std::to_string(n) + " operand(s)");
    };
    int16_t reg;
    if (head == "mov" || head == "add" || head == "sub") {
      need(2);
      ins.op = head == "mov" ? Opcode::Mov : head == "add" ? Opcode::Add : Opcode::Sub;
      if (toks[1].front() == '[') {
        if (ins.op == Opcode::Mov) fail(lineno, "mov cannot target memory; use store");
        ins.dst_is_mem = true;
        ins.dst_mem = a.parse_mem(toks[1], lineno);
      } else if (parse_reg(toks[1], reg)) {
        ins.dst_reg = reg;
      } else {
        fail(lineno, "bad destination '" + toks[1] + "'");
      }
      ins.srcs.push_back(a.parse_src(toks[2], lineno, false));
    } else if (head == "load") {
      need(2);
      ins.op = Opcode::Load;
      if (!parse_reg(toks[1], reg)) fail(lineno, "load destination must be a register");
      ins.dst_reg = reg;
      if (toks[2].front() != '[') fail(lineno, "load source must be a memory reference");
      ins.srcs.push_back(a.parse_src(toks[2], lineno, true));
    } else if (head == "store") {
      need(2);
      ins.op = Opcode::Store;
      if (toks[1].front() != '[') fail(lineno, "store destination must be a memory reference");
      ins.dst_is_mem = true;
      ins.dst_mem = a.parse_mem(toks[1], lineno);
      ins.srcs.push_back(a.parse_src(toks[2], lineno, false));
    } else if (head == "cmp") {
      need(2);
      ins.op = Opcode::Cmp;
      ins.srcs.push_back(a.parse_src(toks[1], lineno, true));
      ins.srcs.push_back(a.parse_src(toks[2], lineno, true));
    } else if (head == "jmp") {
      need(1);
      ins.op = Opcode::Jmp;
      a.pending_jumps.emplace_back(toks[1], lineno);
      a.jump_sites.push_back(static_cast<int>(a.prog.insns.size()));
    } else if (head == "jcc") {
      need(2);
      ins.op = Opcode::Jcc;
      std::string c = toks[1];
      if (c == "eq") ins.cond = Cond::Eq;
      else if (c == "ne") ins.cond = Cond::Ne;
      else if (c == "lt") ins.cond = Cond::Lt;
      else if (c == "le") ins.cond = Cond::Le;
      else if (c == "gt") ins.cond = Cond::Gt;
      else if (c == "ge") ins.cond = Cond::Ge;
      else fail(lineno, "unknown condition '" + c + "'");
      a.pending_jumps.emplace_back(toks[2], lineno);
      a.jump_sites.push_back(static_cast<int>(a.prog.insns.size()));
    } else if (head == "input") {
      need(2);
      ins.op = Opcode::Input;
      if (toks[1].front() != '[') fail(lineno, "input destination must be a memory reference");
      ins.dst_is_mem = true;
      ins.dst_mem = a.parse_mem(toks[1], lineno);
      int64_t len;
      if (!parse_int(toks[2], len) || len <= 0) fail(lineno, "bad input length");
      ins.input_len = static_cast<uint32_t>(len);
    } else if (head == "halt") {
      need(0);
      ins.op = Opcode::Halt;
    } else {
      fail(lineno, "unknown instruction '" + head + "'");
    }
    a.prog.insns.push_back(std::move(ins));
  }

  if (a.prog.insns.empty()) throw std::runtime_error("assemble: program has no instructions");

  size_t ji = 0;
  for (size_t i = 0; i < a.prog.insns.size(); i++) {
    Insn& ins = a.prog.insns[i];
    if (ins.op != Opcode::Jmp && ins.op != Opcode::Jcc) continue;
    auto [name, lno] = a.pending_jumps[ji];
    (void)a.jump_sites[ji];
    ji++;
    auto it = a.labels.find(name);
    if (it == a.labels.end()) fail(lno, "undefined label '" + name + "'");
    ins.target = it->second;  // may equal insns.size(): jump-to-end = exit
  }
  return a.prog;
}

namespace {

std::string mem_text(const Program& p, const MemRef& m) {
  std::string s = "[" + p.vars.at(m.var).name;
  if (m.index_reg >= 0) {
    s += "+r" + std::to_string(m.index_reg);
    if (m.scale != 1) s += "*" + std::to_string(m.scale);
  }
  if (m.disp != 0) s += (m.disp > 0 ? "+" : "") + std::to_string(m.disp);
  return s + "]";
}

std::string src_text(const Program& p, const SrcOp& s) {
  switch (s.kind) {
    case SrcOp::Kind::Reg: return "r" + std::to_string(s.reg);
    case SrcOp::Kind::Imm: return std::to_string(s.imm);
    case SrcOp::Kind::Mem: return mem_text(p, s.mem);
  }
  return "?";
}

}  // namespace

std::string disassemble(const Program& p) {
  std::string out;
  for (const auto& v : p.vars)
    out += ".var " + v.name + " " + region_name(v.region) + " " + std::to_string(v.size) + "\n";
  std::map<int, std::string> label_at;
  for (const auto& ins : p.insns)
    if ((ins.op == Opcode::Jmp || ins.op == Opcode::Jcc) && !label_at.count(ins.target))
      label_at[ins.target] = "L" + std::to_string(ins.target);
  for (size_t i = 0; i <= p.insns.size(); i++) {
    auto lbl = label_at.find(static_cast<int>(i));
    if (lbl != label_at.end()) out += lbl->second + ":\n";
    if (i == p.insns.size()) break;
    const Insn& ins = p.insns[i];
    std::string line = "  ";
    switch (ins.op) {
      case Opcode::Mov:
        line += "mov r" + std::to_string(ins.dst_reg) + ", " + src_text(p, ins.srcs[0]);
        break;
      case Opcode::Add:
      case Opcode::Sub:
        line += (ins.op == Opcode::Add ? std::string("add ") : std::string("sub "));
        line += ins.dst_is_mem ? mem_text(p, ins.dst_mem) : "r" + std::to_string(ins.dst_reg);
        line += ", " + src_text(p, ins.srcs[0]);
        break;
      case Opcode::Cmp:
        line += "cmp " + src_text(p, ins.srcs[0]) + ", " + src_text(p, ins.srcs[1]);
        break;
      case Opcode::Jmp:
        line += "jmp " + label_at.at(ins.target);
        break;
      case Opcode::Jcc:
        line += "jcc " + std::string(cond_name(ins.cond)) + ", " + label_at.at(ins.target);
        break;
      case Opcode::Load:
        line += "load r" + std::to_string(ins.dst_reg) + ", " + mem_text(p, ins.srcs[0].mem);
        break;
      case Opcode::Store:
        line += "store " + mem_text(p, ins.dst_mem) + ", " + src_text(p, ins.srcs[0]);
        break;
      case Opcode::Input:
        line += "input " + mem_text(p, ins.dst_mem) + ", " + std::to_string(ins.input_len);
        break;
      case Opcode::Halt:
        line += "halt";
        break;
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace bofspot
