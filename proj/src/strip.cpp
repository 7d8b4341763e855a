#include "bofspot/strip.hpp"

#include <set>
#include <stdexcept>

namespace bofspot {

namespace {

// Units a record touches, split by storage class. Memory is byte-granular.
struct Units {
  std::set<uint64_t> mem;
  std::set<uint16_t> regs;
  bool flags = false;
  bool empty() const { return mem.empty() && regs.empty() && !flags; }
};

void collect(const TraceRecord& r, bool writes, Units& out) {
  if (r.kind == RecordKind::Fault || r.kind == RecordKind::Marker) return;
  for (const auto& op : r.ops) {
    bool is_write = op.role == OpRole::Dst;
    if (is_write != writes) continue;
    switch (op.loc.t) {
      case LocKind::Mem:
        for (uint64_t b = 0; b < op.loc.sz; b++) out.mem.insert(op.loc.a + b);
        break;
      case LocKind::Reg: out.regs.insert(op.loc.r); break;
      case LocKind::Flags: out.flags = true; break;
      case LocKind::Imm: break;
    }
  }
}

bool intersects(const Units& a, const Units& b) {
  if (a.flags && b.flags) return true;
  for (uint16_t r : a.regs)
    if (b.regs.count(r)) return true;
  for (uint64_t m : a.mem)
    if (b.mem.count(m)) return true;
  return false;
}

void subtract(Units& a, const Units& b) {
  if (b.flags) a.flags = false;
  for (uint16_t r : b.regs) a.regs.erase(r);
  for (uint64_t m : b.mem) a.mem.erase(m);
}

// True when some record strictly after `end_idx` reads one of the units
// record `idx` wrote before that unit is rewritten. Rewrites anywhere after
// `idx` (including inside the segment) retire units.
bool written_units_escape_segment(const Trace& t, size_t idx, size_t end_idx) {
  Units pending;
  collect(t[idx], /*writes=*/true, pending);
  if (pending.empty()) return false;
  for (size_t j = idx + 1; j < t.size() && !pending.empty(); j++) {
    if (j > end_idx) {
      Units reads;
      collect(t[j], /*writes=*/false, reads);
      if (intersects(reads, pending)) return true;
    }
    Units writes;
    collect(t[j], /*writes=*/true, writes);
    subtract(pending, writes);
  }
  return false;
}

}  // namespace

StripResult strip_instrumentation(const Trace& t) {
  // Pass 1: segment extents (flat pairing required).
  std::vector<size_t> segment_end(t.size(), 0);  // for in-segment idx: idx of its End marker
  std::vector<bool> in_segment(t.size(), false);
  {
    bool open = false;
    size_t begin_at = 0;
    for (size_t i = 0; i < t.size(); i++) {
      if (t[i].kind != RecordKind::Marker) continue;
      if (t[i].marker == MarkerKind::Begin) {
        if (open) throw std::runtime_error("strip: nested instrumentation segment");
        open = true;
        begin_at = i;
      } else if (t[i].marker == MarkerKind::End) {
        if (!open) throw std::runtime_error("strip: unbalanced segment end marker");
        open = false;
        for (size_t j = begin_at + 1; j < i; j++) {
          in_segment[j] = true;
          segment_end[j] = i;
        }
      }
    }
    if (open) throw std::runtime_error("strip: unterminated instrumentation segment");
  }

  // Pass 2: keep/drop decisions.
  std::vector<bool> keep(t.size(), false);
  for (size_t i = 0; i < t.size(); i++) {
    if (t[i].kind == RecordKind::Marker) continue;  // all markers go
    keep[i] = !in_segment[i] || written_units_escape_segment(t, i, segment_end[i]);
  }

  // Pass 3: renumber survivors and resolve marks.
  std::vector<uint64_t> new_seq(t.size(), 0);
  StripResult out;
  for (size_t i = 0; i < t.size(); i++) {
    if (!keep[i]) continue;
    new_seq[i] = out.trace.size();
    TraceRecord r = t[i];
    r.seq = new_seq[i];
    out.trace.push_back(std::move(r));
  }
  for (size_t i = 0; i < t.size(); i++) {
    if (t[i].kind != RecordKind::Marker || t[i].marker != MarkerKind::VulnNext) continue;
    if (i + 1 >= t.size()) throw std::runtime_error("strip: vuln marker at end of trace");
    if (t[i + 1].kind == RecordKind::Marker)
      throw std::runtime_error("strip: vuln marker not followed by an access record");
    if (!keep[i + 1]) throw std::runtime_error("strip: vuln-marked record was dropped");
    out.marks.push_back(new_seq[i + 1]);
  }
  return out;
}

}  // namespace bofspot
