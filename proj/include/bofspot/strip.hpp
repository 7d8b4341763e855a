#pragma once
// Removes instrumentation bookkeeping from a trace: drops begin/end-bracketed
// poison segments (keeping any program instruction that was floated into a
// segment, recognized because its written units are read after the segment
// ends), converts vuln-next markers into out-of-band marks on the following
// record, and renumbers the survivors densely so the result aligns
// record-for-record with a plain-mode trace of the same run.
#include <cstdint>
#include <vector>

#include "bofspot/trace.hpp"

namespace bofspot {

struct StripResult {
  Trace trace;                  // renumbered: seq = position
  std::vector<uint64_t> marks;  // seqs (post-renumber) of overflow-flagged records
};

// Throws on nested/unbalanced segments or a vuln-next marker whose target
// record is missing, a marker, or was dropped. Idempotent: stripping a
// stripped trace returns it unchanged with no marks.
StripResult strip_instrumentation(const Trace& t);

}  // namespace bofspot
