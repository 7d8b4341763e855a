#pragma once
// Synthetic program corpus with byte-exact ground truth. Every program is a
// buffer-fill kernel in several interleavable patterns (accumulator updates,
// scalar decoys, tainted scalar rewrites, direct-to-buffer input, a priming
// pass, a read-back pass); vulnerable variants run their fill loop a few
// elements past the end so the writes silently land on the neighbors above.
// Ground truth comes from replaying each program in instrumented mode.
#include <cstdint>
#include <string>
#include <vector>

#include "bofspot/isa.hpp"
#include "bofspot/machine.hpp"

namespace bofspot {

struct CorpusConfig {
  uint64_t seed = 1;
  uint32_t count = 200;
  double vulnerable_fraction = 0.5;
  double float_fraction = 0.15;            // instrumented runs float instruction 0
  double double_overflow_fraction = 0.25;  // among vulnerable: two independent buffers
  uint32_t min_elems = 4;                  // buffer length bounds (4-byte elements)
  uint32_t max_elems = 12;
  uint32_t max_overflow_elems = 3;  // off-by-k bound; keeps writes inside one redzone
};

struct CorpusEntry {
  std::string name;
  Program program;
  Region region = Region::Stack;
  std::vector<uint8_t> input;
  bool float_first = false;  // run instrumented traces with the floated-instruction fixture
  bool is_vulnerable = false;
  std::vector<OverflowPoint> ground_truth;  // instrumented-layout coordinates
  std::vector<VarSpan> var_spans;           // instrumented layout, indexed like program.vars
};

std::vector<CorpusEntry> generate_corpus(const CorpusConfig& cfg);

// Directory layout: one canonical .asm per program plus a corpus.json
// manifest carrying inputs, ground truth and layout spans.
void save_corpus(const std::string& dir, const std::vector<CorpusEntry>& entries);
std::vector<CorpusEntry> load_corpus(const std::string& dir);

}  // namespace bofspot
