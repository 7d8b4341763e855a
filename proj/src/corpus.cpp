#include "bofspot/corpus.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bofspot/rng.hpp"
#include "json.hpp"

namespace bofspot {

namespace {

// One buffer-plus-victims group. Victim scalars are declared directly above
// the buffer so off-by-k writes land on them; all of them are accumulator
// style (read-modify-write each iteration) so a clobbered victim still shows
// up downstream of the clobbering node.
struct ClusterPlan {
  std::string suffix;     // "_a" / "_b"
  uint32_t elems = 8;     // buffer length in 4-byte elements
  uint32_t overflow = 0;  // 0 = benign; else fill runs this many elements long
  bool preinit = false;   // prime the buffer with an indexed store pass first
  bool decoy = false;        // tainted indexed rewrite of paired scalars (looks like the bug)
  bool decoy_mimic = false;  // decoy index register loaded from a counter-like var
  bool decoy_rmw_low = false;  // lower decoy slot accumulates instead of being stored
  bool sum_pass = false;       // read the buffer back (in bounds) afterwards
};

struct EntryPlan {
  Region region = Region::Stack;
  bool vulnerable = false;
  bool float_first = false;
  std::vector<ClusterPlan> clusters;
  int extra_scalars = 0;     // 0..2 plain accumulators
  uint32_t direct_elems = 0; // >0: extra buffer filled straight from input
};

std::string synthesize(const EntryPlan& plan) {
  std::ostringstream s;
  const char* reg = region_name(plan.region);
  uint64_t frame = 8;

  // --- declarations (order defines memory adjacency) ---
  for (const auto& c : plan.clusters) {
    s << ".var buf" << c.suffix << " " << reg << " " << c.elems * 4 << "\n";
    s << ".var acc" << c.suffix << " " << reg << " 4\n";
    s << ".var v2" << c.suffix << " " << reg << " 4\n";
    s << ".var v3" << c.suffix << " " << reg << " 4\n";
    if (c.decoy) {
      s << ".var dk0" << c.suffix << " " << reg << " 4\n";
      s << ".var dk1" << c.suffix << " " << reg << " 4\n";
    }
    frame += c.elems * 4 + 16 + (c.decoy ? 8 : 0);
  }
  s << ".var i " << reg << " 4\n.var tmp " << reg << " 4\n";
  frame += 8;
  for (const auto& c : plan.clusters)
    if (c.decoy_mimic) {
      s << ".var zv" << c.suffix << " " << reg << " 4\n";
      frame += 4;
    }
  for (int k = 0; k < plan.extra_scalars; k++) {
    s << ".var s" << k << " " << reg << " 4\n";
    frame += 4;
  }
  if (plan.direct_elems) {
    s << ".var bufd " << reg << " " << plan.direct_elems * 4 << "\n";
    frame += plan.direct_elems * 4;
  }

  // --- preamble ---
  bool need_r9_mov = false;
  for (const auto& c : plan.clusters)
    if (c.decoy && !c.decoy_mimic) need_r9_mov = true;
  if (plan.float_first) s << "  mov r9, 0\n";  // must be instruction 0
  if (plan.region == Region::Stack) s << "  sub r7, " << frame << "\n";
  if (need_r9_mov && !plan.float_first) s << "  mov r9, 0\n";
  s << "  store [i], 0\n";
  for (const auto& c : plan.clusters) {
    s << "  store [acc" << c.suffix << "], 0\n";
    s << "  store [v2" << c.suffix << "], 0\n";
    s << "  store [v3" << c.suffix << "], 0\n";
    if (c.decoy) {
      s << "  store [dk0" << c.suffix << "], 0\n";
      s << "  store [dk1" << c.suffix << "], 0\n";
    }
    if (c.decoy_mimic) s << "  store [zv" << c.suffix << "], 0\n";
  }
  for (int k = 0; k < plan.extra_scalars; k++) s << "  store [s" << k << "], " << (3 + k) << "\n";

  // --- per-cluster passes ---
  for (const auto& c : plan.clusters) {
    const std::string& x = c.suffix;
    if (c.preinit) {
      s << "  input [tmp], 4\n";
      s << "  load r5, [tmp]\n";
      s << "  store [i], 0\n";
      s << "  jmp pcheck" << x << "\n";
      s << "ploop" << x << ":\n";
      s << "  load r1, [i]\n";
      s << "  store [buf" << x << "+r1*4], r5\n";
      s << "  add [i], 1\n";
      s << "pcheck" << x << ":\n";
      s << "  cmp [i], " << c.elems - 1 << "\n";
      s << "  jcc le, ploop" << x << "\n";
    }
    uint32_t bound = c.elems - 1 + c.overflow;
    s << "  store [i], 0\n";
    s << "  jmp check" << x << "\n";
    s << "loop" << x << ":\n";
    s << "  input [tmp], 4\n";
    s << "  cmp [tmp], -1\n";
    s << "  jcc eq, exit" << x << "\n";
    s << "  load r1, [i]\n";
    s << "  load r0, [tmp]\n";
    s << "  store [buf" << x << "+r1*4], r0\n";
    s << "  add [acc" << x << "], r0\n";
    s << "  add [v2" << x << "], r0\n";
    s << "  add [v3" << x << "], r0\n";
    if (c.decoy) {
      if (c.decoy_mimic) {
        s << "  add [zv" << x << "], 0\n";
        s << "  cmp [zv" << x << "], 99\n";
        s << "  jcc ge, zskip" << x << "\n";
        s << "zskip" << x << ":\n";
        s << "  load r9, [zv" << x << "]\n";
      }
      if (c.decoy_rmw_low)
        s << "  add [dk0" << x << "], r0\n";
      else
        s << "  store [dk0" << x << "+r9*4], r0\n";
      s << "  store [dk1" << x << "+r9*4], r0\n";
      s << "  add [dk1" << x << "], r0\n";
    }
    if (&c == &plan.clusters.front()) {
      for (int k = 0; k < plan.extra_scalars; k++)
        s << "  add [s" << k << "], " << (k == 0 ? "1" : "r0") << "\n";
    }
    s << "  add [i], 1\n";
    s << "check" << x << ":\n";
    s << "  cmp [i], " << bound << "\n";
    s << "  jcc le, loop" << x << "\n";
    s << "exit" << x << ":\n";
    if (c.sum_pass) {
      s << "  store [i], 0\n";
      s << "  jmp scheck" << x << "\n";
      s << "sloop" << x << ":\n";
      s << "  load r1, [i]\n";
      s << "  load r2, [buf" << x << "+r1*4]\n";
      s << "  add [s0], r2\n";
      s << "  add [i], 1\n";
      s << "scheck" << x << ":\n";
      s << "  cmp [i], " << c.elems - 1 << "\n";
      s << "  jcc le, sloop" << x << "\n";
    }
  }

  if (plan.direct_elems) {
    s << "  store [i], 0\n";
    s << "  jmp dcheck\n";
    s << "dloop:\n";
    s << "  load r1, [i]\n";
    s << "  input [bufd+r1*4], 4\n";
    s << "  add [i], 1\n";
    s << "dcheck:\n";
    s << "  cmp [i], " << plan.direct_elems - 1 << "\n";
    s << "  jcc le, dloop\n";
  }
  s << "fin:\n";
  return s.str();
}

uint32_t inputs_needed(const EntryPlan& plan) {
  uint32_t n = 0;
  for (const auto& c : plan.clusters) n += c.elems + c.overflow + (c.preinit ? 1 : 0);
  return n + plan.direct_elems;
}

}  // namespace

std::vector<CorpusEntry> generate_corpus(const CorpusConfig& cfg) {
  if (cfg.count == 0) throw std::runtime_error("generate_corpus: count must be positive");
  if (cfg.min_elems < 2 || cfg.max_elems < cfg.min_elems)
    throw std::runtime_error("generate_corpus: bad buffer element bounds");
  if (cfg.max_overflow_elems < 1 || cfg.max_overflow_elems > 3)
    throw std::runtime_error("generate_corpus: overflow must span 1..3 elements");

  std::mt19937_64 rng(splitmix64(cfg.seed));
  // deterministic vulnerable/benign assignment, exact count
  uint32_t vuln_count = static_cast<uint32_t>(cfg.count * cfg.vulnerable_fraction + 0.5);
  std::vector<uint32_t> idx(cfg.count);
  for (uint32_t k = 0; k < cfg.count; k++) idx[k] = k;
  rng_shuffle(idx, rng);
  std::vector<bool> vulnerable(cfg.count, false);
  for (uint32_t k = 0; k < vuln_count && k < cfg.count; k++) vulnerable[idx[k]] = true;

  std::vector<CorpusEntry> out;
  out.reserve(cfg.count);
  for (uint32_t n = 0; n < cfg.count; n++) {
    EntryPlan plan;
    plan.region = n % 3 == 0 ? Region::Stack : (n % 3 == 1 ? Region::Global : Region::Heap);
    plan.vulnerable = vulnerable[n];
    bool two_clusters = rng_coin(rng, cfg.double_overflow_fraction);
    plan.float_first = rng_coin(rng, cfg.float_fraction);

    auto make_cluster = [&](const char* suffix, bool overflow_here) {
      ClusterPlan c;
      c.suffix = suffix;
      c.elems = static_cast<uint32_t>(rng_range(rng, cfg.min_elems, cfg.max_elems));
      c.overflow = overflow_here
                       ? static_cast<uint32_t>(rng_range(rng, 1, cfg.max_overflow_elems))
                       : 0;
      c.preinit = rng_coin(rng, 0.5);
      c.decoy = rng_coin(rng, 0.6);
      c.decoy_mimic = c.decoy && rng_coin(rng, 0.8);
      c.decoy_rmw_low = c.decoy && rng_coin(rng, 0.5);
      c.sum_pass = rng_coin(rng, 0.45);
      return c;
    };
    plan.clusters.push_back(make_cluster("_a", plan.vulnerable));
    if (two_clusters)
      plan.clusters.push_back(make_cluster("_b", plan.vulnerable && rng_coin(rng, 0.7)));
    if (plan.float_first) {  // instruction 0 must be a mov whose value is used later
      plan.clusters[0].decoy = true;
      plan.clusters[0].decoy_mimic = false;
    }
    plan.extra_scalars = static_cast<int>(rng_range(rng, 0, 2));
    bool any_sum = false;
    for (const auto& c : plan.clusters) any_sum |= c.sum_pass;
    if (any_sum && plan.extra_scalars == 0) plan.extra_scalars = 1;
    if (rng_coin(rng, 0.35))
      plan.direct_elems = static_cast<uint32_t>(rng_range(rng, 2, 6));

    CorpusEntry e;
    char name[32];
    std::snprintf(name, sizeof name, "prog_%04u", n);
    e.name = name;
    e.region = plan.region;
    e.float_first = plan.float_first;
    e.program = assemble(synthesize(plan));
    uint32_t nin = inputs_needed(plan);
    e.input.reserve(nin * 4);
    for (uint32_t k = 0; k < nin; k++) {
      int32_t v = static_cast<int32_t>(rng_range(rng, 1, 99));
      for (int b = 0; b < 4; b++)
        e.input.push_back(static_cast<uint8_t>(static_cast<uint32_t>(v) >> (8 * b)));
    }

    RunOptions opt{.mode = Mode::Instrumented, .float_first_insn = plan.float_first};
    RunResult r = run(e.program, e.input, opt);
    if (r.faulted)
      throw std::runtime_error("generate_corpus: program " + e.name + " faulted");
    e.ground_truth = r.points;
    e.is_vulnerable = !r.points.empty();
    e.var_spans = r.layout.vars;
    if (e.is_vulnerable != plan.vulnerable)
      throw std::runtime_error("generate_corpus: intent/ground-truth mismatch for " + e.name);
    out.push_back(std::move(e));
  }
  return out;
}

void save_corpus(const std::string& dir, const std::vector<CorpusEntry>& entries) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    std::string file = e.name + ".asm";
    std::ofstream asm_out(std::filesystem::path(dir) / file);
    if (!asm_out) throw std::runtime_error("save_corpus: cannot write " + file);
    asm_out << disassemble(e.program);
    nlohmann::json j;
    j["name"] = e.name;
    j["file"] = file;
    j["region"] = region_name(e.region);
    j["vulnerable"] = e.is_vulnerable;
    j["float_first"] = e.float_first;
    j["input"] = e.input;
    j["points"] = nlohmann::json::array();
    for (const auto& p : e.ground_truth)
      j["points"].push_back({{"iaddr", p.iaddr},
                             {"byte_lo", p.byte_lo},
                             {"len", p.len},
                             {"corrupted_addr", p.corrupted_addr}});
    j["var_spans"] = nlohmann::json::array();
    for (const auto& v : e.var_spans) j["var_spans"].push_back({v.lo, v.size});
    manifest["entries"].push_back(std::move(j));
  }
  std::ofstream mf(std::filesystem::path(dir) / "corpus.json");
  if (!mf) throw std::runtime_error("save_corpus: cannot write corpus.json");
  mf << manifest.dump(1) << "\n";
}

std::vector<CorpusEntry> load_corpus(const std::string& dir) {
  std::ifstream mf(std::filesystem::path(dir) / "corpus.json");
  if (!mf) throw std::runtime_error("load_corpus: no corpus.json in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  std::vector<CorpusEntry> out;
  for (const auto& j : manifest.at("entries")) {
    CorpusEntry e;
    e.name = j.at("name").get<std::string>();
    std::string region = j.at("region").get<std::string>();
    if (region == "stack") e.region = Region::Stack;
    else if (region == "global") e.region = Region::Global;
    else if (region == "heap") e.region = Region::Heap;
    else throw std::runtime_error("load_corpus: unknown region " + region);
    e.is_vulnerable = j.at("vulnerable").get<bool>();
    e.float_first = j.at("float_first").get<bool>();
    e.input = j.at("input").get<std::vector<uint8_t>>();
    for (const auto& pj : j.at("points")) {
      OverflowPoint p;
      p.iaddr = pj.at("iaddr").get<uint64_t>();
      p.byte_lo = pj.at("byte_lo").get<uint64_t>();
      p.len = pj.at("len").get<uint32_t>();
      p.corrupted_addr = pj.at("corrupted_addr").get<uint64_t>();
      e.ground_truth.push_back(p);
    }
    for (const auto& vj : j.at("var_spans"))
      e.var_spans.push_back({vj[0].get<uint64_t>(), vj[1].get<uint32_t>()});
    std::ifstream asm_in(std::filesystem::path(dir) / j.at("file").get<std::string>());
    if (!asm_in) throw std::runtime_error("load_corpus: missing " + j.at("file").get<std::string>());
    std::stringstream ss;
    ss << asm_in.rdbuf();
    e.program = assemble(ss.str());
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace bofspot
