#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "bofspot/builder.hpp"
#include "bofspot/corpus.hpp"
#include "bofspot/cut.hpp"
#include "bofspot/evaluate.hpp"
#include "bofspot/graph_io.hpp"
#include "bofspot/machine.hpp"
#include "bofspot/rng.hpp"
#include "bofspot/shadow.hpp"
#include "bofspot/strip.hpp"
#include "bofspot/trace.hpp"
#include "bofspot/train.hpp"

namespace bofspot {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path);
}

CorpusConfig corpus_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("corpus config: malformed JSON: ") + e.what());
  }
  CorpusConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.count = j.value("count", c.count);
    c.vulnerable_fraction = j.value("vulnerable_fraction", c.vulnerable_fraction);
    c.float_fraction = j.value("float_fraction", c.float_fraction);
    c.double_overflow_fraction = j.value("double_overflow_fraction", c.double_overflow_fraction);
    c.min_elems = j.value("min_elems", c.min_elems);
    c.max_elems = j.value("max_elems", c.max_elems);
    c.max_overflow_elems = j.value("max_overflow_elems", c.max_overflow_elems);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("corpus config: schema violation: ") + e.what());
  }
  return c;
}

PipelineConfig pipeline_config(const std::string& path, const std::optional<uint64_t>& seed) {
  PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_pipeline_config(slurp(path));
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

// Trace files are JSON Lines: a header object (mode, floated-instruction
// fixture flag, shadow map) followed by one record per line.
std::string trace_file_text(const std::string& program, const std::string& mode,
                            bool float_first, const ShadowMap& shadow, const Trace& t) {
  ordered_json h;
  h["program"] = program;
  h["mode"] = mode;
  h["float_first"] = float_first;
  h["shadow"] = ordered_json::parse(serialize_shadow(shadow));
  std::ostringstream os;
  os << h.dump() << "\n";
  serialize_trace(t, os);
  return os.str();
}

const CorpusEntry& entry_named(const std::vector<CorpusEntry>& entries, const std::string& name) {
  for (const CorpusEntry& e : entries)
    if (e.name == name) return e;
  throw std::runtime_error("no corpus entry named " + name);
}

std::vector<std::pair<std::string, FlowGraph>> load_graph_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& de : fs::directory_iterator(dir))
    if (de.is_regular_file() && de.path().extension() == ".json")
      files.push_back(de.path().string());
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, FlowGraph>> out;
  for (const std::string& f : files) {
    try {
      out.emplace_back(fs::path(f).stem().string(), load_graph(slurp(f)));
    } catch (const std::exception& e) {
      throw std::runtime_error(f + ": " + e.what());
    }
  }
  if (out.empty()) throw std::runtime_error("no .json graphs under " + dir);
  return out;
}

std::vector<GraphBundle> corpus_bundles(const std::string& dir) {
  std::vector<GraphBundle> bundles;
  for (const CorpusEntry& e : load_corpus(dir)) bundles.push_back(bundle_from_entry(e));
  return bundles;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"silent buffer-overflow localization over execution-trace flow graphs",
               "bofspot"};
  app.require_subcommand(1);

  // ---- gen-corpus ----------------------------------------------------------
  struct {
    std::string config, out;
    std::optional<uint64_t> seed;
    std::optional<uint32_t> count;
  } gen;
  CLI::App* c_gen = app.add_subcommand("gen-corpus", "synthesize a labeled program corpus");
  c_gen->add_option("--config", gen.config, "corpus knobs (JSON)");
  c_gen->add_option("--seed", gen.seed, "override the config seed");
  c_gen->add_option("--count", gen.count, "override the program count");
  c_gen->add_option("--out", gen.out, "output directory")->required();
  c_gen->callback([&] {
    CorpusConfig cc = gen.config.empty() ? CorpusConfig{} : corpus_config_from_json(slurp(gen.config));
    if (gen.seed) cc.seed = *gen.seed;
    if (gen.count) cc.count = *gen.count;
    std::vector<CorpusEntry> entries = generate_corpus(cc);
    save_corpus(gen.out, entries);
    size_t vuln = 0;
    for (const CorpusEntry& e : entries) vuln += e.is_vulnerable ? 1 : 0;
    std::cerr << "wrote " << entries.size() << " programs (" << vuln << " vulnerable) to "
              << gen.out << "\n";
  });

  // ---- trace ---------------------------------------------------------------
  struct {
    std::string corpus, name, mode = "instrumented", out;
  } tr;
  CLI::App* c_tr = app.add_subcommand("trace", "execute one corpus program, record its trace");
  c_tr->add_option("--corpus", tr.corpus, "corpus directory")->required();
  c_tr->add_option("--name", tr.name, "program name, e.g. prog_0003")->required();
  c_tr->add_option("--mode", tr.mode, "plain | instrumented")
      ->check(CLI::IsMember({"plain", "instrumented"}));
  c_tr->add_option("--out", tr.out, "trace file (JSON Lines)")->required();
  c_tr->callback([&] {
    std::vector<CorpusEntry> entries = load_corpus(tr.corpus);
    const CorpusEntry& e = entry_named(entries, tr.name);
    RunOptions opt;
    opt.mode = tr.mode == "plain" ? Mode::Plain : Mode::Instrumented;
    opt.float_first_insn = e.float_first && opt.mode == Mode::Instrumented;
    RunResult rr = run(e.program, e.input, opt);
    if (rr.faulted) throw std::runtime_error(tr.name + " faulted during tracing");
    spit(tr.out, trace_file_text(e.name, tr.mode, opt.float_first_insn, rr.shadow, rr.trace));
    std::cerr << "traced " << e.name << " (" << tr.mode << "): " << rr.trace.size()
              << " records, " << rr.points.size() << " overflow points -> " << tr.out << "\n";
  });

  // ---- build-graph ---------------------------------------------------------
  struct {
    std::string trace, out;
  } bg;
  CLI::App* c_bg = app.add_subcommand("build-graph", "strip a trace and build its flow graph");
  c_bg->add_option("--trace", bg.trace, "trace file from the trace command")->required();
  c_bg->add_option("--out", bg.out, "graph file (JSON)")->required();
  c_bg->callback([&] {
    std::string text = slurp(bg.trace);
    size_t nl = text.find('\n');
    if (nl == std::string::npos) throw std::runtime_error(bg.trace + ": missing trace records");
    ShadowMap shadow;
    try {
      nlohmann::json header = nlohmann::json::parse(text.substr(0, nl));
      shadow = load_shadow(header.at("shadow").dump());
    } catch (const std::exception& e) {
      throw std::runtime_error(bg.trace + ": bad header line: " + e.what());
    }
    StripResult sr = strip_instrumentation(parse_trace_string(text.substr(nl + 1)));
    FlowGraph g = build_graph(sr.trace, sr.marks, shadow);
    spit(bg.out, serialize_graph(g));
    size_t vuln = 0;
    for (const Node& n : g.nodes) vuln += n.label == Label::Vulnerable ? 1 : 0;
    std::cerr << "graph: " << g.nodes.size() << " nodes, " << g.edges.size() << " edges, ";
    if (g.labeled())
      std::cerr << vuln << " vulnerable -> " << bg.out << "\n";
    else
      std::cerr << "unlabeled -> " << bg.out << "\n";
  });

  // ---- cut -----------------------------------------------------------------
  struct {
    std::string graph, out;
    uint32_t subgraphs = 1, hops = 3;
    double neg_ratio = 3.0;
    uint64_t seed = 1;
  } ct;
  CLI::App* c_ct = app.add_subcommand("cut", "sample targets and cut training subgraphs");
  c_ct->add_option("--graph", ct.graph, "labeled graph file")->required();
  c_ct->add_option("--out", ct.out, "output directory")->required();
  c_ct->add_option("--subgraphs", ct.subgraphs, "batches to cut the samples into");
  c_ct->add_option("--hops", ct.hops, "support-node radius");
  c_ct->add_option("--neg-ratio", ct.neg_ratio, "benign targets per vulnerable node");
  c_ct->add_option("--seed", ct.seed, "sampling seed");
  c_ct->callback([&] {
    FlowGraph g = load_graph(slurp(ct.graph));
    std::vector<uint32_t> samples = select_samples(g, ct.neg_ratio, ct.seed);
    std::vector<SubgraphSample> subs =
        cut(g, samples, ct.subgraphs, ct.hops, fs::path(ct.graph).stem().string());
    fs::create_directories(ct.out);
    for (size_t i = 0; i < subs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sub_%04zu.json", i);
      spit((fs::path(ct.out) / name).string(), serialize_subgraph(subs[i]));
    }
    std::cerr << "sampled " << samples.size() << " targets into " << subs.size()
              << " subgraphs under " << ct.out << "\n";
  });

  // ---- train ---------------------------------------------------------------
  struct {
    std::string graphs, config, out, history, variant, features, edges = "all";
    std::optional<uint64_t> seed;
  } tn;
  CLI::App* c_tn = app.add_subcommand("train", "train a model on a directory of labeled graphs");
  c_tn->add_option("--graphs", tn.graphs, "directory of graph JSON files")->required();
  c_tn->add_option("--config", tn.config, "pipeline config (JSON)");
  c_tn->add_option("--seed", tn.seed, "override the config seed");
  c_tn->add_option("--out", tn.out, "checkpoint file (JSON)")->required();
  c_tn->add_option("--history", tn.history, "also write per-epoch loss/F1 CSV here");
  c_tn->add_option("--variant", tn.variant, "brgcn | rgcn | convgnn")
      ->check(CLI::IsMember({"brgcn", "rgcn", "convgnn"}));
  c_tn->add_option("--features", tn.features, "kind | nodeid")
      ->check(CLI::IsMember({"kind", "nodeid"}));
  c_tn->add_option("--edges", tn.edges, "all | dflow-only")
      ->check(CLI::IsMember({"all", "dflow-only"}));
  c_tn->callback([&] {
    PipelineConfig cfg = pipeline_config(tn.config, tn.seed);
    if (!tn.variant.empty()) cfg.model.variant = variant_from_code(tn.variant);
    if (!tn.features.empty()) {
      cfg.model.features = feature_from_code(tn.features);
      cfg.model.dims[0] = feature_dim(cfg.model.features);
    }
    cfg.validate();

    std::vector<std::pair<std::string, FlowGraph>> graphs = load_graph_dir(tn.graphs);
    if (tn.edges == "dflow-only")
      for (auto& [name, g] : graphs) g = dataflow_only(g);

    std::vector<size_t> order(graphs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(splitmix64(cfg.seed));
    std::shuffle(order.begin(), order.end(), rng);
    size_t n_val = static_cast<size_t>(std::llround(cfg.val_fraction * graphs.size()));

    std::vector<SubgraphSample> train_b, val_b;
    size_t train_graphs = 0;
    for (size_t pos = 0; pos < order.size(); ++pos) {
      const auto& [name, g] = graphs[order[pos]];
      std::vector<uint32_t> samples =
          select_samples(g, cfg.neg_ratio, splitmix64(splitmix64(cfg.seed) + order[pos]));
      if (samples.empty()) continue;
      std::vector<SubgraphSample> cuts = cut(g, samples, cfg.subgraphs, cfg.hops, name);
      auto& dst = pos < n_val ? val_b : train_b;
      for (SubgraphSample& c : cuts) dst.push_back(std::move(c));
      train_graphs += pos < n_val ? 0 : 1;
    }

    TrainResult res = train_model(cfg.model, cfg.optim, cfg.loss, train_b, val_b, cfg.seed);
    spit(tn.out, serialize_model(res.model));
    if (!tn.history.empty()) spit(tn.history, history_csv(res.history));
    std::cerr << "trained " << variant_code(cfg.model.variant) << " on " << train_graphs
              << " graphs (" << train_b.size() << " batches, " << res.history.size()
              << " epochs): best val F1 " << res.best_val_f1 << " at epoch " << res.best_epoch
              << " -> " << tn.out << "\n";
  });

  // ---- predict -------------------------------------------------------------
  struct {
    std::string graph, ckpt, out;
  } pr;
  CLI::App* c_pr = app.add_subcommand("predict", "per-node vulnerability probabilities");
  c_pr->add_option("--graph", pr.graph, "graph file")->required();
  c_pr->add_option("--ckpt", pr.ckpt, "model checkpoint")->required();
  c_pr->add_option("--out", pr.out, "predictions file (JSON)")->required();
  c_pr->callback([&] {
    FlowGraph g = load_graph(slurp(pr.graph));
    Model m = load_model(slurp(pr.ckpt));
    SubgraphSample whole = wrap_full_graph(g, fs::path(pr.graph).stem().string());
    std::vector<std::pair<uint32_t, double>> probs = predict_probs(m, whole);
    ordered_json arr = ordered_json::array();
    size_t npos = 0;
    for (const auto& [id, p] : probs) {
      ordered_json j;
      j["node"] = id;
      j["p_vuln"] = p;
      j["vulnerable"] = predict_vulnerable(p);
      npos += predict_vulnerable(p) ? 1 : 0;
      arr.push_back(std::move(j));
    }
    spit(pr.out, arr.dump(1));
    std::cerr << "predicted " << probs.size() << " nodes, " << npos << " vulnerable -> "
              << pr.out << "\n";
  });

  // ---- locate --------------------------------------------------------------
  struct {
    std::string graph, preds, out;
  } lc;
  CLI::App* c_lc = app.add_subcommand("locate", "group predictions into overflow findings");
  c_lc->add_option("--graph", lc.graph, "graph file")->required();
  c_lc->add_option("--preds", lc.preds, "predictions from the predict command")->required();
  c_lc->add_option("--out", lc.out, "findings file (JSON)")->required();
  c_lc->callback([&] {
    FlowGraph g = load_graph(slurp(lc.graph));
    std::vector<std::pair<uint32_t, double>> probs;
    try {
      nlohmann::json arr = nlohmann::json::parse(slurp(lc.preds));
      for (const auto& j : arr)
        probs.emplace_back(j.at("node").get<uint32_t>(), j.at("p_vuln").get<double>());
    } catch (const std::exception& e) {
      throw std::runtime_error(lc.preds + ": bad predictions file: " + e.what());
    }
    std::vector<Finding> findings = localize(g, probs);
    spit(lc.out, findings_json(findings));
    if (findings.empty()) {
      std::cerr << "no suspected overflow points\n";
    } else {
      for (const Finding& f : findings) {
        char line[128];
        std::snprintf(line, sizeof line,
                      "insn %llu corrupts 0x%llx (confidence %.3f, %zu nodes)\n",
                      static_cast<unsigned long long>(f.iaddr),
                      static_cast<unsigned long long>(f.corrupted_addr), f.confidence,
                      f.node_ids.size());
        std::cerr << line;
      }
      std::cerr << findings.size() << " findings -> " << lc.out << "\n";
    }
  });

  // ---- eval ----------------------------------------------------------------
  struct {
    std::string corpus, config, out;
    uint32_t folds = 8, workers = 1;
    std::optional<uint64_t> seed;
  } ev;
  CLI::App* c_ev = app.add_subcommand("eval", "k-fold cross-validation over a corpus");
  c_ev->add_option("--corpus", ev.corpus, "corpus directory")->required();
  c_ev->add_option("--config", ev.config, "pipeline config (JSON)");
  c_ev->add_option("--seed", ev.seed, "override the config seed");
  c_ev->add_option("--folds", ev.folds, "fold count (>= 3)");
  c_ev->add_option("--workers", ev.workers, "folds trained concurrently");
  c_ev->add_option("--out", ev.out, "report file (JSON)")->required();
  c_ev->callback([&] {
    PipelineConfig cfg = pipeline_config(ev.config, ev.seed);
    std::vector<GraphBundle> bundles = corpus_bundles(ev.corpus);
    CvResult r = cross_validate(bundles, cfg, ev.folds, ev.workers);
    spit(ev.out, serialize_cv(r));
    char line[160];
    std::snprintf(line, sizeof line,
                  "%u-fold CV on %zu graphs: mean F1 %.4f, detection %llu/%llu "
                  "instruction-correct, %llu address-correct, %llu false findings\n",
                  ev.folds, bundles.size(), r.mean.f1,
                  static_cast<unsigned long long>(r.detection.detected),
                  static_cast<unsigned long long>(r.detection.truths),
                  static_cast<unsigned long long>(r.detection.addr_correct),
                  static_cast<unsigned long long>(r.detection.false_findings));
    std::cerr << line;
  });

  // ---- ablate --------------------------------------------------------------
  struct {
    std::string corpus, config, out;
    uint32_t trials = 3, workers = 1;
    std::optional<uint64_t> seed;
  } ab;
  CLI::App* c_ab = app.add_subcommand("ablate", "model-family comparison grid");
  c_ab->add_option("--corpus", ab.corpus, "corpus directory")->required();
  c_ab->add_option("--config", ab.config, "pipeline config (JSON)");
  c_ab->add_option("--seed", ab.seed, "override the config seed");
  c_ab->add_option("--trials", ab.trials, "seeds to average over (seed, seed+1, ...)");
  c_ab->add_option("--workers", ab.workers, "grid cells trained concurrently");
  c_ab->add_option("--out", ab.out, "table file (CSV)")->required();
  c_ab->callback([&] {
    PipelineConfig cfg = pipeline_config(ab.config, ab.seed);
    if (ab.trials == 0) throw std::runtime_error("ablate: --trials must be positive");
    std::vector<uint64_t> seeds(ab.trials);
    std::iota(seeds.begin(), seeds.end(), cfg.seed);
    std::vector<GraphBundle> bundles = corpus_bundles(ab.corpus);
    std::vector<AblationRow> rows = run_ablations(bundles, cfg, seeds, ab.workers);
    spit(ab.out, ablation_csv(rows));
    for (const AblationRow& r : rows) {
      char line[96];
      std::snprintf(line, sizeof line, "%-14s F1 %.4f\n", r.name.c_str(), r.f1);
      std::cerr << line;
    }
  });

  std::vector<const char*> argv;
  argv.push_back("bofspot");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace bofspot
