#include "bofspot/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "bofspot/builder.hpp"
#include "bofspot/cut.hpp"
#include "bofspot/rng.hpp"
#include "bofspot/strip.hpp"

namespace bofspot {

namespace {

using nlohmann::ordered_json;

// Per-graph sampling seed shared by every configuration scoring the same
// split, so comparisons between rows pair the exact same target nodes.
uint64_t sample_seed(uint64_t base, uint64_t salt, uint64_t graph_index) {
  return splitmix64(splitmix64(base + salt) + graph_index);
}

// Samples targets on each listed graph and cuts them into training batches.
// Graphs without positives (benign programs) contribute no batches.
std::vector<SubgraphSample> batches_for(const std::vector<GraphBundle>& bundles,
                                        const std::vector<size_t>& idxs,
                                        const PipelineConfig& cfg, uint64_t base_seed,
                                        uint64_t salt) {
  std::vector<SubgraphSample> out;
  for (size_t gi : idxs) {
    const GraphBundle& b = bundles[gi];
    std::vector<uint32_t> samples =
        select_samples(b.graph, cfg.neg_ratio, sample_seed(base_seed, salt, gi));
    if (samples.empty()) continue;
    std::vector<SubgraphSample> cuts = cut(b.graph, samples, cfg.subgraphs, cfg.hops, b.name);
    for (SubgraphSample& c : cuts) out.push_back(std::move(c));
  }
  return out;
}

ordered_json metrics_obj(const Metrics& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  return j;
}

ordered_json detection_obj(const DetectionStats& d) {
  ordered_json j;
  j["truths"] = d.truths;
  j["detected"] = d.detected;
  j["addr_correct"] = d.addr_correct;
  j["false_findings"] = d.false_findings;
  return j;
}

void accumulate(DetectionStats& into, const DetectionStats& d) {
  into.truths += d.truths;
  into.detected += d.detected;
  into.addr_correct += d.addr_correct;
  into.false_findings += d.false_findings;
}

}  // namespace

void PipelineConfig::validate() const {
  model.validate();
  if (hops == 0) throw std::invalid_argument("pipeline: hops must be positive");
  if (hops != model.steps())
    throw std::invalid_argument("pipeline: hops must equal the model's message-passing steps");
  if (subgraphs == 0) throw std::invalid_argument("pipeline: subgraphs must be positive");
  if (!(neg_ratio >= 0)) throw std::invalid_argument("pipeline: neg_ratio must be non-negative");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("pipeline: val_fraction must lie in [0, 1)");
  if (optim.epochs == 0) throw std::invalid_argument("pipeline: epochs must be positive");
  if (!(optim.lr > 0)) throw std::invalid_argument("pipeline: learning rate must be positive");
  if (!(loss.w_benign >= 0) || !(loss.w_vuln >= 0))
    throw std::invalid_argument("pipeline: class weights must be non-negative");
}

std::string serialize_pipeline_config(const PipelineConfig& cfg) {
  cfg.validate();
  ordered_json j;
  j["seed"] = cfg.seed;
  ordered_json m;
  m["variant"] = variant_code(cfg.model.variant);
  m["dims"] = cfg.model.dims;
  m["dropout"] = cfg.model.dropout;
  m["features"] = feature_code(cfg.model.features);
  j["model"] = m;
  ordered_json l;
  l["w_benign"] = cfg.loss.w_benign;
  l["w_vuln"] = cfg.loss.w_vuln;
  j["loss"] = l;
  ordered_json o;
  o["lr"] = cfg.optim.lr;
  o["beta1"] = cfg.optim.beta1;
  o["beta2"] = cfg.optim.beta2;
  o["eps"] = cfg.optim.eps;
  o["epochs"] = cfg.optim.epochs;
  o["patience"] = cfg.optim.patience;
  j["optim"] = o;
  ordered_json s;
  s["neg_ratio"] = cfg.neg_ratio;
  s["subgraphs"] = cfg.subgraphs;
  s["hops"] = cfg.hops;
  j["sampling"] = s;
  j["val_fraction"] = cfg.val_fraction;
  return j.dump(1);
}

PipelineConfig load_pipeline_config(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_pipeline_config: malformed JSON: ") + e.what());
  }
  PipelineConfig cfg;
  try {
    if (!j.is_object()) throw std::runtime_error("top level must be an object");
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("model")) {
      const auto& m = j.at("model");
      cfg.model.variant = variant_from_code(m.value("variant", variant_code(cfg.model.variant)));
      if (m.contains("dims")) cfg.model.dims = m.at("dims").get<std::vector<uint32_t>>();
      cfg.model.dropout = m.value("dropout", cfg.model.dropout);
      cfg.model.features =
          feature_from_code(m.value("features", feature_code(cfg.model.features)));
    }
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      cfg.loss.w_benign = l.value("w_benign", cfg.loss.w_benign);
      cfg.loss.w_vuln = l.value("w_vuln", cfg.loss.w_vuln);
    }
    if (j.contains("optim")) {
      const auto& o = j.at("optim");
      cfg.optim.lr = o.value("lr", cfg.optim.lr);
      cfg.optim.beta1 = o.value("beta1", cfg.optim.beta1);
      cfg.optim.beta2 = o.value("beta2", cfg.optim.beta2);
      cfg.optim.eps = o.value("eps", cfg.optim.eps);
      cfg.optim.epochs = o.value("epochs", cfg.optim.epochs);
      cfg.optim.patience = o.value("patience", cfg.optim.patience);
    }
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      cfg.neg_ratio = s.value("neg_ratio", cfg.neg_ratio);
      cfg.subgraphs = s.value("subgraphs", cfg.subgraphs);
      cfg.hops = s.value("hops", cfg.hops);
    }
    cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
  } catch (const std::runtime_error&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_pipeline_config: schema violation: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_pipeline_config: schema violation: ") + e.what());
  }
  return cfg;
}

GraphBundle bundle_from_entry(const CorpusEntry& e) {
  RunOptions opt;
  opt.mode = Mode::Instrumented;
  opt.float_first_insn = e.float_first;
  RunResult rr = run(e.program, e.input, opt);
  if (rr.faulted) throw std::runtime_error("bundle_from_entry: program faulted: " + e.name);
  StripResult sr = strip_instrumentation(rr.trace);
  GraphBundle b;
  b.name = e.name;
  b.graph = build_graph(sr.trace, sr.marks, rr.shadow);
  b.truth = rr.points;
  b.var_spans = rr.layout.vars;
  return b;
}

std::vector<Finding> localize(const FlowGraph& g,
                              const std::vector<std::pair<uint32_t, double>>& probs) {
  // One finding per (writing instruction, written address): an instruction
  // that corrupts several neighbors (an off-by-two loop, say) yields one
  // finding per victim rather than collapsing them.
  std::map<std::pair<uint64_t, uint64_t>, Finding> groups;
  for (const auto& [id, p] : probs) {
    if (!predict_vulnerable(p)) continue;
    if (id >= g.nodes.size()) throw std::invalid_argument("localize: node id out of range");
    if (g.nodes[id].kind != NodeKind::Mem) continue;
    const auto& insn = g.maps.insn[id];
    const auto& span = g.maps.addr[id];
    if (!insn || !span) continue;  // initial-state nodes precede any instruction
    Finding& f = groups[{*insn, span->addr}];
    f.iaddr = *insn;
    f.corrupted_addr = span->addr;
    f.node_ids.push_back(id);
    f.confidence = std::max(f.confidence, p);
  }
  std::vector<Finding> out;
  out.reserve(groups.size());
  for (auto& [key, f] : groups) {
    std::sort(f.node_ids.begin(), f.node_ids.end());
    out.push_back(std::move(f));
  }
  return out;  // map order: ascending (iaddr, corrupted_addr)
}

std::string findings_json(const std::vector<Finding>& findings) {
  ordered_json arr = ordered_json::array();
  for (const Finding& f : findings) {
    ordered_json j;
    j["iaddr"] = f.iaddr;
    j["corrupted_addr"] = f.corrupted_addr;
    j["node_ids"] = f.node_ids;
    j["confidence"] = f.confidence;
    arr.push_back(std::move(j));
  }
  return arr.dump(1);
}

DetectionStats score_detection(const std::vector<Finding>& findings,
                               const std::vector<OverflowPoint>& truth,
                               const std::vector<VarSpan>& spans) {
  DetectionStats st;
  st.truths = truth.size();
  std::set<uint64_t> truth_iaddrs;
  for (const OverflowPoint& t : truth) truth_iaddrs.insert(t.iaddr);
  auto span_of = [&](uint64_t a) -> const VarSpan* {
    for (const VarSpan& v : spans)
      if (v.contains(a)) return &v;
    return nullptr;
  };
  for (const OverflowPoint& t : truth) {
    bool detected = false, addr_ok = false;
    const VarSpan* vs = span_of(t.corrupted_addr);
    for (const Finding& f : findings) {
      if (f.iaddr != t.iaddr) continue;
      detected = true;
      if (vs && vs->contains(f.corrupted_addr)) addr_ok = true;
    }
    st.detected += detected ? 1 : 0;
    st.addr_correct += addr_ok ? 1 : 0;
  }
  for (const Finding& f : findings)
    if (!truth_iaddrs.count(f.iaddr)) ++st.false_findings;
  return st;
}

CvResult cross_validate(const std::vector<GraphBundle>& bundles, const PipelineConfig& cfg,
                        uint32_t folds, uint32_t workers) {
  cfg.validate();
  if (folds < 3)
    throw std::invalid_argument("cross_validate: need at least 3 folds (test, val, train)");
  if (bundles.size() < folds)
    throw std::invalid_argument("cross_validate: more folds than graphs");
  for (const GraphBundle& b : bundles)
    if (!b.graph.labeled())
      throw std::invalid_argument("cross_validate: graphs must be labeled");

  const size_t n = bundles.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(splitmix64(cfg.seed));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<size_t>> fold_idx(folds);
  size_t q = n / folds, r = n % folds, pos = 0;
  for (uint32_t f = 0; f < folds; ++f) {
    size_t len = q + (f < r ? 1 : 0);
    fold_idx[f].assign(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }

  auto run_fold = [&](uint32_t f) {
    uint32_t vf = (f + 1) % folds;
    std::vector<size_t> train;
    for (uint32_t g = 0; g < folds; ++g)
      if (g != f && g != vf) train.insert(train.end(), fold_idx[g].begin(), fold_idx[g].end());

    uint64_t fsalt = 0xF01Du + static_cast<uint64_t>(f);
    std::vector<SubgraphSample> train_b = batches_for(bundles, train, cfg, cfg.seed, fsalt);
    std::vector<SubgraphSample> val_b = batches_for(bundles, fold_idx[vf], cfg, cfg.seed, fsalt);
    std::vector<SubgraphSample> test_b = batches_for(bundles, fold_idx[f], cfg, cfg.seed, fsalt);

    uint64_t mseed = splitmix64(cfg.seed + 1000003ULL * static_cast<uint64_t>(f + 1));
    TrainResult tr = train_model(cfg.model, cfg.optim, cfg.loss, train_b, val_b, mseed);

    FoldResult fr;
    fr.metrics = score_batches(tr.model, test_b);
    for (size_t gi : fold_idx[f]) {
      SubgraphSample whole = wrap_full_graph(bundles[gi].graph, bundles[gi].name);
      std::vector<std::pair<uint32_t, double>> probs = predict_probs(tr.model, whole);
      std::vector<Finding> found = localize(bundles[gi].graph, probs);
      accumulate(fr.detection, score_detection(found, bundles[gi].truth, bundles[gi].var_spans));
    }
    return fr;
  };

  CvResult res;
  res.folds.resize(folds);
  std::exception_ptr failure;
  int threads = static_cast<int>(std::max(1u, std::min(workers, folds)));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int f = 0; f < static_cast<int>(folds); ++f) {
    try {
      res.folds[f] = run_fold(static_cast<uint32_t>(f));
    } catch (...) {
#pragma omp critical(bofspot_cv_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const FoldResult& fr : res.folds) {
    res.mean.accuracy += fr.metrics.accuracy / folds;
    res.mean.precision += fr.metrics.precision / folds;
    res.mean.recall += fr.metrics.recall / folds;
    res.mean.f1 += fr.metrics.f1 / folds;
    tp += fr.metrics.tp;
    fp += fr.metrics.fp;
    tn += fr.metrics.tn;
    fn += fr.metrics.fn;
    accumulate(res.detection, fr.detection);
  }
  res.mean.tp = tp;
  res.mean.fp = fp;
  res.mean.tn = tn;
  res.mean.fn = fn;
  return res;
}

std::string serialize_cv(const CvResult& r) {
  ordered_json j;
  j["folds"] = ordered_json::array();
  for (const FoldResult& fr : r.folds) {
    ordered_json f;
    f["metrics"] = metrics_obj(fr.metrics);
    f["detection"] = detection_obj(fr.detection);
    j["folds"].push_back(std::move(f));
  }
  j["mean"] = metrics_obj(r.mean);
  j["detection"] = detection_obj(r.detection);
  return j.dump(1);
}

FlowGraph dataflow_only(const FlowGraph& g) {
  FlowGraph out;
  out.nodes = g.nodes;
  out.maps = g.maps;
  out.edges.reserve(g.edges.size());
  for (const Edge& e : g.edges)
    if (e.rel == Relation::DataFlow) out.edges.push_back(e);
  out.validate();
  return out;
}

std::vector<AblationRow> run_ablations(const std::vector<GraphBundle>& bundles,
                                       const PipelineConfig& cfg,
                                       const std::vector<uint64_t>& seeds, uint32_t workers) {
  cfg.validate();
  if (seeds.empty()) throw std::invalid_argument("run_ablations: need at least one seed");
  const size_t n = bundles.size();
  if (n < 8) throw std::invalid_argument("run_ablations: need at least 8 graphs");
  for (const GraphBundle& b : bundles)
    if (!b.graph.labeled())
      throw std::invalid_argument("run_ablations: graphs must be labeled");

  static const char* kRows[6] = {"brgcn",        "rgcn",         "convgnn",
                                 "brgcn_dfonly", "brgcn_nodeid", "brgcn_oneprog"};
  double sums[6][4] = {};

  std::vector<GraphBundle> dfb;
  dfb.reserve(n);
  for (const GraphBundle& b : bundles)
    dfb.push_back({b.name, dataflow_only(b.graph), b.truth, b.var_spans});

  // Splits are precomputed serially so precondition failures surface before
  // any parallel work starts.
  struct SeedSplit {
    uint64_t seed = 0;
    std::vector<size_t> train, val, test;
    std::vector<size_t> one_train;  // single vulnerable graph for the one-program row
  };
  std::vector<SeedSplit> splits;
  for (uint64_t s : seeds) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(splitmix64(s));
    std::shuffle(order.begin(), order.end(), rng);

    size_t n_test = std::max<size_t>(1, static_cast<size_t>(std::llround(0.25 * n)));
    size_t n_val = std::max<size_t>(1, static_cast<size_t>(std::llround(cfg.val_fraction * n)));
    if (n_test + n_val >= n)
      throw std::invalid_argument("run_ablations: not enough graphs for the holdout split");
    SeedSplit sp;
    sp.seed = s;
    sp.test.assign(order.begin(), order.begin() + n_test);
    sp.val.assign(order.begin() + n_test, order.begin() + n_test + n_val);
    sp.train.assign(order.begin() + n_test + n_val, order.end());
    for (size_t gi : sp.train)
      if (!bundles[gi].truth.empty()) {
        sp.one_train = {gi};
        break;
      }
    if (sp.one_train.empty())
      throw std::runtime_error("run_ablations: no vulnerable graph in the training split");
    splits.push_back(std::move(sp));
  }

  auto run_cell = [&](const SeedSplit& sp, int row) {
    const std::vector<GraphBundle>& src = (row == 3) ? dfb : bundles;
    PipelineConfig rowcfg = cfg;
    rowcfg.model.variant = row == 1   ? Variant::Rgcn
                           : row == 2 ? Variant::ConvGnn
                                      : Variant::Brgcn;
    if (row == 4) {
      rowcfg.model.features = FeatureMode::NodeIdHash;
      rowcfg.model.dims[0] = feature_dim(rowcfg.model.features);
    }
    const std::vector<size_t>& tr_idx = (row == 5) ? sp.one_train : sp.train;

    std::vector<SubgraphSample> train_b = batches_for(src, tr_idx, rowcfg, sp.seed, 0);
    std::vector<SubgraphSample> val_b = batches_for(src, sp.val, rowcfg, sp.seed, 0);
    std::vector<SubgraphSample> test_b = batches_for(src, sp.test, rowcfg, sp.seed, 0);

    TrainResult t = train_model(rowcfg.model, cfg.optim, cfg.loss, train_b, val_b,
                                splitmix64(sp.seed + 0x5EEDu));
    return score_batches(t.model, test_b);
  };

  std::vector<Metrics> cells(splits.size() * 6);
  std::exception_ptr failure;
  int threads =
      static_cast<int>(std::max<size_t>(1, std::min<size_t>(workers, cells.size())));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long j = 0; j < static_cast<long>(cells.size()); ++j) {
    try {
      cells[j] = run_cell(splits[j / 6], static_cast<int>(j % 6));
    } catch (...) {
#pragma omp critical(bofspot_ablation_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  // Fixed-order reduction keeps the averages bitwise identical for any
  // worker count.
  for (size_t si = 0; si < splits.size(); ++si)
    for (int row = 0; row < 6; ++row) {
      const Metrics& m = cells[si * 6 + row];
      sums[row][0] += m.accuracy;
      sums[row][1] += m.precision;
      sums[row][2] += m.recall;
      sums[row][3] += m.f1;
    }

  std::vector<AblationRow> rows;
  rows.reserve(6);
  double k = static_cast<double>(seeds.size());
  for (int row = 0; row < 6; ++row)
    rows.push_back({kRows[row], sums[row][0] / k, sums[row][1] / k, sums[row][2] / k,
                    sums[row][3] / k});
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "row,accuracy,precision,recall,f1\n";
  os << std::setprecision(17);
  for (const AblationRow& r : rows)
    os << r.name << ',' << r.accuracy << ',' << r.precision << ',' << r.recall << ',' << r.f1
       << '\n';
  return os.str();
}

}  // namespace bofspot
