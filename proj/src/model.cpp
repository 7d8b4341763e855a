#include "bofspot/model.hpp"

#include <cmath>
#include <stdexcept>

#include "bofspot/rng.hpp"
#include "json.hpp"

namespace bofspot {

const char* variant_code(Variant v) {
  switch (v) {
    case Variant::Brgcn: return "brgcn";
    case Variant::Rgcn: return "rgcn";
    case Variant::ConvGnn: return "convgnn";
  }
  throw std::runtime_error("variant_code: bad variant");
}

Variant variant_from_code(const std::string& s) {
  if (s == "brgcn") return Variant::Brgcn;
  if (s == "rgcn") return Variant::Rgcn;
  if (s == "convgnn") return Variant::ConvGnn;
  throw std::runtime_error("variant_from_code: unknown variant '" + s + "'");
}

const char* feature_code(FeatureMode f) {
  return f == FeatureMode::KindOneHot ? "kind" : "nodeid";
}

FeatureMode feature_from_code(const std::string& s) {
  if (s == "kind") return FeatureMode::KindOneHot;
  if (s == "nodeid") return FeatureMode::NodeIdHash;
  throw std::runtime_error("feature_from_code: unknown feature mode '" + s + "'");
}

uint32_t feature_dim(FeatureMode f) { return f == FeatureMode::KindOneHot ? 4 : 64; }

void ModelConfig::validate() const {
  if (dims.size() < 2) throw std::runtime_error("model config: need at least one layer");
  if (dims.front() != feature_dim(features))
    throw std::runtime_error("model config: input width must match the feature mode");
  if (dims.back() != 2) throw std::runtime_error("model config: output width must be 2");
  for (uint32_t d : dims)
    if (d == 0) throw std::runtime_error("model config: zero-width layer");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw std::runtime_error("model config: dropout must be in [0, 1)");
}

int msg_slot(Variant v, int rel, int dir) {
  switch (v) {
    case Variant::Brgcn: return 1 + rel * 2 + dir;
    case Variant::Rgcn: return dir == 0 ? 1 + rel : -1;
    case Variant::ConvGnn: return 1 + dir;
  }
  return -1;
}

uint32_t slots_per_layer(Variant v) {
  switch (v) {
    case Variant::Brgcn: return 1 + 2 * kNumRelations;
    case Variant::Rgcn: return 1 + kNumRelations;
    case Variant::ConvGnn: return 1 + 2;
  }
  return 0;
}

namespace {

// message buckets in slot order; rel == -1 aggregates every relation
struct Bucket {
  int rel;
  int dir;
};

std::vector<Bucket> buckets_for(Variant v) {
  std::vector<Bucket> b;
  switch (v) {
    case Variant::Brgcn:
      for (int r = 0; r < kNumRelations; r++)
        for (int d = 0; d < 2; d++) b.push_back({r, d});
      break;
    case Variant::Rgcn:
      for (int r = 0; r < kNumRelations; r++) b.push_back({r, 0});
      break;
    case Variant::ConvGnn:
      for (int d = 0; d < 2; d++) b.push_back({-1, d});
      break;
  }
  return b;
}

void ensure(Matrix& m, uint32_t r, uint32_t c) {
  if (m.rows != r || m.cols != c) m = Matrix(r, c);
  else m.zero();
}

// C += A * B
void matmul_acc(const Matrix& A, const Matrix& B, Matrix& C) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(A.rows); i++) {
    const double* arow = A.row(static_cast<uint32_t>(i));
    double* crow = C.row(static_cast<uint32_t>(i));
    for (uint32_t k = 0; k < A.cols; k++) {
      double a = arow[k];
      if (a == 0.0) continue;
      const double* brow = B.row(k);
      for (uint32_t j = 0; j < B.cols; j++) crow[j] += a * brow[j];
    }
  }
}

// C += A^T * B  (A: n x k, B: n x m, C: k x m)
void matmul_ATB_acc(const Matrix& A, const Matrix& B, Matrix& C) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(A.cols); i++) {
    double* crow = C.row(static_cast<uint32_t>(i));
    for (uint32_t n = 0; n < A.rows; n++) {
      double a = A.at(n, static_cast<uint32_t>(i));
      if (a == 0.0) continue;
      const double* brow = B.row(n);
      for (uint32_t j = 0; j < B.cols; j++) crow[j] += a * brow[j];
    }
  }
}

// C += A * B^T  (A: n x m, B: k x m, C: n x k)
void matmul_ABT_acc(const Matrix& A, const Matrix& B, Matrix& C) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(A.rows); i++) {
    const double* arow = A.row(static_cast<uint32_t>(i));
    double* crow = C.row(static_cast<uint32_t>(i));
    for (uint32_t k = 0; k < B.rows; k++) {
      const double* brow = B.row(k);
      double s = 0.0;
      for (uint32_t j = 0; j < A.cols; j++) s += arow[j] * brow[j];
      crow[k] += s;
    }
  }
}

double bucket_norm(const GraphBatch& b, uint32_t node, int rel, int dir) {
  if (rel >= 0) return b.norms[node][rel * 2 + dir];
  double c = 0;
  for (int r = 0; r < kNumRelations; r++) c += b.norms[node][r * 2 + dir];
  return c;
}

// M[v] = (1/c) * sum of H rows over the bucket's neighbors of v
void aggregate(const GraphBatch& b, const Matrix& H, const Bucket& bk, Matrix& M) {
  const auto& off = bk.dir == 0 ? b.in_off : b.out_off;
  const auto& nbr = bk.dir == 0 ? b.in_src : b.out_dst;
#pragma omp parallel for schedule(static)
  for (int64_t v = 0; v < static_cast<int64_t>(b.n); v++) {
    double* mrow = M.row(static_cast<uint32_t>(v));
    size_t count = 0;
    int r0 = bk.rel >= 0 ? bk.rel : 0;
    int r1 = bk.rel >= 0 ? bk.rel + 1 : kNumRelations;
    for (int r = r0; r < r1; r++) {
      size_t g = static_cast<size_t>(v) * kNumRelations + r;
      for (uint32_t e = off[g]; e < off[g + 1]; e++) {
        const double* hrow = H.row(nbr[e]);
        for (uint32_t j = 0; j < H.cols; j++) mrow[j] += hrow[j];
        count++;
      }
    }
    if (count) {
      double c = bucket_norm(b, static_cast<uint32_t>(v), bk.rel, bk.dir);
      double inv = 1.0 / c;
      for (uint32_t j = 0; j < H.cols; j++) mrow[j] *= inv;
    }
  }
}

// dH[u] += sum over bucket edges u->v (dir 0) or v->u (dir 1) of dM[peer]/c(peer)
void scatter_grad(const GraphBatch& b, const Matrix& dM, const Bucket& bk, Matrix& dH) {
  // walk the OPPOSITE adjacency so each dH row is owned by one loop iteration
  const auto& off = bk.dir == 0 ? b.out_off : b.in_off;
  const auto& nbr = bk.dir == 0 ? b.out_dst : b.in_src;
#pragma omp parallel for schedule(static)
  for (int64_t u = 0; u < static_cast<int64_t>(b.n); u++) {
    double* drow = dH.row(static_cast<uint32_t>(u));
    int r0 = bk.rel >= 0 ? bk.rel : 0;
    int r1 = bk.rel >= 0 ? bk.rel + 1 : kNumRelations;
    for (int r = r0; r < r1; r++) {
      size_t g = static_cast<size_t>(u) * kNumRelations + r;
      for (uint32_t e = off[g]; e < off[g + 1]; e++) {
        uint32_t peer = nbr[e];
        double inv = 1.0 / bucket_norm(b, peer, bk.rel, bk.dir);
        const double* src = dM.row(peer);
        for (uint32_t j = 0; j < dM.cols; j++) drow[j] += inv * src[j];
      }
    }
  }
}

void softmax_rows(const Matrix& z, Matrix& p) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(z.rows); i++) {
    const double* zr = z.row(static_cast<uint32_t>(i));
    double* pr = p.row(static_cast<uint32_t>(i));
    double m = zr[0];
    for (uint32_t j = 1; j < z.cols; j++) m = std::max(m, zr[j]);
    double sum = 0;
    for (uint32_t j = 0; j < z.cols; j++) {
      pr[j] = std::exp(zr[j] - m);
      sum += pr[j];
    }
    for (uint32_t j = 0; j < z.cols; j++) pr[j] /= sum;
  }
}

}  // namespace

Model model_init(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  std::mt19937_64 rng(splitmix64(seed));
  uint32_t slots = slots_per_layer(cfg.variant);
  for (uint32_t l = 0; l < cfg.steps(); l++) {
    std::vector<Matrix> layer;
    for (uint32_t s = 0; s < slots; s++) {
      Matrix w(cfg.dims[l], cfg.dims[l + 1]);
      double bound = std::sqrt(6.0 / (cfg.dims[l] + cfg.dims[l + 1]));
      for (double& x : w.a) x = (rng_unit(rng) * 2.0 - 1.0) * bound;
      layer.push_back(std::move(w));
    }
    m.w.push_back(std::move(layer));
  }
  return m;
}

Grads zero_grads(const Model& m) {
  Grads g(m.w.size());
  for (size_t l = 0; l < m.w.size(); l++)
    for (const auto& w : m.w[l]) g[l].emplace_back(w.rows, w.cols);
  return g;
}

GraphBatch prepare_batch(const SubgraphSample& s, FeatureMode features) {
  GraphBatch b;
  b.n = static_cast<uint32_t>(s.nodes.size());
  b.parent_ids = s.nodes;
  b.is_sample = s.is_sample;
  b.labels = s.labels;
  b.loss_norm = s.loss_norm;
  b.norms = s.norms;

  uint32_t d = feature_dim(features);
  b.feats = Matrix(b.n, d);
  for (uint32_t i = 0; i < b.n; i++) {
    if (features == FeatureMode::KindOneHot)
      b.feats.at(i, static_cast<uint32_t>(s.kinds[i])) = 1.0;
    else
      b.feats.at(i, static_cast<uint32_t>(splitmix64(s.nodes[i]) % d)) = 1.0;
  }

  size_t groups = static_cast<size_t>(b.n) * kNumRelations;
  b.in_off.assign(groups + 1, 0);
  b.out_off.assign(groups + 1, 0);
  for (const auto& e : s.edges) {
    b.in_off[static_cast<size_t>(e.dst) * kNumRelations + static_cast<int>(e.rel) + 1]++;
    b.out_off[static_cast<size_t>(e.src) * kNumRelations + static_cast<int>(e.rel) + 1]++;
  }
  for (size_t g = 0; g < groups; g++) {
    b.in_off[g + 1] += b.in_off[g];
    b.out_off[g + 1] += b.out_off[g];
  }
  b.in_src.resize(s.edges.size());
  b.out_dst.resize(s.edges.size());
  std::vector<uint32_t> in_at(b.in_off.begin(), b.in_off.end() - 1);
  std::vector<uint32_t> out_at(b.out_off.begin(), b.out_off.end() - 1);
  for (const auto& e : s.edges) {
    size_t gi = static_cast<size_t>(e.dst) * kNumRelations + static_cast<int>(e.rel);
    size_t go = static_cast<size_t>(e.src) * kNumRelations + static_cast<int>(e.rel);
    b.in_src[in_at[gi]++] = e.src;
    b.out_dst[out_at[go]++] = e.dst;
  }
  return b;
}

const Matrix& model_forward(const Model& m, const GraphBatch& b, bool training,
                            uint64_t dropout_seed, Workspace& ws) {
  const ModelConfig& cfg = m.cfg;
  if (b.feats.cols != cfg.dims[0])
    throw std::runtime_error("model_forward: feature width does not match the model");
  uint32_t L = cfg.steps();
  auto buckets = buckets_for(cfg.variant);

  ws.h.resize(L + 1);
  ws.z.resize(L);
  ws.msg.resize(L);
  ws.mask.resize(L);
  ws.h[0] = b.feats;
  bool drop = training && cfg.dropout > 0.0;
  std::mt19937_64 drng(splitmix64(dropout_seed));
  double keep = 1.0 - cfg.dropout;

  for (uint32_t l = 0; l < L; l++) {
    uint32_t dout = cfg.dims[l + 1];
    ensure(ws.z[l], b.n, dout);
    matmul_acc(ws.h[l], m.w[l][0], ws.z[l]);
    ws.msg[l].resize(buckets.size());
    for (size_t bi = 0; bi < buckets.size(); bi++) {
      ensure(ws.msg[l][bi], b.n, cfg.dims[l]);
      aggregate(b, ws.h[l], buckets[bi], ws.msg[l][bi]);
      matmul_acc(ws.msg[l][bi], m.w[l][bi + 1], ws.z[l]);
    }
    if (l + 1 < L) {
      ensure(ws.h[l + 1], b.n, dout);
      if (drop) {
        ensure(ws.mask[l], b.n, dout);
        for (double& x : ws.mask[l].a) x = rng_unit(drng) >= cfg.dropout ? 1.0 : 0.0;
      }
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < static_cast<int64_t>(b.n); i++)
        for (uint32_t j = 0; j < dout; j++) {
          double v = ws.z[l].at(static_cast<uint32_t>(i), j);
          v = v > 0.0 ? v : 0.0;
          if (drop) v *= ws.mask[l].at(static_cast<uint32_t>(i), j) / keep;
          ws.h[l + 1].at(static_cast<uint32_t>(i), j) = v;
        }
    } else {
      ensure(ws.probs, b.n, dout);
      softmax_rows(ws.z[l], ws.probs);
    }
  }
  ws.mask.resize(drop ? L : 0);
  return ws.probs;
}

double model_loss(const GraphBatch& b, const std::array<double, 2>& class_weights,
                  const Matrix& probs) {
  double loss = 0.0;
  bool any = false;
  for (uint32_t i = 0; i < b.n; i++) {
    if (!b.is_sample[i] || b.labels[i] == Label::Unlabeled) continue;
    any = true;
    int y = b.labels[i] == Label::Vulnerable ? 1 : 0;
    loss += class_weights[y] * -std::log(std::max(probs.at(i, y), 1e-12));
  }
  if (!any) return 0.0;
  if (b.loss_norm == 0) throw std::runtime_error("model_loss: labeled batch with zero norm");
  return loss / b.loss_norm;
}

double model_backward(const Model& m, const GraphBatch& b,
                      const std::array<double, 2>& class_weights, Workspace& ws, Grads& g) {
  const ModelConfig& cfg = m.cfg;
  uint32_t L = cfg.steps();
  auto buckets = buckets_for(cfg.variant);
  bool drop = !ws.mask.empty();
  double keep = 1.0 - cfg.dropout;

  double loss = model_loss(b, class_weights, ws.probs);
  Matrix dz(b.n, cfg.dims[L]);
  for (uint32_t i = 0; i < b.n; i++) {
    if (!b.is_sample[i] || b.labels[i] == Label::Unlabeled) continue;
    int y = b.labels[i] == Label::Vulnerable ? 1 : 0;
    double scale = class_weights[y] / b.loss_norm;
    for (uint32_t j = 0; j < 2; j++)
      dz.at(i, j) = scale * (ws.probs.at(i, j) - (static_cast<int>(j) == y ? 1.0 : 0.0));
  }

  for (int l = static_cast<int>(L) - 1; l >= 0; l--) {
    matmul_ATB_acc(ws.h[l], dz, g[l][0]);
    Matrix dh(b.n, cfg.dims[l]);
    matmul_ABT_acc(dz, m.w[l][0], dh);
    for (size_t bi = 0; bi < buckets.size(); bi++) {
      matmul_ATB_acc(ws.msg[l][bi], dz, g[l][bi + 1]);
      Matrix dM(b.n, cfg.dims[l]);
      matmul_ABT_acc(dz, m.w[l][bi + 1], dM);
      scatter_grad(b, dM, buckets[bi], dh);
    }
    if (l > 0) {
      dz = Matrix(b.n, cfg.dims[l]);
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < static_cast<int64_t>(b.n); i++)
        for (uint32_t j = 0; j < static_cast<uint32_t>(cfg.dims[l]); j++) {
          double grad = dh.at(static_cast<uint32_t>(i), j);
          if (ws.z[l - 1].at(static_cast<uint32_t>(i), j) <= 0.0) grad = 0.0;
          else if (drop) grad *= ws.mask[l - 1].at(static_cast<uint32_t>(i), j) / keep;
          dz.at(static_cast<uint32_t>(i), j) = grad;
        }
    }
  }
  return loss;
}

std::string serialize_model(const Model& m) {
  nlohmann::ordered_json j;
  j["config"]["variant"] = variant_code(m.cfg.variant);
  j["config"]["dims"] = m.cfg.dims;
  j["config"]["dropout"] = m.cfg.dropout;
  j["config"]["features"] = feature_code(m.cfg.features);
  j["weights"] = nlohmann::ordered_json::array();
  for (const auto& layer : m.w) {
    nlohmann::ordered_json lj = nlohmann::ordered_json::array();
    for (const auto& w : layer)
      lj.push_back({{"rows", w.rows}, {"cols", w.cols}, {"a", w.a}});
    j["weights"].push_back(std::move(lj));
  }
  return j.dump();
}

Model load_model(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_model: malformed JSON: ") + e.what());
  }
  Model m;
  try {
    const auto& c = j.at("config");
    m.cfg.variant = variant_from_code(c.at("variant").get<std::string>());
    m.cfg.dims = c.at("dims").get<std::vector<uint32_t>>();
    m.cfg.dropout = c.at("dropout").get<double>();
    m.cfg.features = feature_from_code(c.at("features").get<std::string>());
    m.cfg.validate();
    for (const auto& lj : j.at("weights")) {
      std::vector<Matrix> layer;
      for (const auto& wj : lj) {
        Matrix w(wj.at("rows").get<uint32_t>(), wj.at("cols").get<uint32_t>());
        w.a = wj.at("a").get<std::vector<double>>();
        if (w.a.size() != static_cast<size_t>(w.rows) * w.cols)
          throw std::runtime_error("weight array size mismatch");
        layer.push_back(std::move(w));
      }
      m.w.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_model: schema violation: ") + e.what());
  }
  if (m.w.size() != m.cfg.steps())
    throw std::runtime_error("load_model: layer count does not match dims");
  for (size_t l = 0; l < m.w.size(); l++) {
    if (m.w[l].size() != slots_per_layer(m.cfg.variant))
      throw std::runtime_error("load_model: weight bucket count mismatch");
    for (const auto& w : m.w[l])
      if (w.rows != m.cfg.dims[l] || w.cols != m.cfg.dims[l + 1])
        throw std::runtime_error("load_model: weight shape mismatch");
  }
  return m;
}

}  // namespace bofspot
