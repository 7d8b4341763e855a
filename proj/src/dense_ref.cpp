// Dense single-threaded re-implementation of the network forward pass. It
// materializes full normalized adjacency matrices and multiplies them out
// naively — far too slow for real graphs, but independent of the sparse
// kernel code paths, so it serves as the correctness oracle and the benchmark
// baseline.
#include <cmath>
#include <stdexcept>

#include "bofspot/model.hpp"
#include "bofspot/rng.hpp"

namespace bofspot {

namespace {

Matrix dense_mul(const Matrix& A, const Matrix& B) {
  Matrix C(A.rows, B.cols);
  for (uint32_t i = 0; i < A.rows; i++)
    for (uint32_t j = 0; j < B.cols; j++) {
      double s = 0;
      for (uint32_t k = 0; k < A.cols; k++) s += A.at(i, k) * B.at(k, j);
      C.at(i, j) = s;
    }
  return C;
}

void add_into(Matrix& A, const Matrix& B) {
  for (size_t i = 0; i < A.a.size(); i++) A.a[i] += B.a[i];
}

}  // namespace

Matrix dense_reference_forward(const Model& m, const SubgraphSample& s) {
  const ModelConfig& cfg = m.cfg;
  cfg.validate();
  uint32_t n = static_cast<uint32_t>(s.nodes.size());

  Matrix H(n, feature_dim(cfg.features));
  for (uint32_t i = 0; i < n; i++) {
    if (cfg.features == FeatureMode::KindOneHot)
      H.at(i, static_cast<uint32_t>(s.kinds[i])) = 1.0;
    else
      H.at(i, static_cast<uint32_t>(splitmix64(s.nodes[i]) % H.cols)) = 1.0;
  }

  // normalized adjacency per (relation, direction): row v sums neighbor states
  auto adjacency = [&](int rel, int dir) {
    Matrix A(n, n);
    for (const auto& e : s.edges) {
      if (rel >= 0 && static_cast<int>(e.rel) != rel) continue;
      if (dir == 0) A.at(e.dst, e.src) += 1.0;  // incoming messages at dst
      else A.at(e.src, e.dst) += 1.0;           // outgoing messages at src
    }
    for (uint32_t v = 0; v < n; v++) {
      double c = 0;
      if (rel >= 0) c = s.norms[v][rel * 2 + dir];
      else
        for (int r = 0; r < kNumRelations; r++) c += s.norms[v][r * 2 + dir];
      if (c > 0)
        for (uint32_t u = 0; u < n; u++) A.at(v, u) /= c;
    }
    return A;
  };

  for (uint32_t l = 0; l < cfg.steps(); l++) {
    Matrix Z = dense_mul(H, m.w[l][0]);
    switch (cfg.variant) {
      case Variant::Brgcn:
        for (int r = 0; r < kNumRelations; r++)
          for (int d = 0; d < 2; d++)
            add_into(Z, dense_mul(dense_mul(adjacency(r, d), H),
                                  m.w[l][msg_slot(cfg.variant, r, d)]));
        break;
      case Variant::Rgcn:
        for (int r = 0; r < kNumRelations; r++)
          add_into(Z, dense_mul(dense_mul(adjacency(r, 0), H),
                                m.w[l][msg_slot(cfg.variant, r, 0)]));
        break;
      case Variant::ConvGnn:
        for (int d = 0; d < 2; d++)
          add_into(Z, dense_mul(dense_mul(adjacency(-1, d), H),
                                m.w[l][msg_slot(cfg.variant, 0, d)]));
        break;
    }
    if (l + 1 < cfg.steps()) {
      for (double& x : Z.a) x = x > 0 ? x : 0;
      H = std::move(Z);
    } else {
      Matrix P(n, Z.cols);
      for (uint32_t i = 0; i < n; i++) {
        double mx = Z.at(i, 0);
        for (uint32_t j = 1; j < Z.cols; j++) mx = std::max(mx, Z.at(i, j));
        double sum = 0;
        for (uint32_t j = 0; j < Z.cols; j++) {
          P.at(i, j) = std::exp(Z.at(i, j) - mx);
          sum += P.at(i, j);
        }
        for (uint32_t j = 0; j < Z.cols; j++) P.at(i, j) /= sum;
      }
      return P;
    }
  }
  throw std::runtime_error("dense_reference_forward: unreachable");
}

}  // namespace bofspot
