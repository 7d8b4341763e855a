// Benchmark: sparse OpenMP forward/backward kernels vs the dense serial
// reference on random graphs of growing size. The dense path is the same
// oracle the tests use; this target shows what the sparse kernels buy and
// double-checks agreement (max |sparse - dense| <= 1e-10) while timing.
//
//   gnn_bench [--threads N] [--hidden D] [--repeats R] [--max-dense N]
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "bofspot/cut.hpp"
#include "bofspot/model.hpp"
#include "bofspot/rng.hpp"

using namespace bofspot;

namespace {

// Random graph with data-flow-like sparsity (about six edges per node).
SubgraphSample random_graph(uint64_t seed, uint32_t n) {
  std::mt19937_64 rng(splitmix64(seed));
  SubgraphSample s;
  s.origin = "bench";
  for (uint32_t i = 0; i < n; ++i) {
    s.nodes.push_back(i);
    s.kinds.push_back(static_cast<NodeKind>(rng() % 4));
    s.labels.push_back(rng() % 4 == 0 ? Label::Vulnerable : Label::Benign);
    s.is_sample.push_back(1);
  }
  s.loss_norm = n;
  std::set<std::tuple<uint32_t, uint32_t, Relation>> seen;
  for (uint64_t k = 0; k < 6ull * n; ++k) {
    uint32_t a = static_cast<uint32_t>(rng() % n), b = static_cast<uint32_t>(rng() % n);
    if (a == b) continue;
    Relation r = static_cast<Relation>(rng() % kNumRelations);
    if (!seen.insert({a, b, r}).second) continue;
    s.edges.push_back({a, b, r});
  }
  s.norms.assign(n, {});
  for (const Edge& e : s.edges) {
    s.norms[e.dst][static_cast<int>(e.rel) * 2 + 0]++;
    s.norms[e.src][static_cast<int>(e.rel) * 2 + 1]++;
  }
  return s;
}

template <class F>
double time_best_of(int repeats, F&& fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-vs-dense forward benchmark"};
  int threads = 0;  // 0 = OpenMP default
  uint32_t hidden = 16;
  int repeats = 3;
  uint32_t max_dense = 2048;
  app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");
  app.add_option("--hidden", hidden, "hidden width of the two inner layers");
  app.add_option("--repeats", repeats, "timing repeats, best-of is reported");
  app.add_option("--max-dense", max_dense, "largest node count for the dense reference");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);

  ModelConfig mc;
  mc.dims = {4, hidden, hidden, 2};
  mc.dropout = 0.0;
  Model m = model_init(mc, 42);
  const std::array<double, 2> w = {1.0, 3.0};

  std::printf("threads=%d  model=brgcn dims=4-%u-%u-2  best of %d runs\n",
              omp_get_max_threads(), hidden, hidden, repeats);
  std::printf("%8s %9s | %12s %14s | %12s %10s %9s\n", "nodes", "edges", "sparse fwd",
              "sparse fwd+bwd", "dense fwd", "speedup", "max|diff|");

  for (uint32_t n : {256u, 1024u, 4096u, 16384u, 65536u}) {
    SubgraphSample s = random_graph(0xBE7C4 + n, n);
    GraphBatch b = prepare_batch(s, mc.features);
    Workspace ws;
    Grads g = zero_grads(m);

    double fwd = time_best_of(repeats, [&] { model_forward(m, b, false, 0, ws); });
    double both = time_best_of(repeats, [&] {
      model_forward(m, b, false, 0, ws);
      model_backward(m, b, w, ws, g);
    });

    if (n <= max_dense) {
      Matrix dense;
      double dt = time_best_of(repeats, [&] { dense = dense_reference_forward(m, s); });
      const Matrix& sparse = model_forward(m, b, false, 0, ws);
      double worst = 0;
      for (uint32_t i = 0; i < dense.rows; ++i)
        for (uint32_t c = 0; c < dense.cols; ++c)
          worst = std::max(worst, std::abs(dense.at(i, c) - sparse.at(i, c)));
      std::printf("%8u %9zu | %9.3f ms %11.3f ms | %9.3f ms %9.1fx %9.2g%s\n", n, s.edges.size(),
                  fwd * 1e3, both * 1e3, dt * 1e3, dt / fwd, worst,
                  worst <= 1e-10 ? "" : "  << MISMATCH");
      if (worst > 1e-10) return 1;
    } else {
      std::printf("%8u %9zu | %9.3f ms %11.3f ms | %12s %10s %9s\n", n, s.edges.size(), fwd * 1e3,
                  both * 1e3, "-", "-", "-");
    }
  }
  return 0;
}
