#pragma once
// Binary classification metrics with the vulnerable class as positive.
#include <cstdint>
#include <string>

namespace bofspot {

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Degenerate denominators yield 0 rather than NaN.
Metrics metrics_from_counts(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn);

std::string serialize_metrics(const Metrics& m);  // stable-key JSON object
Metrics load_metrics(const std::string& json);

}  // namespace bofspot
