#include <stdexcept>

#include "bofspot/metrics.hpp"
#include "doctest.h"

using namespace bofspot;

TEST_CASE("metric formulas on known confusion counts") {
  // perfect precision, recall 53/57: F1 must be 106/110
  Metrics m = metrics_from_counts(53, 0, 100, 4);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == doctest::Approx(0.9298).epsilon(1e-4));
  CHECK(m.f1 == doctest::Approx(0.9636).epsilon(1e-4));
  CHECK(m.f1 == doctest::Approx(106.0 / 110.0).epsilon(1e-12));
  CHECK(m.accuracy == doctest::Approx(153.0 / 157.0).epsilon(1e-12));

  Metrics even = metrics_from_counts(5, 5, 5, 5);
  CHECK(even.accuracy == 0.5);
  CHECK(even.precision == 0.5);
  CHECK(even.recall == 0.5);
  CHECK(even.f1 == 0.5);
}

TEST_CASE("degenerate counts give zeros instead of NaN") {
  Metrics none = metrics_from_counts(0, 0, 0, 0);
  CHECK(none.accuracy == 0.0);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  Metrics nocalls = metrics_from_counts(0, 0, 10, 3);
  CHECK(nocalls.precision == 0.0);
  CHECK(nocalls.recall == 0.0);
  CHECK(nocalls.f1 == 0.0);
  CHECK(nocalls.accuracy == doctest::Approx(10.0 / 13.0));
}

TEST_CASE("metrics serialize to stable JSON and back") {
  Metrics m = metrics_from_counts(7, 2, 90, 1);
  std::string json = serialize_metrics(m);
  CHECK(json.find("\"accuracy\":") == 1);  // key order pinned by serializer
  CHECK(json.find("\"tp\":7") != std::string::npos);
  Metrics back = load_metrics(json);
  CHECK(back.tp == m.tp);
  CHECK(back.fp == m.fp);
  CHECK(back.tn == m.tn);
  CHECK(back.fn == m.fn);
  CHECK(back.f1 == m.f1);
  CHECK(serialize_metrics(back) == json);
  CHECK_THROWS_AS(load_metrics("["), std::runtime_error);
  CHECK_THROWS_AS(load_metrics("{\"accuracy\":1}"), std::runtime_error);
}
