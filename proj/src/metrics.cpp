#include "bofspot/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bofspot {

Metrics metrics_from_counts(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  uint64_t total = tp + fp + tn + fn;
  if (total) m.accuracy = static_cast<double>(tp + tn) / total;
  if (tp + fp) m.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn) m.recall = static_cast<double>(tp) / (tp + fn);
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

std::string serialize_metrics(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["tn"] = m.tn;
  j["fn"] = m.fn;
  return j.dump();
}

Metrics load_metrics(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_metrics: malformed JSON: ") + e.what());
  }
  Metrics m;
  try {
    m.accuracy = j.at("accuracy").get<double>();
    m.precision = j.at("precision").get<double>();
    m.recall = j.at("recall").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.tp = j.at("tp").get<uint64_t>();
    m.fp = j.at("fp").get<uint64_t>();
    m.tn = j.at("tn").get<uint64_t>();
    m.fn = j.at("fn").get<uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_metrics: schema violation: ") + e.what());
  }
  return m;
}

}  // namespace bofspot
