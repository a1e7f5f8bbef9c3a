#include "ddgcn/metrics.hpp"

#include <stdexcept>

#include "json.hpp"

namespace ddgcn {

void Confusion::add(int predicted, int label) {
  if (label == 1) {
    predicted == 1 ? ++tp : ++fn;
  } else {
    predicted == 1 ? ++fp : ++tn;
  }
}

void Confusion::merge(const Confusion& other) {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
}

double class_f1(long long tp, long long fp, long long fn) {
  const long long denom = 2 * tp + fp + fn;  // == support of P+R
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double macro_f1(const Confusion& c) {
  const double f1_pos = class_f1(c.tp, c.fp, c.fn);
  const double f1_neg = class_f1(c.tn, c.fn, c.fp);  // class 0 as positive
  return 0.5 * (f1_pos + f1_neg);
}

MetricsReport compute_metrics(const std::vector<std::vector<int>>& predictions,
                              const std::vector<std::vector<int>>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("compute_metrics: prediction/label row count mismatch");
  }
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty dataset");
  const std::size_t T = labels[0].size();
  MetricsReport r;
  r.confusion.resize(T);
  for (std::size_t u = 0; u < predictions.size(); ++u) {
    if (predictions[u].size() != T || labels[u].size() != T) {
      throw std::invalid_argument("compute_metrics: trait count mismatch at row " +
                                  std::to_string(u));
    }
    for (std::size_t t = 0; t < T; ++t) r.confusion[t].add(predictions[u][t], labels[u][t]);
  }
  r.per_trait.resize(T);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    r.per_trait[t] = macro_f1(r.confusion[t]);
    total += r.per_trait[t];
  }
  r.average = total / static_cast<double>(T);
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["per_trait"] = r.per_trait;
  j["average"] = r.average;
  j["seed"] = r.seed;
  j["epoch"] = r.epoch;
  return j.dump();
}

}  // namespace ddgcn
