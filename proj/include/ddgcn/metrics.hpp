#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ddgcn {

// Binary confusion counts for one trait. Kept as integers; every ratio is
// computed from them at the last moment so merged counts stay exact.
struct Confusion {
  long long tp = 0, fp = 0, tn = 0, fn = 0;

  void add(int predicted, int label);
  void merge(const Confusion& other);
};

// F1 of the positive class: 2PR/(P+R), defined as 0 when P+R has no support.
double class_f1(long long tp, long long fp, long long fn);

// Unweighted mean of the two per-class F1 scores of one binary trait.
double macro_f1(const Confusion& c);

struct MetricsReport {
  std::vector<double> per_trait;  // macro-F1 per trait
  double average = 0.0;           // mean over traits
  std::vector<Confusion> confusion;
  std::uint64_t seed = 0;
  long long epoch = 0;
};

// predictions and labels are row-major user x trait matrices.
MetricsReport compute_metrics(const std::vector<std::vector<int>>& predictions,
                              const std::vector<std::vector<int>>& labels);

// The exact serialized form emitted by the evaluation commands:
// {"per_trait": [...], "average": x, "seed": n, "epoch": n}
std::string metrics_json(const MetricsReport& r);

}  // namespace ddgcn
