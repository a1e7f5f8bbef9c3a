#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddgcn/tensor.hpp"

namespace ddgcn {

struct AdamSettings {
  double lr_encoder = 1e-5;
  double lr_l2c = 1e-5;  // graph-builder projections
  double lr_other = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Learning-rate group from the canonical parameter key: the embedding table
// trains at lr_encoder, keys containing ".l2c." at lr_l2c, and everything
// else (attention projection, classifiers, coupled-variant weights) at
// lr_other. Every key lands in exactly one group.
double group_lr(const std::string& key, const AdamSettings& s);

// Adam with per-parameter moment buffers and a shared step counter for bias
// correction. step() consumes accumulated gradients (a parameter without one
// counts as zero gradient) and clears them.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, AdamSettings settings);

  void step();
  long long steps() const { return t_; }

 private:
  struct Slot {
    std::string key;
    Tensor param;
    double lr;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  AdamSettings cfg_;
  long long t_ = 0;
};

}  // namespace ddgcn
