#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ddgcn/tensor.hpp"

namespace ddgcn {

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  GradCheckEntry worst;
  std::size_t entries_checked = 0;
};

// Relative error with a floor that keeps near-zero pairs comparable:
// |a - b| / max(|a|, |b|, 1e-8).
double gradcheck_rel_err(double a, double b);

// Central-difference check of d loss / d param for every listed parameter
// entry. build runs exactly once; the numeric pass perturbs each parameter
// entry in place and re-evaluates that one graph, so detached branches stay
// frozen at their recorded values and the difference quotient matches the
// function backward differentiates. Parameter values are restored bit-exactly
// afterwards.
GradCheckResult check_gradients(const std::function<Tensor()>& build,
                                const std::vector<std::pair<std::string, Tensor>>& params,
                                double step = 1e-5);

}  // namespace ddgcn
