#include "ddgcn/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace ddgcn {

double gradcheck_rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

GradCheckResult check_gradients(const std::function<Tensor()>& build,
                                const std::vector<std::pair<std::string, Tensor>>& params,
                                double step) {
  if (step <= 0.0) throw std::invalid_argument("check_gradients: step must be positive");

  for (auto& [name, p] : params) {
    if (!p.defined() || !p.requires_grad()) {
      throw std::invalid_argument("check_gradients: '" + name + "' is not a trainable leaf");
    }
    Tensor(p).zero_grad();
  }

  Tensor loss = build();
  if (loss.numel() != 1) {
    throw std::invalid_argument("check_gradients: build() must return a scalar loss");
  }
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      // Parameter unreachable from the loss: analytic gradient is zero.
      analytic.emplace_back(p.numel(), 0.0);
    }
  }

  // Probe by re-evaluating the one graph backward ran on, not by rebuilding.
  // Rebuilding would re-detach at the perturbed values, while re-evaluation
  // keeps detached branches frozen, so the difference quotient measures the
  // same function the backward pass differentiates.
  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi].second;
    auto vals = p.values_mut();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + step;
      detail::reevaluate(loss);
      const double up = loss.item();
      vals[i] = saved - step;
      detail::reevaluate(loss);
      const double down = loss.item();
      vals[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double err = gradcheck_rel_err(a, numeric);
      ++res.entries_checked;
      if (err >= res.max_rel_err) {
        res.max_rel_err = err;
        res.worst = {params[pi].first, i, a, numeric, err};
      }
    }
  }
  // Leave interior values consistent with the restored leaves.
  detail::reevaluate(loss);
  return res;
}

}  // namespace ddgcn
