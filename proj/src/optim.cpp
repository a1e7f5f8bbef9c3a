#include "ddgcn/optim.hpp"

#include <cmath>

#include "ddgcn/errors.hpp"

namespace ddgcn {

double group_lr(const std::string& key, const AdamSettings& s) {
  if (key == "embed") return s.lr_encoder;
  if (key.find(".l2c.") != std::string::npos) return s.lr_l2c;
  return s.lr_other;
}

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, AdamSettings settings)
    : cfg_(settings) {
  if (params.empty()) throw ConfigError("optimizer: empty parameter list");
  slots_.reserve(params.size());
  for (auto& [key, p] : params) {
    if (!p.defined() || !p.requires_grad()) {
      throw ConfigError("optimizer: '" + key + "' is not a trainable parameter");
    }
    Slot slot;
    slot.key = key;
    slot.param = p;
    slot.lr = group_lr(key, cfg_);
    slot.m.assign(p.numel(), 0.0);
    slot.v.assign(p.numel(), 0.0);
    slots_.push_back(std::move(slot));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Slot& slot : slots_) {
    const bool has = slot.param.has_grad();
    auto vals = slot.param.values_mut();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = has ? slot.param.grad()[i] : 0.0;
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * g;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = slot.m[i] / bc1;
      const double vhat = slot.v[i] / bc2;
      vals[i] -= slot.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    slot.param.zero_grad();
  }
}

}  // namespace ddgcn
