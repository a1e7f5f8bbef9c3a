#pragma once

#include <cstdint>
#include <string>

#include "ddgcn/corpus.hpp"
#include "ddgcn/model.hpp"

namespace ddgcn {

// One training/evaluation run's knobs: the model configuration plus optimizer
// and schedule settings. Parsed from flat `key = value` files; '#' starts a
// comment and unknown keys are a hard error, so typos cannot silently fall
// back to defaults.
struct RunConfig {
  ModelConfig model;
  PayloadKind encoder = PayloadKind::tokens;  // "bag" (trainable) or "vectors"

  double lr_encoder = 1e-5;
  double lr_l2c = 1e-5;
  double lr_other = 1e-3;

  double lambda_init = 5.0;
  double lambda_lr = 1e-2;
  double lambda_min = 0.0;
  double lambda_max = 100.0;
  bool lambda_ascent = true;  // flip to descend instead

  std::size_t epochs = 25;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  bool seed_from_file = false;  // lets the CLI fall back to its 3-seed default

  std::size_t max_posts = 50;
  std::size_t max_tokens = 70;

  void validate() const;
  LoadOptions load_options() const { return {max_posts, max_tokens, {}}; }
};

RunConfig parse_run_config(const std::string& path);

// origin names the source in error messages ("path" for files).
RunConfig parse_run_config_text(const std::string& text, const std::string& origin);

}  // namespace ddgcn
