#include "ddgcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ddgcn/checkpoint.hpp"
#include "ddgcn/errors.hpp"
#include "ddgcn/gradcheck.hpp"
#include "ddgcn/optim.hpp"

namespace ddgcn {

std::string sparsity_csv(const std::vector<SparsityRow>& rows) {
  std::ostringstream os;
  os << "epoch,trait,layer,graph_ratio,unode_ratio\n";
  os.precision(17);
  for (const SparsityRow& r : rows) {
    os << r.epoch << "," << r.trait << "," << r.layer << "," << r.graph_ratio << ","
       << r.unode_ratio << "\n";
  }
  return os.str();
}

SparsityAccum::SparsityAccum(std::size_t traits, std::size_t depth)
    : traits_(traits), depth_(depth), cells_(traits * depth) {}

void SparsityAccum::add(const ForwardTrace& trace) {
  if (trace.traits.size() != traits_) {
    throw std::invalid_argument("sparsity: trace trait count mismatch");
  }
  for (std::size_t t = 0; t < traits_; ++t) {
    const TraitTrace& tt = trace.traits[t];
    if (tt.graphs.size() != depth_) throw std::invalid_argument("sparsity: trace depth mismatch");
    for (std::size_t k = 0; k < depth_; ++k) {
      const LayerGraph& g = *tt.graphs[k];
      const std::size_t m = g.nodes();       // N + 1
      const std::size_t u = m - 1;
      Cell& cell = cells_[t * depth_ + k];
      cell.kept += g.edge_count;
      cell.possible += static_cast<long long>(m) * static_cast<long long>(m);
      for (std::size_t i = 0; i < u; ++i) {
        cell.u_kept += g.kept[i * m + u] + g.kept[u * m + i];
      }
      cell.u_possible += 2 * static_cast<long long>(u);
    }
  }
}

std::vector<SparsityRow> SparsityAccum::rows(long long epoch) const {
  std::vector<SparsityRow> out;
  out.reserve(cells_.size());
  for (std::size_t t = 0; t < traits_; ++t) {
    for (std::size_t k = 0; k < depth_; ++k) {
      const Cell& cell = cells_[t * depth_ + k];
      SparsityRow row;
      row.epoch = epoch;
      row.trait = t;
      row.layer = k + 1;
      row.graph_ratio =
          cell.possible == 0 ? 0.0 : static_cast<double>(cell.kept) / static_cast<double>(cell.possible);
      row.unode_ratio = cell.u_possible == 0
                            ? 0.0
                            : static_cast<double>(cell.u_kept) / static_cast<double>(cell.u_possible);
      out.push_back(row);
    }
  }
  return out;
}

namespace {

// Pinned shuffle (not std::shuffle, whose draw pattern varies by standard
// library) so run-twice determinism holds to the byte on any toolchain.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Locates the first non-finite value in the traces so the abort names the
// trait and layer that produced it.
[[noreturn]] void throw_nonfinite(const std::vector<ForwardTrace>& traces, double total) {
  for (std::size_t b = 0; b < traces.size(); ++b) {
    const ForwardTrace& trace = traces[b];
    for (std::size_t t = 0; t < trace.traits.size(); ++t) {
      const TraitTrace& tt = trace.traits[t];
      for (std::size_t k = 0; k < tt.graphs.size(); ++k) {
        if (!all_finite(tt.graphs[k]->raw.values()) || !all_finite(tt.graphs[k]->masked.values())) {
          throw NumericError("non-finite edge weights in trait " + std::to_string(t) + " layer " +
                             std::to_string(k + 1) + " (batch sample " + std::to_string(b) + ")");
        }
      }
      if (!all_finite(tt.logits.values())) {
        throw NumericError("non-finite logits in trait " + std::to_string(t) + " (batch sample " +
                           std::to_string(b) + ")");
      }
    }
  }
  throw NumericError("loss is non-finite (" + std::to_string(total) +
                     ") though every per-trait value is finite");
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

TrainArtifacts train_model(const RunConfig& cfg, const std::vector<UserSample>& train_set,
                           const std::vector<UserSample>& val_set, std::size_t vocab_size,
                           const std::string& out_dir) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: no training samples");
  if (val_set.empty()) throw DataError("train: no validation samples");
  if (cfg.encoder == PayloadKind::tokens && vocab_size == 0) {
    throw ConfigError("train: the bag encoder needs a vocabulary");
  }
  std::filesystem::create_directories(out_dir);

  std::mt19937_64 rng(cfg.seed);
  ModelParams params =
      init_model(cfg.model, cfg.encoder == PayloadKind::tokens ? vocab_size : 0, rng);
  AdamSettings adam_settings;
  adam_settings.lr_encoder = cfg.lr_encoder;
  adam_settings.lr_l2c = cfg.lr_l2c;
  adam_settings.lr_other = cfg.lr_other;
  Adam opt(named_parameters(params), adam_settings);

  double lambda = cfg.lambda_init;

  TrainArtifacts artifacts;
  artifacts.checkpoint_path = (std::filesystem::path(out_dir) / "checkpoint.bin").string();
  double best_avg = -1.0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    SparsityAccum accum(cfg.model.traits, cfg.model.depth);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      std::vector<ForwardTrace> traces;
      std::vector<std::vector<int>> labels;
      traces.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const UserSample& sample = train_set[order[i]];
        traces.push_back(forward(sample, params, cfg.model, cfg.encoder, true, rng));
        labels.push_back(sample.labels);
      }
      LossBundle lb =
          batch_loss(traces, labels, cfg.model.l0_enabled ? lambda : 0.0, cfg.model);
      if (!std::isfinite(lb.total.item())) throw_nonfinite(traces, lb.total.item());
      backward(lb.total);
      opt.step();
      if (cfg.model.l0_enabled) {
        const double direction = cfg.lambda_ascent ? 1.0 : -1.0;
        lambda = clip(lambda + direction * cfg.lambda_lr * lb.ce.item(), cfg.lambda_min,
                      cfg.lambda_max);
      }
      for (const ForwardTrace& trace : traces) accum.add(trace);
    }
    for (const SparsityRow& row : accum.rows(static_cast<long long>(epoch))) {
      artifacts.sparsity.push_back(row);
    }

    MetricsReport val = evaluate_model(params, cfg.model, cfg.encoder, val_set);
    val.seed = cfg.seed;
    val.epoch = static_cast<long long>(epoch);
    if (val.average > best_avg) {
      best_avg = val.average;
      artifacts.best_val = val;
      save_checkpoint(artifacts.checkpoint_path, named_parameters(params));
    }
  }
  artifacts.lambda_final = lambda;

  std::ofstream(std::filesystem::path(out_dir) / "sparsity.csv") << sparsity_csv(artifacts.sparsity);
  std::ofstream(std::filesystem::path(out_dir) / "metrics.json")
      << metrics_json(artifacts.best_val) << "\n";
  return artifacts;
}

ModelParams load_model(const std::string& checkpoint_path, const ModelConfig& cfg,
                       std::size_t vocab_size) {
  std::mt19937_64 rng(0);
  ModelParams params = init_model(cfg, vocab_size, rng);
  load_checkpoint(checkpoint_path, named_parameters(params));
  return params;
}

MetricsReport evaluate_model(const ModelParams& params, const ModelConfig& cfg,
                             PayloadKind encoder, const std::vector<UserSample>& samples) {
  if (samples.empty()) throw DataError("evaluate: empty dataset");
  std::vector<std::vector<int>> preds(samples.size());
  std::vector<std::vector<int>> labels(samples.size());
  // Read-only parameter access; each user's pass is independent.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    std::mt19937_64 unused(0);  // eval mode draws nothing
    ForwardTrace trace = forward(samples[static_cast<std::size_t>(i)], params, cfg, encoder,
                                 false, unused);
    preds[static_cast<std::size_t>(i)] = predict(trace);
    labels[static_cast<std::size_t>(i)] = samples[static_cast<std::size_t>(i)].labels;
  }
  return compute_metrics(preds, labels);
}

std::vector<SparsityRow> sparsity_snapshot(const ModelParams& params, const ModelConfig& cfg,
                                           PayloadKind encoder,
                                           const std::vector<UserSample>& samples) {
  if (samples.empty()) throw DataError("sparsity: empty dataset");
  SparsityAccum accum(cfg.traits, cfg.depth);
  std::mt19937_64 unused(0);
  for (const UserSample& sample : samples) {
    accum.add(forward(sample, params, cfg, encoder, false, unused));
  }
  return accum.rows(0);
}

FullCheckReport run_full_gradcheck(ModelConfig cfg, std::size_t posts, std::uint64_t seed) {
  cfg.dropout_encoder = 0.0;
  cfg.dropout_other = 0.0;
  cfg.validate();
  if (posts == 0) throw ConfigError("gradcheck: posts must be positive");
  if (cfg.d * cfg.hid * cfg.depth * posts * cfg.traits > 10000) {
    throw ConfigError("gradcheck: dimension product exceeds 10^4; use a smaller fixture");
  }

  FullCheckReport report;
  for (int attempt = 0; attempt < 5; ++attempt) {
    report.attempts = attempt + 1;
    const std::uint64_t s = seed + 1000 * static_cast<std::uint64_t>(attempt);
    std::mt19937_64 rng(s);
    ModelParams params = init_model(cfg, 0, rng);

    UserSample sample;
    sample.id = "gradcheck";
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (std::size_t p = 0; p < posts; ++p) {
      std::vector<double> row(cfg.d);
      for (double& x : row) x = dist(rng);
      sample.vector_posts.push_back(std::move(row));
    }
    for (std::size_t t = 0; t < cfg.traits; ++t) sample.labels.push_back(t % 2 == 0 ? 1 : 0);

    ForwardTrace probe = forward(sample, params, cfg, PayloadKind::vectors, false, rng);
    double min_margin = 1.0;
    for (const TraitTrace& tt : probe.traits) {
      for (const LayerGraphPtr& g : tt.graphs) {
        for (double r : g->raw.values()) min_margin = std::min(min_margin, std::abs(r - cfg.mu));
      }
    }
    if (min_margin <= 1e-3) continue;

    auto build = [&] {
      ForwardTrace trace = forward(sample, params, cfg, PayloadKind::vectors, false, rng);
      std::vector<ForwardTrace> traces;
      traces.push_back(std::move(trace));
      return batch_loss(traces, {sample.labels}, 5.0, cfg).total;
    };
    GradCheckResult res = check_gradients(build, named_parameters(params));
    report.max_rel_err = res.max_rel_err;
    report.entries = res.entries_checked;
    report.passed = res.max_rel_err < 1e-4;
    std::ostringstream os;
    os.precision(6);
    os << "worst entry " << res.worst.name << "[" << res.worst.index << "]: analytic "
       << res.worst.analytic << ", numeric " << res.worst.numeric << ", rel err "
       << res.worst.rel_err;
    report.detail = os.str();
    return report;
  }
  report.passed = false;
  report.detail =
      "every candidate seed left some edge score within 1e-3 of the threshold; "
      "the finite-difference margin precondition cannot be met with these dims";
  return report;
}

std::vector<std::size_t> depth_grid() {
  std::vector<std::size_t> grid{1, 2, 3, 4, 5, 6};
  for (std::size_t depth = 9; depth <= 24; depth += 3) grid.push_back(depth);
  return grid;
}

}  // namespace ddgcn
