#include "ddgcn/model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "ddgcn/dgcn.hpp"
#include "ddgcn/errors.hpp"

namespace ddgcn {

void ModelConfig::validate() const {
  if (d == 0 || hid == 0) throw ConfigError("model: d and hid must be positive");
  if (depth < 1 || depth > 24) {
    throw ConfigError("model: depth must be in 1..24, got " + std::to_string(depth));
  }
  if (traits < 1) throw ConfigError("model: traits must be at least 1");
  if (!(mu > 0.0 && mu < 1.0)) throw ConfigError("model: mu must lie in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("model: eps must be positive");
  if (dropout_encoder < 0.0 || dropout_encoder >= 1.0 || dropout_other < 0.0 ||
      dropout_other >= 1.0) {
    throw ConfigError("model: dropout rates must lie in [0, 1)");
  }
  if (fixed_graph_threshold < -1.0 || fixed_graph_threshold > 1.0) {
    throw ConfigError("model: fixed_graph_threshold must lie in [-1, 1]");
  }
  if (single_hop && fixed_graph) {
    throw ConfigError("model: single_hop and fixed_graph are both graph sources; pick one");
  }
}

namespace {

Tensor fan_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return Tensor::uniform({rows, cols}, -s, s, rng, true);
}

std::size_t built_layers(const ModelConfig& cfg) {
  if (cfg.fixed_graph) return 0;
  return cfg.single_hop ? 1 : cfg.depth;
}

}  // namespace

ModelParams init_model(const ModelConfig& cfg, std::size_t vocab_size, std::mt19937_64& rng) {
  cfg.validate();
  ModelParams p;
  if (vocab_size > 0) p.embed = fan_uniform(vocab_size, cfg.d, rng);
  p.branches.resize(cfg.traits);
  for (BranchParams& br : p.branches) {
    for (std::size_t k = 0; k < built_layers(cfg); ++k) {
      br.wq.push_back(fan_uniform(cfg.d, cfg.hid, rng));
      br.wk.push_back(fan_uniform(cfg.d, cfg.hid, rng));
    }
    br.c = fan_uniform(cfg.d, 1, rng);
    br.wu = fan_uniform(cfg.d, 2, rng);
    br.bu = Tensor::zeros({2}, true);
    if (cfg.plain_gcn) {
      for (std::size_t k = 0; k < cfg.depth; ++k) br.gcn_w.push_back(fan_uniform(cfg.d, cfg.d, rng));
    }
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> named_parameters(const ModelParams& params) {
  std::vector<std::pair<std::string, Tensor>> out;
  if (params.embed.defined()) out.emplace_back("embed", params.embed);
  for (std::size_t t = 0; t < params.branches.size(); ++t) {
    const BranchParams& br = params.branches[t];
    const std::string prefix = "branch" + std::to_string(t) + ".";
    for (std::size_t k = 0; k < br.wq.size(); ++k) {
      const std::string layer = prefix + "l2c." + std::to_string(k + 1) + ".";
      out.emplace_back(layer + "wq", br.wq[k]);
      out.emplace_back(layer + "wk", br.wk[k]);
    }
    out.emplace_back(prefix + "c", br.c);
    out.emplace_back(prefix + "wu", br.wu);
    out.emplace_back(prefix + "bu", br.bu);
    for (std::size_t k = 0; k < br.gcn_w.size(); ++k) {
      out.emplace_back(prefix + "gcn." + std::to_string(k + 1) + ".w", br.gcn_w[k]);
    }
  }
  return out;
}

ParamCounts count_parameters(const ModelParams& params) {
  ParamCounts counts;
  if (params.embed.defined()) counts.encoder = params.embed.numel();
  for (const BranchParams& br : params.branches) {
    for (std::size_t k = 0; k < br.wq.size(); ++k) {
      counts.graph_builder += br.wq[k].numel() + br.wk[k].numel();
    }
    counts.propagation += br.c.numel() + br.wu.numel() + br.bu.numel();
    for (const Tensor& w : br.gcn_w) counts.propagation += w.numel();
  }
  return counts;
}

namespace {

// 1 x (n+1) row selector: the user-node row, or the mean of post rows when
// the user node is excluded from classification.
Tensor class_selector(std::size_t posts, bool no_special_node) {
  std::vector<double> s(posts + 1, 0.0);
  if (no_special_node) {
    for (std::size_t i = 0; i < posts; ++i) s[i] = 1.0 / static_cast<double>(posts);
  } else {
    s[posts] = 1.0;
  }
  return Tensor::constant({1, posts + 1}, std::move(s));
}

}  // namespace

ForwardTrace forward(const UserSample& sample, const ModelParams& params,
                     const ModelConfig& cfg, PayloadKind kind, bool training,
                     std::mt19937_64& rng) {
  cfg.validate();
  if (params.branches.size() != cfg.traits) {
    throw ConfigError("forward: " + std::to_string(params.branches.size()) + " branches for " +
                      std::to_string(cfg.traits) + " traits");
  }
  NodeMatrix enc;
  if (kind == PayloadKind::tokens) {
    if (sample.token_posts.empty()) {
      throw ConfigError("forward: token encoder selected but sample '" + sample.id +
                        "' has no token posts");
    }
    if (!params.embed.defined()) throw ConfigError("forward: token encoder needs an embedding table");
    if (params.embed.cols() != cfg.d) {
      throw ConfigError("forward: embedding width " + std::to_string(params.embed.cols()) +
                        " != configured d " + std::to_string(cfg.d));
    }
    enc = encode_bag(sample, params.embed, cfg.dropout_encoder, training, rng);
  } else {
    if (sample.vector_posts.empty()) {
      throw ConfigError("forward: vector encoder selected but sample '" + sample.id +
                        "' has no vector posts");
    }
    enc = load_precomputed(sample, cfg.d);
  }

  const Tensor h0 = enc.h;
  LayerGraphPtr fixed;
  if (cfg.fixed_graph) fixed = build_fixed_graph(h0, cfg.fixed_graph_threshold);

  ForwardTrace trace;
  trace.posts = enc.posts;
  std::vector<LayerGraphPtr> all_graphs;
  all_graphs.reserve(cfg.traits * cfg.depth);
  for (std::size_t t = 0; t < cfg.traits; ++t) {
    const BranchParams& br = params.branches[t];
    TraitTrace tt;
    std::vector<Tensor> stack{h0};
    Tensor prev = h0;
    for (std::size_t k = 0; k < cfg.depth; ++k) {
      LayerGraphPtr g;
      if (cfg.fixed_graph) {
        g = fixed;
      } else if (cfg.single_hop && k > 0) {
        g = tt.graphs[0];
      } else {
        const std::size_t kb = cfg.single_hop ? 0 : k;
        Tensor r = adjacency_weights(prev, br.wq[kb], br.wk[kb]);
        if (cfg.undirected) r = symmetrize(r);
        g = differentiable_threshold(r, cfg.l2c());
      }
      tt.graphs.push_back(g);
      all_graphs.push_back(g);
      const Tensor a_hat = normalize_adjacency(g->masked);
      prev = cfg.plain_gcn ? gcn_layer(prev, a_hat, br.gcn_w[k]) : propagate(prev, a_hat);
      stack.push_back(prev);
    }
    Tensor h_out = layer_attention(stack, br.c);
    h_out = dropout(h_out, cfg.dropout_other, training, rng);
    const Tensor feat = matmul(class_selector(enc.posts, cfg.no_special_node), h_out);
    tt.logits = add(matmul(feat, br.wu), reshape(br.bu, {1, 2}));
    trace.traits.push_back(std::move(tt));
  }
  trace.l0 = l0_penalty(all_graphs);
  return trace;
}

Tensor trace_cross_entropy(const ForwardTrace& trace, const std::vector<int>& labels) {
  if (labels.size() != trace.traits.size()) {
    throw DataError("loss: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(trace.traits.size()) + " traits");
  }
  Tensor total;
  for (std::size_t t = 0; t < trace.traits.size(); ++t) {
    Tensor ce = softmax_cross_entropy(trace.traits[t].logits, {labels[t]});
    total = total.defined() ? add(total, ce) : ce;
  }
  return total;
}

LossBundle batch_loss(const std::vector<ForwardTrace>& traces,
                      const std::vector<std::vector<int>>& labels, double lambda,
                      const ModelConfig& cfg) {
  if (traces.empty()) throw ConfigError("loss: empty batch");
  if (labels.size() != traces.size()) {
    throw ConfigError("loss: " + std::to_string(labels.size()) + " label rows for " +
                      std::to_string(traces.size()) + " traces");
  }
  if (lambda < 0.0 || lambda > 100.0) {
    throw ConfigError("loss: lambda must lie in [0, 100], got " + std::to_string(lambda));
  }
  LossBundle out;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Tensor ce = trace_cross_entropy(traces[i], labels[i]);
    out.ce = out.ce.defined() ? add(out.ce, ce) : ce;
    out.l0 = out.l0.defined() ? add(out.l0, traces[i].l0) : traces[i].l0;
  }
  if (traces.size() > 1) out.ce = scale(out.ce, 1.0 / static_cast<double>(traces.size()));
  out.total = cfg.l0_enabled ? add(scale(out.ce, lambda), out.l0) : out.ce;
  return out;
}

std::vector<int> predict(const ForwardTrace& trace) {
  std::vector<int> classes;
  classes.reserve(trace.traits.size());
  for (const TraitTrace& tt : trace.traits) {
    classes.push_back(tt.logits.at(0, 1) > tt.logits.at(0, 0) ? 1 : 0);
  }
  return classes;
}

LayerGraphPtr build_fixed_graph(const Tensor& h, double threshold) {
  if (h.rank() != 2) throw ConfigError("fixed graph: node matrix must be rank-2");
  const std::size_t m = h.rows(), d = h.cols();
  const auto hv = h.values();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += hv[i * d + j] * hv[i * d + j];
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      throw DataError("fixed graph: node row " + std::to_string(i) + " has zero norm");
    }
  }
  auto g = std::make_shared<LayerGraph>();
  std::vector<double> cosines(m * m);
  std::vector<double> adjacency(m * m, 0.0);
  g->kept.assign(m * m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t x = 0; x < d; ++x) dot += hv[i * d + x] * hv[j * d + x];
      const double cos = dot / (norms[i] * norms[j]);
      cosines[i * m + j] = cos;
      if (i != j && cos > threshold) {
        adjacency[i * m + j] = 1.0;
        g->kept[i * m + j] = 1;
        ++g->edge_count;
      }
    }
  }
  g->raw = Tensor::constant({m, m}, std::move(cosines));
  g->masked = Tensor::constant({m, m}, std::move(adjacency));
  return g;
}

}  // namespace ddgcn
