#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ddgcn/corpus.hpp"
#include "ddgcn/l2c.hpp"
#include "ddgcn/tensor.hpp"

namespace ddgcn {

struct ModelConfig {
  std::size_t d = 32;    // node representation width
  std::size_t hid = 32;  // graph-builder hidden width
  std::size_t depth = 2;  // propagation layers, 1..24
  std::size_t traits = 4;
  double mu = 0.5;
  double eps = 1e-6;
  double dropout_encoder = 0.1;
  double dropout_other = 0.2;  // applied once, after layer attention

  // Variant switchboard. plain_gcn swaps the propagation style; the graph
  // source is learned per layer unless single_hop (reuse the layer-1 graph)
  // or fixed_graph (cosine-threshold graph, built once per sample).
  bool plain_gcn = false;
  bool single_hop = false;
  bool undirected = false;
  bool fixed_graph = false;
  double fixed_graph_threshold = 0.5;
  bool no_special_node = false;
  bool l0_enabled = true;

  void validate() const;  // ConfigError on out-of-range fields
  L2CConfig l2c() const { return {mu, eps, undirected, single_hop}; }
};

// One trait's parameters. Branches share nothing but the encoder: trait t's
// labels can only reach trait t's branch gradients.
struct BranchParams {
  std::vector<Tensor> wq, wk;  // graph builder, one d x hid pair per built layer
  Tensor c;                    // layer-attention projection, d x 1
  Tensor wu;                   // classifier weight, d x 2
  Tensor bu;                   // classifier bias, 2
  std::vector<Tensor> gcn_w;   // coupled-variant weights, depth of d x d
};

struct ModelParams {
  Tensor embed;  // vocab x d embedding table; undefined for the vectors encoder
  std::vector<BranchParams> branches;
};

// Seeded initialization. vocab_size 0 skips the embedding table (precomputed
// vectors). Weights draw uniformly at the fan-balanced scale sqrt(6/(fan_in +
// fan_out)) in a fixed order; biases start at zero. single_hop allocates only
// the layer-1 graph builder and fixed_graph allocates none.
ModelParams init_model(const ModelConfig& cfg, std::size_t vocab_size, std::mt19937_64& rng);

// Canonical key -> tensor listing, in serialization order: embed, then per
// trait branch{t}.l2c.{k}.wq|wk, branch{t}.c, branch{t}.wu, branch{t}.bu,
// branch{t}.gcn.{k}.w. k is 1-based (layer k builds from H^{k-1}).
std::vector<std::pair<std::string, Tensor>> named_parameters(const ModelParams& params);

// Trainable scalar counts by role. propagation covers c + classifier (+ the
// coupled variant's per-layer weights); graph_builder covers the learn-to-
// connect weights. Decoupled propagation adds no per-layer parameters, so its
// propagation count is constant in depth.
struct ParamCounts {
  std::size_t encoder = 0;
  std::size_t graph_builder = 0;
  std::size_t propagation = 0;
  std::size_t total() const { return encoder + graph_builder + propagation; }
};
ParamCounts count_parameters(const ModelParams& params);

struct TraitTrace {
  std::vector<LayerGraphPtr> graphs;  // depth entries; shared object when reused
  Tensor logits;                      // 1 x 2
};

struct ForwardTrace {
  std::vector<TraitTrace> traits;
  Tensor l0;  // scalar: sum of kept-edge weights over traits and layers
  std::size_t posts = 0;
};

// Full forward pass for one user: encode, then per trait build-normalize-
// propagate for each layer, layer attention over H^0..H^depth, logits from
// the user-node row (or the mean of post rows when no_special_node). rng is
// consumed only when training (dropout masks).
ForwardTrace forward(const UserSample& sample, const ModelParams& params,
                     const ModelConfig& cfg, PayloadKind kind, bool training,
                     std::mt19937_64& rng);

// Sum over traits of softmax cross-entropy against the binary labels.
Tensor trace_cross_entropy(const ForwardTrace& trace, const std::vector<int>& labels);

struct LossBundle {
  Tensor total;
  Tensor ce;  // mean over the batch of per-sample trait-summed cross-entropy
  Tensor l0;  // sum over the batch of per-sample penalties
};

// total = lambda * ce + l0 when l0_enabled, else total = ce (and lambda and
// edge counts are ignored). lambda outside [0, 100] is a ConfigError.
LossBundle batch_loss(const std::vector<ForwardTrace>& traces,
                      const std::vector<std::vector<int>>& labels, double lambda,
                      const ModelConfig& cfg);

// Per-trait argmax; an exact tie resolves to class 0.
std::vector<int> predict(const ForwardTrace& trace);

// Cosine-similarity graph over node rows: edge i->j where cos(h_i, h_j)
// strictly exceeds threshold, i != j. Entries are constants; nothing trains
// through a fixed graph. DataError on a zero-norm row.
LayerGraphPtr build_fixed_graph(const Tensor& h, double threshold);

}  // namespace ddgcn
