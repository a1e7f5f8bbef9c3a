#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ddgcn/tensor.hpp"

namespace ddgcn {

struct L2CConfig {
  double mu = 0.5;   // edge threshold; entries must exceed it strictly
  double eps = 1e-6;
  bool undirected = false;
  bool single_hop = false;
};

// One layer's learned graph. masked holds 0 where raw <= mu and r/(r+eps)
// where raw > mu, so every kept edge is within eps/mu of 1 while its gradient
// w.r.t. the raw weight stays 1/(r+eps).
struct LayerGraph {
  Tensor raw;
  Tensor masked;
  std::vector<std::uint8_t> kept;  // row-major keep mask
  long long edge_count = 0;

  std::size_t nodes() const { return raw.rows(); }
};

// Shared so single-hop mode can reuse one graph object across layers; tests
// assert pointer identity in that mode.
using LayerGraphPtr = std::shared_ptr<LayerGraph>;

// Pairwise edge scores sigma(relu(H Wq) (H Wk)^T) over all node pairs,
// including self-pairs and the user node. relu applies to the query side
// only.
Tensor adjacency_weights(const Tensor& h, const Tensor& wq, const Tensor& wk);

// (R + R^T) / 2; applied before thresholding in undirected mode. IEEE
// addition commutes, so the result is exactly symmetric.
Tensor symmetrize(const Tensor& r);

// The stop-gradient threshold: masked = (r / (detach(r) + eps)) * [r > mu].
LayerGraphPtr differentiable_threshold(const Tensor& r, const L2CConfig& cfg);

// Sum of kept-edge weights across layers; differentiable, within
// edge_count * eps/mu of the integer edge count.
Tensor l0_penalty(const std::vector<LayerGraphPtr>& graphs);

}  // namespace ddgcn
