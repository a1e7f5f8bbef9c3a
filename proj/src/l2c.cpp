#include "ddgcn/l2c.hpp"

#include <stdexcept>

namespace ddgcn {

Tensor adjacency_weights(const Tensor& h, const Tensor& wq, const Tensor& wk) {
  Tensor q = relu(matmul(h, wq));
  Tensor k = matmul(h, wk);
  return sigmoid(matmul(q, transpose(k)));
}

Tensor symmetrize(const Tensor& r) {
  if (r.rank() != 2 || r.rows() != r.cols()) {
    throw std::invalid_argument("symmetrize: matrix must be square, got " +
                                shape_str(r.shape()));
  }
  return scale(add(r, transpose(r)), 0.5);
}

LayerGraphPtr differentiable_threshold(const Tensor& r, const L2CConfig& cfg) {
  if (cfg.mu <= 0.0 || cfg.mu >= 1.0 || cfg.eps <= 0.0) {
    throw std::invalid_argument("threshold: mu must lie in (0,1) and eps must be positive");
  }
  auto g = std::make_shared<LayerGraph>();
  g->raw = r;

  const auto rv = r.values();
  g->kept.resize(rv.size());
  std::vector<double> mask(rv.size());
  for (std::size_t i = 0; i < rv.size(); ++i) {
    const bool keep = rv[i] > cfg.mu;  // strict: r == mu drops the edge
    g->kept[i] = keep ? 1 : 0;
    mask[i] = keep ? 1.0 : 0.0;
    g->edge_count += keep ? 1 : 0;
  }

  Tensor scaled = div(r, add_scalar(stop_gradient(r), cfg.eps));
  g->masked = mul(scaled, Tensor::constant(r.shape(), std::move(mask)));
  return g;
}

Tensor l0_penalty(const std::vector<LayerGraphPtr>& graphs) {
  if (graphs.empty()) throw std::invalid_argument("l0_penalty: no graphs");
  Tensor total = reduce_sum(graphs[0]->masked);
  for (std::size_t k = 1; k < graphs.size(); ++k) {
    total = add(total, reduce_sum(graphs[k]->masked));
  }
  return total;
}

}  // namespace ddgcn
