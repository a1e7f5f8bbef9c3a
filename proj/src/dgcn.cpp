#include "ddgcn/dgcn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddgcn/errors.hpp"

namespace ddgcn {

namespace {

// Row sums with per-row sorted accumulation: the sum of each row depends only
// on the multiset of its entries, which keeps normalization equivariant under
// node relabeling. The gradient of a sum is order-free.
Tensor sorted_row_sums(const Tensor& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  return detail::make_op(
      {n}, {a},
      [n, m](const detail::Node&, const std::vector<double>& g,
             const std::vector<std::vector<double>*>& pa) {
        if (!pa[0]) return;
        auto& da = *pa[0];
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) da[i * m + j] += g[i];
      },
      [n, m](detail::Node& self) {
        const auto& av = self.parents[0]->values;
        std::vector<double> row(m);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) row[j] = av[i * m + j];
          std::sort(row.begin(), row.end());
          double s = 0.0;
          for (double x : row) s += x;
          self.values[i] = s;
        }
      });
}

Tensor identity_matrix(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor::constant({n, n}, std::move(v));
}

}  // namespace

Tensor normalize_adjacency(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols()) {
    throw std::invalid_argument("normalize_adjacency: matrix must be square, got " +
                                shape_str(a.shape()));
  }
  const std::size_t n = a.rows();
  Tensor with_loops = add(a, identity_matrix(n));
  Tensor inv_sqrt_deg = rsqrt(sorted_row_sums(with_loops));  // degrees >= 1

  Tensor ones_col = Tensor::full({n, 1}, 1.0);
  Tensor ones_row = Tensor::full({1, n}, 1.0);
  Tensor row_scale = matmul(reshape(inv_sqrt_deg, {n, 1}), ones_row);  // [i,j] = d_i^-1/2
  Tensor col_scale = matmul(ones_col, reshape(inv_sqrt_deg, {1, n}));  // [i,j] = d_j^-1/2
  return mul(mul(row_scale, with_loops), col_scale);
}

Tensor propagate(const Tensor& h, const Tensor& a_hat) { return matmul(a_hat, h); }

Tensor gcn_layer(const Tensor& h, const Tensor& a_hat, const Tensor& w) {
  return relu(matmul(matmul(a_hat, h), w));
}

Tensor layer_attention(const std::vector<Tensor>& stack, const Tensor& c) {
  if (stack.empty()) throw std::invalid_argument("layer_attention: empty stack");
  const std::size_t n = stack[0].rows();
  const std::size_t d = stack[0].cols();
  if (c.rank() != 2 || c.rows() != d || c.cols() != 1) {
    throw std::invalid_argument("layer_attention: projection must be " + std::to_string(d) +
                                " x 1, got " + shape_str(c.shape()));
  }
  Tensor ones_row = Tensor::full({1, d}, 1.0);
  Tensor out;
  for (const Tensor& h : stack) {
    if (h.rows() != n || h.cols() != d) {
      throw std::invalid_argument("layer_attention: stack shapes disagree: " +
                                  shape_str(stack[0].shape()) + " vs " + shape_str(h.shape()));
    }
    Tensor scores = sigmoid(matmul(h, c));            // n x 1
    Tensor weighted = mul(matmul(scores, ones_row), h);  // s_i broadcast over columns
    out = out.defined() ? add(out, weighted) : weighted;
  }
  return out;
}

double smoothness(const Tensor& h, bool exclude_last_row) {
  if (h.rank() != 2) {
    throw std::invalid_argument("smoothness: matrix expected, got " + shape_str(h.shape()));
  }
  const std::size_t rows = h.rows() - (exclude_last_row ? 1 : 0);
  const std::size_t d = h.cols();
  if (rows < 2) throw std::invalid_argument("smoothness: need at least two rows");

  std::vector<std::size_t> usable;
  std::vector<double> norms(h.rows());
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += h.at(i, j) * h.at(i, j);
    if (sq > 0.0) {
      norms[i] = std::sqrt(sq);
      usable.push_back(i);
    }
  }
  if (usable.size() < 2) {
    throw NumericError("smoothness: fewer than two rows with nonzero norm");
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < usable.size(); ++a) {
    for (std::size_t b = a + 1; b < usable.size(); ++b) {
      const std::size_t i = usable[a], j = usable[b];
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += h.at(i, k) * h.at(j, k);
      total += dot / (norms[i] * norms[j]);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace ddgcn
